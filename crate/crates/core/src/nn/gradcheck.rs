use super::Parameters;

/// Largest relative discrepancy between `grads` and central differences of
/// `loss` over every parameter of `params`.
pub fn max_relative_error<P, F>(params: &P, grads: &P, mut loss: F, h: f64) -> f64
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.2.to_vec()).collect();
    let mut probe = params.clone();
    let mut flat = 0;
    let mut worst = 0.0f64;
    let tensors = probe.slices_mut().len();
    for t in 0..tensors {
        let len = probe.slices_mut()[t].len();
        for i in 0..len {
            let orig = probe.slices_mut()[t][i];
            probe.slices_mut()[t][i] = orig + h;
            let up = loss(&probe);
            probe.slices_mut()[t][i] = orig - h;
            let down = loss(&probe);
            probe.slices_mut()[t][i] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = analytic[flat];
            let denom = fd.abs().max(an.abs()).max(1e-4);
            worst = worst.max((fd - an).abs() / denom);
            flat += 1;
        }
    }
    worst
}

pub fn assert_param_grads<P, F>(params: &P, grads: &P, loss: F, tol: f64)
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let err = max_relative_error(params, grads, loss, 1e-5);
    assert!(err < tol, "gradient check failed: relative error {err:.3e}");
}

/// Outcome of [`audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradAudit {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates skipped because the loss is not differentiable within
    /// `±h` (a ReLU changed sign), detected by disagreeing one-sided
    /// differences.
    pub kinks: usize,
}

/// Central-difference check that skips coordinates where the forward and
/// backward one-sided differences disagree by more than `kink_tol`
/// (relative), since neither side then estimates the gradient.
pub fn audit<P, F>(params: &P, grads: &P, mut loss: F, h: f64, kink_tol: f64) -> GradAudit
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.2.to_vec()).collect();
    let base = loss(params);
    let mut probe = params.clone();
    let mut out = GradAudit {
        max_relative_error: 0.0,
        checked: 0,
        kinks: 0,
    };
    let mut flat = 0;
    let tensors = probe.slices_mut().len();
    for t in 0..tensors {
        let len = probe.slices_mut()[t].len();
        for i in 0..len {
            let orig = probe.slices_mut()[t][i];
            probe.slices_mut()[t][i] = orig + h;
            let up = loss(&probe);
            probe.slices_mut()[t][i] = orig - h;
            let down = loss(&probe);
            probe.slices_mut()[t][i] = orig;
            let (fwd, bwd) = ((up - base) / h, (base - down) / h);
            let an = analytic[flat];
            flat += 1;
            if (fwd - bwd).abs() > kink_tol * fwd.abs().max(bwd.abs()).max(1e-4) {
                out.kinks += 1;
                continue;
            }
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(an.abs()).max(1e-4);
            out.max_relative_error = out.max_relative_error.max((fd - an).abs() / denom);
            out.checked += 1;
        }
    }
    out
}
