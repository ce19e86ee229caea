use condis::gaussian::{
    base_solution, cmi_constrained_solution, gaussian_cmi, gaussian_mi, latent_source_covariance,
    make_correlated_covariance, mi_constrained_solution, variance_explained, LinearGaussianModel,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x6a65),
        ..Config::default()
    }
}

fn mixing() -> impl Strategy<Value = DMatrix<f64>> {
    (0.5f64..2.0, -0.6f64..0.6, -0.6f64..0.6, 0.5f64..2.0)
        .prop_map(|(a, b, c, d)| DMatrix::from_row_slice(2, 2, &[a, b, c, d]))
}

proptest! {
    #![proptest_config(config(96))]

    #[test]
    fn cmi_variance_is_flat_across_test_correlations(a in mixing(), rho in -0.9f64..0.9, sigma2 in 0.01f64..1.0) {
        let model = LinearGaussianModel::isotropic(a, rho, sigma2).unwrap();
        let sol = cmi_constrained_solution(&model).unwrap();
        let ves: Vec<f64> = [-0.8, -0.4, 0.0, 0.4, 0.8]
            .iter()
            .map(|&r| variance_explained(&sol, &model, &make_correlated_covariance(r, 2).unwrap()).unwrap())
            .collect();
        let spread = ves.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ves.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(spread < 1e-10, "spread {spread}");
    }

    #[test]
    fn base_is_the_training_optimum(a in mixing(), rho in -0.9f64..0.9, sigma2 in 0.01f64..1.0) {
        let model = LinearGaussianModel::isotropic(a, rho, sigma2).unwrap();
        let cs = model.source_cov().clone();
        let base = variance_explained(&base_solution(&model).unwrap(), &model, &cs).unwrap();
        let mi = variance_explained(&mi_constrained_solution(&model).unwrap(), &model, &cs).unwrap();
        let cmi = variance_explained(&cmi_constrained_solution(&model).unwrap(), &model, &cs).unwrap();
        prop_assert!(base >= mi - 1e-10, "base {base} mi {mi}");
        prop_assert!(base >= cmi - 1e-10, "base {base} cmi {cmi}");
    }

    #[test]
    fn decorrelated_latents_lose_source_information(a in mixing(), rho in prop_oneof![-0.9f64..-0.05, 0.05f64..0.9], sigma2 in 0.01f64..1.0) {
        let model = LinearGaussianModel::isotropic(a, rho, sigma2).unwrap();
        let base = latent_source_covariance(&base_solution(&model).unwrap(), &model);
        let mi = mi_constrained_solution(&model).unwrap();
        let joint = latent_source_covariance(&mi, &model);
        prop_assert!(joint[(0, 1)].abs() < 1e-9 * joint[(0, 0)].max(joint[(1, 1)]));
        let lost = (0..2).any(|k| {
            gaussian_mi(&joint, &[k], &[2 + k]).unwrap() < gaussian_mi(&base, &[k], &[2 + k]).unwrap() - 1e-12
        });
        prop_assert!(lost);
    }

    #[test]
    fn gaussian_information_is_nonnegative(entries in prop::collection::vec(-2.0f64..2.0, 16), jitter in 0.01f64..1.0) {
        let b = DMatrix::from_row_slice(4, 4, &entries);
        let c = &b * b.transpose() + DMatrix::identity(4, 4) * jitter;
        prop_assert!(gaussian_mi(&c, &[0], &[1, 2]).unwrap() >= -1e-10);
        prop_assert!(gaussian_mi(&c, &[0, 3], &[1]).unwrap() >= -1e-10);
        prop_assert!(gaussian_cmi(&c, &[0], &[1], &[2, 3]).unwrap() >= -1e-10);
        prop_assert!(gaussian_cmi(&c, &[2], &[3, 1], &[0]).unwrap() >= -1e-10);
    }
}

/// Ordinary least squares `Σ s xᵀ (Σ x xᵀ)⁻¹` from Monte-Carlo samples.
fn ols(model: &LinearGaussianModel, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ls = model.source_cov().clone().cholesky().unwrap().l();
    let ln = model.noise_cov().clone().cholesky().unwrap().l();
    let mut sxt = DMatrix::<f64>::zeros(2, 2);
    let mut xxt = DMatrix::<f64>::zeros(2, 2);
    for _ in 0..n {
        let u = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = &ls * u;
        let x = model.mixing() * &s + &ln * e;
        sxt += &s * x.transpose();
        xxt += &x * x.transpose();
    }
    sxt * xxt.try_inverse().unwrap()
}

#[test]
fn base_solution_matches_monte_carlo_least_squares() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let a = DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 } + rng.random_range(-0.4..0.4));
        let rho = rng.random_range(-0.8..0.8);
        let model = LinearGaussianModel::isotropic(a, rho, 0.1).unwrap();
        let m = base_solution(&model).unwrap().regressor();
        let fit = ols(&model, 1_000_000, seed);
        let err = (&m - &fit).abs().max();
        assert!(err < 1e-2, "seed {seed}: max deviation {err}");
    }
}
