use condis::eval::{
    analytic_variance_sweep, confusion, gaussian_total_correlation, mig, mutual_info_score, sap, variance_sweep, Binning,
    Predictor,
};
use condis::data::AttributeTable;
use condis::gaussian::{base_solution, cmi_constrained_solution, LinearGaussianModel};
use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0xe7a1),
        ..Config::default()
    }
}

/// Latents that partly encode two binary factors.
fn code(seed: u64, n: usize) -> (Array2<f64>, Array2<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Array2::from_shape_fn((n, 2), |_| rng.random::<bool>() as usize);
    let z = Array2::from_shape_fn((n, 3), |(i, j)| {
        let signal = match j {
            0 => f[(i, 0)] as f64,
            1 => 0.6 * f[(i, 1)] as f64 + 0.3 * f[(i, 0)] as f64,
            _ => 0.0,
        };
        signal + 0.4 * rng.sample::<f64, _>(StandardNormal)
    });
    (z, f)
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn metrics_ignore_row_order(seed in any::<u64>()) {
        let (z, f) = code(seed, 600);
        let mut order: Vec<usize> = (0..600).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let (zs, fs) = (z.select(Axis(0), &order), f.select(Axis(0), &order));
        for binning in [Binning::EqualWidth, Binning::EqualFrequency] {
            prop_assert!((mig(&z, &f, 20, binning).unwrap() - mig(&zs, &fs, 20, binning).unwrap()).abs() < 1e-12);
            let a = mutual_info_score(&z, &f, &[0, 1, 1], 20, binning).unwrap();
            let b = mutual_info_score(&zs, &fs, &[0, 1, 1], 20, binning).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(sap(&z, &f).unwrap(), sap(&zs, &fs).unwrap());
        let tc = gaussian_total_correlation(&z).unwrap() - gaussian_total_correlation(&zs).unwrap();
        prop_assert!(tc.abs() < 1e-12);
    }

    #[test]
    fn threshold_and_rank_scores_ignore_monotone_warps(seed in any::<u64>(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let (z, f) = code(seed, 500);
        let cubic = z.mapv(|v| v * v * v + v);
        let affine = z.mapv(|v| scale * v + shift);
        let sap0 = sap(&z, &f).unwrap();
        prop_assert_eq!(sap(&cubic, &f).unwrap(), sap0);
        prop_assert_eq!(sap(&affine, &f).unwrap(), sap0);
        let m0 = mig(&z, &f, 20, Binning::EqualFrequency).unwrap();
        prop_assert!((mig(&cubic, &f, 20, Binning::EqualFrequency).unwrap() - m0).abs() < 1e-12);
        prop_assert!((mig(&affine, &f, 20, Binning::EqualFrequency).unwrap() - m0).abs() < 1e-12);
        let w0 = mig(&z, &f, 20, Binning::EqualWidth).unwrap();
        prop_assert!((mig(&affine, &f, 20, Binning::EqualWidth).unwrap() - w0).abs() < 1e-12);
    }

    #[test]
    fn total_correlation_ignores_rescaling(seed in any::<u64>(), dim in 0usize..3) {
        let (z, _) = code(seed, 400);
        let mut scaled = z.clone();
        scaled.column_mut(dim).mapv_inplace(|v| 10.0 * v);
        let d = gaussian_total_correlation(&z).unwrap() - gaussian_total_correlation(&scaled).unwrap();
        prop_assert!(d.abs() < 1e-10);
    }
}

#[test]
fn empirical_sweep_matches_closed_form() {
    let rhos = [-0.8, -0.4, 0.0, 0.4, 0.8];
    let model = LinearGaussianModel::isotropic(DMatrix::identity(2, 2), 0.8, 0.1).unwrap();
    for sol in [base_solution(&model).unwrap(), cmi_constrained_solution(&model).unwrap()] {
        let mc = variance_sweep("mc", &sol, &model, &rhos, 0.8, 1_000_000, &[7]).unwrap();
        let exact = analytic_variance_sweep("exact", &sol, &model, &rhos, 0.8).unwrap();
        for (a, b) in mc.points.iter().zip(&exact.points) {
            assert_eq!(a.rho, b.rho);
            assert!((a.mean - b.mean).abs() < 0.005, "rho {}: {} vs {}", a.rho, a.mean, b.mean);
        }
    }
}

struct Coin(u64);

impl Predictor for Coin {
    fn predict(&self, x: &Array2<f64>) -> condis::Result<Array2<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        Ok(Array2::from_shape_fn((x.nrows(), 1), |_| rng.random::<bool>() as usize))
    }
}

#[test]
fn random_predictor_fills_cells_evenly() {
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = Array2::from_shape_fn((n, 1), |_| rng.random::<bool>() as usize);
    let attrs = AttributeTable::binary(labels).unwrap();
    let m = &confusion(&Coin(4), &Array2::zeros((n, 1)), &attrs).unwrap()[0];
    assert_eq!(m.total(), n);
    // Each cell is Binomial(n, 1/4); allow 4 standard deviations.
    let bound = 4.0 * (n as f64 * 0.25 * 0.75).sqrt();
    for &c in m.counts.iter() {
        assert!((c as f64 - n as f64 / 4.0).abs() < bound, "{c}");
    }
}
