use proptest::prelude::*;
use std::f64::consts::PI;

use wigner_detect::linalg::shifted_log_det;
use wigner_detect::model::{sample_spiked, sample_wigner, trial_rng, NoiseSpec, SpikePrior};
use wigner_detect::spectrum::{
    self, clt_mean_variance, critical_value, lss, lss_mean_variance, mean_shift, semicircle_mean,
    transformed_clt_mean_variance, transformed_mean_shift, OptimalLss, Spectrum, TransformedLssModel,
};
use wigner_detect::transform::DensityFunctionals;

const SECH: DensityFunctionals =
    DensityFunctionals { fh: PI * PI / 8.0, fhd: PI * PI / 8.0, gh: PI * PI / 16.0, w4t: 1.5 };

#[test]
fn log_det_identity_over_fifty_matrices() {
    let noise = NoiseSpec::goe();
    for t in 0..50 {
        let mut rng = trial_rng(77, t);
        let lam = 0.05 + 0.01 * t as f64;
        let m = sample_wigner(&noise, 40 + t as usize, &mut rng).unwrap();
        let s = spectrum::eigenvalues(&m).unwrap();
        let root = lam.sqrt();
        if s.largest().unwrap() >= (1.0 + lam) / root {
            continue;
        }
        let from_eigs: f64 = s.eigenvalues().iter().map(|mu| (1.0 + lam - root * mu).ln()).sum();
        let dense = shifted_log_det(&m, 1.0 + lam, root).unwrap();
        assert!((from_eigs - dense).abs() <= 1e-6 * from_eigs.abs().max(1e-300), "trial {t}");
    }
}

#[test]
fn eigen_and_cholesky_statistics_agree() {
    let phi = OptimalLss::plain(0.45, 2.0, 3.0).unwrap();
    for t in 0..10 {
        let m = sample_spiked(&NoiseSpec::goe(), &SpikePrior::rademacher(), 96, 2, 0.45, &mut trial_rng(5, t)).unwrap();
        let a = phi.statistic(&spectrum::eigenvalues(&m).unwrap()).unwrap();
        let b = phi.statistic_dense(&m).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

/// The statistic is the centered linear statistic of phi.
#[test]
fn statistic_is_centered_lss_of_phi() {
    let lam = 0.3;
    let phi = OptimalLss::plain(lam, 1.0, 5.0).unwrap();
    let m = sample_wigner(&NoiseSpec::sech(), 80, &mut trial_rng(9, 0)).unwrap();
    let s = spectrum::eigenvalues(&m).unwrap();
    let f = |x: f64| phi.value(x).unwrap();
    let centered = lss(f, &s).unwrap() - 80.0 * semicircle_mean(f);
    assert!((centered - phi.statistic(&s).unwrap()).abs() < 1e-9);
}

#[test]
fn clt_of_phi_reproduces_closed_forms() {
    for &(w2, w4) in &[(2.0, 3.0), (1.0, 5.0)] {
        for i in 1..=9 {
            let lam = i as f64 / 10.0;
            let phi = OptimalLss::plain(lam, w2, w4).unwrap();
            let f = |x: f64| phi.value(x).unwrap();
            let model = lss_mean_variance(lam, w2, w4, 0).unwrap();
            for k in 0..3 {
                let clt = clt_mean_variance(f, lam, w2, w4, k, None).unwrap();
                assert!((clt.mean - model.mean_for_rank(k)).abs() < 1e-8, "w2={w2} lam={lam} k={k}");
                assert!((clt.variance - model.v0).abs() < 1e-8, "w2={w2} lam={lam}");
            }
            // the variance is twice the per-spike shift
            assert!((model.v0 - 2.0 * mean_shift(lam, w2, w4)).abs() < 1e-12);
        }
    }
}

#[test]
fn transformed_clt_of_phi_reproduces_closed_forms() {
    for i in 1..=7 {
        let lam = i as f64 / 10.0;
        let phi = OptimalLss::transformed(lam, &SECH, 1.0).unwrap();
        let f = |x: f64| phi.value(x).unwrap();
        let model = TransformedLssModel::new(lam, &SECH, 1.0, 0).unwrap();
        for k in 0..3 {
            let clt = transformed_clt_mean_variance(f, lam, &SECH, 1.0, k, None).unwrap();
            assert!((clt.mean - model.mean_for_rank(k)).abs() < 1e-8, "lam={lam} k={k}");
            assert!((clt.variance - model.v0).abs() < 1e-8);
        }
        assert!((model.v0 - 2.0 * transformed_mean_shift(lam, &SECH, 1.0)).abs() < 1e-12);
    }
}

/// No other function separates the hypotheses better, relative to its spread.
#[test]
fn phi_maximizes_separation() {
    type TestFn = (&'static str, Box<dyn Fn(f64) -> f64>);
    let tests: [TestFn; 4] = [
        ("x", Box::new(|x| x)),
        ("x^2", Box::new(|x| x * x)),
        ("exp", Box::new(|x: f64| (0.4 * x).exp())),
        ("cubic", Box::new(|x: f64| x.powi(3) - 0.5 * x)),
    ];
    for &(w2, w4) in &[(2.0, 3.0), (1.0, 5.0), (1.5, 2.2)] {
        for &lam in &[0.2, 0.5, 0.8] {
            let best = 2.0 * (mean_shift(lam, w2, w4) / 2.0).sqrt();
            for (name, f) in &tests {
                let a = clt_mean_variance(f, lam, w2, w4, 1, None).unwrap();
                let b = clt_mean_variance(f, lam, w2, w4, 3, None).unwrap();
                let ratio = (b.mean - a.mean).abs() / a.variance.sqrt();
                assert!(ratio <= best + 1e-10, "{name}: {ratio} > {best}");
            }
        }
    }
}

#[test]
fn phi_and_affine_images_attain_the_bound() {
    let (lam, w2, w4) = (0.4, 2.0, 3.0);
    let phi = OptimalLss::plain(lam, w2, w4).unwrap();
    let g = |x: f64| 3.0 * phi.value(x).unwrap() - 7.0;
    let a = clt_mean_variance(g, lam, w2, w4, 0, None).unwrap();
    let b = clt_mean_variance(g, lam, w2, w4, 1, None).unwrap();
    let ratio = (b.mean - a.mean).abs() / a.variance.sqrt();
    assert!((ratio - (mean_shift(lam, w2, w4) / 2.0).sqrt()).abs() < 1e-9);
}

#[test]
fn variance_does_not_depend_on_rank() {
    let v: Vec<f64> = (0..=5).map(|k| lss_mean_variance(0.37, 1.2, 4.0, k).unwrap().v0).collect();
    assert!(v.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sech_transformed_statistic_coefficients() {
    let lam: f64 = 0.3;
    let phi = OptimalLss::transformed(lam, &SECH, 1.0).unwrap();
    assert!((phi.linear - PI * lam.sqrt() / (2.0 * 2f64.sqrt())).abs() < 1e-14);
    assert!((phi.quadratic - PI * PI * lam / 16.0).abs() < 1e-14);
}

#[test]
fn zero_spectrum_at_zero_snr() {
    let phi = OptimalLss::plain(0.0, 2.0, 3.0).unwrap();
    assert_eq!(phi.statistic(&Spectrum::new(vec![0.0; 5])).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn mean_is_linear_in_rank(lam in 0.01f64..0.99, w2 in 0.3f64..4.0, w4 in 1.1f64..10.0, k1 in 0usize..6, gap in 1usize..6) {
        let k2 = k1 + gap;
        let m = |k| lss_mean_variance(lam, w2, w4, k).unwrap().mk;
        let lhs = m(k2) - m(k1);
        let rhs = gap as f64 * (m(1) - m(0));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn threshold_lies_between_the_means(lam in 0.01f64..0.99, w2 in 0.3f64..4.0, w4 in 1.1f64..10.0, k1 in 0usize..6, gap in 1usize..6) {
        let t = critical_value(lam, w2, w4, k1, k1 + gap).unwrap();
        let m = lss_mean_variance(lam, w2, w4, 0).unwrap();
        prop_assert!(m.mean_for_rank(k1) < t && t < m.mean_for_rank(k1 + gap));
    }
}
