use std::f64::consts::PI;

use proptest::prelude::*;
use rand::Rng;

use wigner_detect::density::Density;
use wigner_detect::detect::{
    hypothesis_test, hypothesis_test_transformed, limiting_error, limiting_error_transformed, lr_limit_parameters,
    lr_limit_parameters_with_guard, Decision, HypothesisPair, RankEstimator,
};
use wigner_detect::model::{sample_spiked, trial_rng, NoiseSpec, SpikePrior};
use wigner_detect::transform::{DensityFunctionals, EntrywiseTransform};

const SECH: DensityFunctionals =
    DensityFunctionals { fh: PI * PI / 8.0, fhd: PI * PI / 8.0, gh: PI * PI / 16.0, w4t: 1.5 };

/// erfc by the Maclaurin series of erf below 2 and a continued fraction above.
fn erfc_reference(x: f64) -> f64 {
    if x < 2.0 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut tail = x;
        for k in (1..200).rev() {
            tail = x + (k as f64 / 2.0) / tail;
        }
        (-x * x).exp() / PI.sqrt() / tail
    }
}

#[test]
fn erfc_matches_reference_at_twenty_points() {
    for i in 0..20 {
        let x = 0.25 * i as f64 + 0.01;
        let got = libm::erfc(x);
        let want = erfc_reference(x);
        let tol = if x < 2.0 { 1e-13 } else { 1e-12 * want };
        assert!((got - want).abs() <= tol, "x={x}: {got} vs {want}");
    }
}

#[test]
fn limiting_error_matches_lr_optimum_for_gaussian_fourth_moment() {
    for (k1, k2) in [(0, 1), (1, 2), (0, 3), (2, 5)] {
        let hyp = HypothesisPair::new(k1, k2).unwrap();
        for &w2 in &[0.5, 1.0, 2.0, 3.5] {
            for i in 1..10 {
                let lam = 0.05 * i as f64;
                let lr = lr_limit_parameters(hyp, lam, w2).unwrap();
                assert!((limiting_error(hyp, lam, w2, 3.0) - lr.limit_error).abs() < 1e-12);
                assert!((libm::erfc(lr.mu.sqrt() / 2.0) - lr.limit_error).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn lr_mu_for_large_diagonal_variance() {
    let hyp = HypothesisPair::new(1, 4).unwrap();
    let lam: f64 = 0.3;
    let lr = lr_limit_parameters_with_guard(hyp, lam, 1e12, 0.9).unwrap();
    assert!((lr.mu - 9.0 / 4.0 * (-(1.0 - lam).ln() - lam)).abs() < 1e-10);
}

#[test]
fn doubling_the_gap_doubles_the_argument() {
    let lam: f64 = 0.35;
    let z = 0.25 * (-(1.0 - lam).ln()).sqrt();
    let one = limiting_error(HypothesisPair::new(1, 2).unwrap(), lam, 2.0, 3.0);
    let two = limiting_error(HypothesisPair::new(1, 3).unwrap(), lam, 2.0, 3.0);
    assert!((one - libm::erfc(z)).abs() < 1e-15);
    assert!((two - libm::erfc(2.0 * z)).abs() < 1e-15);
}

#[test]
fn sech_transformed_error_closed_form_and_dominance() {
    for k2 in 2..6 {
        let hyp = HypothesisPair::new(1, k2).unwrap();
        for i in 1..=60 {
            let lam = 0.01 * i as f64;
            let t = limiting_error_transformed(hyp, lam, &SECH, 1.0);
            let s = PI * PI * lam / 8.0;
            let want = libm::erfc((k2 as f64 - 1.0) / 4.0 * (-(1.0 - s).ln() + s).sqrt());
            assert!((t - want).abs() < 1e-12);
            assert!(t < limiting_error(hyp, lam, 1.0, 5.0), "lam={lam}");
        }
    }
}

#[test]
fn gaussian_functionals_reduce_to_the_plain_error() {
    let hyp = HypothesisPair::new(0, 2).unwrap();
    for &w2 in &[1.0, 2.0] {
        for i in 1..10 {
            let lam = 0.1 * i as f64;
            let a = limiting_error_transformed(hyp, lam, &DensityFunctionals::GAUSSIAN, w2);
            assert!((a - limiting_error(hyp, lam, w2, 3.0)).abs() < 1e-14);
        }
    }
}

#[test]
fn gaussian_transform_gives_the_same_outcome() {
    let t = EntrywiseTransform::new(Density::StandardGaussian, Density::StandardGaussian, 2.0).unwrap();
    let hyp = HypothesisPair::new(1, 3).unwrap();
    for s in 0..8 {
        let m = sample_spiked(
            &NoiseSpec::goe(),
            &SpikePrior::rademacher(),
            64,
            1 + s % 3,
            0.4,
            &mut trial_rng(3, s as u64),
        )
        .unwrap();
        let a = hypothesis_test(&m, 0.4, 2.0, 3.0, hyp).unwrap();
        let b = hypothesis_test_transformed(&m, 0.4, &t, hyp).unwrap();
        assert_eq!(a.decision, b.decision);
        assert!((a.statistic - b.statistic).abs() < 1e-9);
        assert!((a.threshold - b.threshold).abs() < 1e-12);
    }
}

#[test]
fn goe_threshold_example() {
    let m = sample_spiked(&NoiseSpec::goe(), &SpikePrior::rademacher(), 32, 0, 0.5, &mut trial_rng(1, 1)).unwrap();
    let o = hypothesis_test(&m, 0.5, 2.0, 3.0, HypothesisPair::new(0, 1).unwrap()).unwrap();
    assert!((o.threshold - 2f64.ln()).abs() < 1e-12);
    assert_eq!(o.decision == Decision::H1, o.statistic <= o.threshold);
}

/// `argmin_k |L - m_k|` with ties resolved toward the smaller rank.
fn argmin_rank(l: f64, m0: f64, delta: f64, k_cap: usize) -> usize {
    let mut best = 0;
    let mut best_d = (l - m0).abs();
    for k in 1..=k_cap {
        let d = (l - (m0 + k as f64 * delta)).abs();
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

#[test]
fn rounding_rule_equals_argmin_on_1e5_values() {
    let est = RankEstimator::new(0.45, 2.0, 3.0, None).unwrap();
    let mut rng = trial_rng(42, 0);
    for i in 0..100_000 {
        let l = if i % 10 == 0 {
            // exact half-way points between consecutive means
            est.m0 + (rng.random_range(0..12) as f64 + 0.5) * est.delta
        } else {
            est.m0 + rng.random_range(-3.0..14.0) * est.delta
        };
        let want = argmin_rank(l, est.m0, est.delta, 40);
        let got = est.from_statistic(l).kappa;
        // a half-way point computed in floating point may land a hair either side
        let half = ((l - est.m0) / est.delta).fract() == 0.5;
        assert!(got == want || (half && got + 1 == want), "L={l}: {got} vs {want}");
    }
}

proptest! {
    #[test]
    fn error_decreases_in_snr(lam in 0.01f64..0.97, step in 0.001f64..0.02, w2 in 0.5f64..3.0, w4 in 1.5f64..6.0) {
        let hyp = HypothesisPair::new(1, 3).unwrap();
        prop_assert!(limiting_error(hyp, lam + step, w2, w4) < limiting_error(hyp, lam, w2, w4));
    }

    #[test]
    fn error_decreases_in_gap(lam in 0.01f64..0.99, k1 in 0usize..4, gap in 1usize..5) {
        let a = limiting_error(HypothesisPair::new(k1, k1 + gap).unwrap(), lam, 2.0, 3.0);
        let b = limiting_error(HypothesisPair::new(k1, k1 + gap + 1).unwrap(), lam, 2.0, 3.0);
        prop_assert!(b < a);
    }

    #[test]
    fn decision_is_monotone_in_the_statistic(l in -5.0f64..20.0, bump in 0.0f64..5.0) {
        let est = RankEstimator::new(0.3, 1.0, 5.0, None).unwrap();
        prop_assert!(est.from_statistic(l + bump).kappa >= est.from_statistic(l).kappa);
    }
}
