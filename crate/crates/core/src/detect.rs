//! Decision rules built on the optimal linear spectral statistic, and the
//! closed-form limiting errors they attain.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::spectrum::{self, mean_shift, transformed_mean_shift, LssModel, OptimalLss, TransformedLssModel};
use crate::transform::{DensityFunctionals, EntrywiseTransform};

/// Default SNR guard below which the likelihood-ratio limit is trusted.
pub const DEFAULT_LR_GUARD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisPair {
    pub k1: usize,
    pub k2: usize,
}

impl HypothesisPair {
    pub fn new(k1: usize, k2: usize) -> Result<Self> {
        if k1 >= k2 {
            return Err(Error::domain(format!("hypotheses need k1 < k2, got k1={k1}, k2={k2}")));
        }
        Ok(HypothesisPair { k1, k2 })
    }

    pub fn gap(&self) -> f64 {
        (self.k2 - self.k1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    H1,
    H2,
}

impl Decision {
    pub fn label(self) -> &'static str {
        match self {
            Decision::H1 => "H1",
            Decision::H2 => "H2",
        }
    }
}

/// Result of one test. An aborted outcome carries a NaN statistic; its
/// decision is `H2`, the limit of the rule as an eigenvalue approaches the
/// pole of the log term, but aborted trials are excluded from error rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub aborted: bool,
}

impl TestOutcome {
    fn decide(statistic: Result<f64>, threshold: f64) -> Result<Self> {
        match statistic {
            Ok(statistic) => {
                let decision = if statistic <= threshold { Decision::H1 } else { Decision::H2 };
                Ok(TestOutcome { statistic, threshold, decision, aborted: false })
            }
            Err(Error::SpectralOverflow { .. }) => {
                Ok(TestOutcome { statistic: f64::NAN, threshold, decision: Decision::H2, aborted: true })
            }
            Err(e) => Err(e),
        }
    }
}

/// How the log-determinant inside the statistic is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticMethod {
    /// Full symmetric eigendecomposition, then a sum of logs.
    #[default]
    Eigen,
    /// Cholesky factor of `(1+s) I - sqrt(s) M`; same value, several times faster.
    Cholesky,
}

fn evaluate(phi: &OptimalLss, m: &DataMatrix, method: StatisticMethod) -> Result<f64> {
    match method {
        StatisticMethod::Eigen => phi.statistic(&spectrum::eigenvalues(m)?),
        StatisticMethod::Cholesky => phi.statistic_dense(m),
    }
}

/// Plain test with its threshold precomputed, for repeated use at one SNR.
#[derive(Debug, Clone, Copy)]
pub struct PlainTest {
    pub phi: OptimalLss,
    pub model: LssModel,
    pub hyp: HypothesisPair,
    pub threshold: f64,
}

impl PlainTest {
    pub fn new(lambda: f64, w2: f64, w4: f64, hyp: HypothesisPair) -> Result<Self> {
        let model = spectrum::lss_mean_variance(lambda, w2, w4, 0)?;
        let phi = spectrum::optimal_function_phi(lambda, w2, w4)?;
        let threshold = spectrum::critical_value(lambda, w2, w4, hyp.k1, hyp.k2)?;
        Ok(PlainTest { phi, model, hyp, threshold })
    }

    pub fn run(&self, m: &DataMatrix, method: StatisticMethod) -> Result<TestOutcome> {
        TestOutcome::decide(evaluate(&self.phi, m, method), self.threshold)
    }
}

pub fn hypothesis_test(m: &DataMatrix, lambda: f64, w2: f64, w4: f64, hyp: HypothesisPair) -> Result<TestOutcome> {
    PlainTest::new(lambda, w2, w4, hyp)?.run(m, StatisticMethod::Eigen)
}

/// Transformed test: the entrywise map followed by the plain rule with
/// effective SNR `lambda F^H`.
#[derive(Debug, Clone)]
pub struct TransformedTest {
    pub transform: EntrywiseTransform,
    pub phi: OptimalLss,
    pub model: TransformedLssModel,
    pub hyp: HypothesisPair,
    pub threshold: f64,
}

impl TransformedTest {
    pub fn new(lambda: f64, transform: EntrywiseTransform, hyp: HypothesisPair) -> Result<Self> {
        let funcs = transform.functionals;
        let w2 = transform.w2;
        let model = TransformedLssModel::new(lambda, &funcs, w2, 0)?;
        let phi = OptimalLss::transformed(lambda, &funcs, w2)?;
        let threshold = spectrum::transformed_critical_value(lambda, &funcs, w2, hyp.k1, hyp.k2)?;
        Ok(TransformedTest { transform, phi, model, hyp, threshold })
    }

    pub fn run(&self, m: &DataMatrix, method: StatisticMethod) -> Result<TestOutcome> {
        let t = self.transform.apply(m)?;
        TestOutcome::decide(evaluate(&self.phi, &t, method), self.threshold)
    }
}

pub fn hypothesis_test_transformed(
    m: &DataMatrix,
    lambda: f64,
    transform: &EntrywiseTransform,
    hyp: HypothesisPair,
) -> Result<TestOutcome> {
    TransformedTest::new(lambda, transform.clone(), hyp)?.run(m, StatisticMethod::Eigen)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEstimate {
    pub kappa_raw: f64,
    pub kappa: usize,
}

/// Rank estimator at one SNR: `kappa' = (L - m0) / Delta`, rounded half down.
#[derive(Debug, Clone, Copy)]
pub struct RankEstimator {
    pub phi: OptimalLss,
    pub m0: f64,
    pub delta: f64,
    pub k_max: Option<usize>,
}

impl RankEstimator {
    pub fn new(lambda: f64, w2: f64, w4: f64, k_max: Option<usize>) -> Result<Self> {
        let model = spectrum::lss_mean_variance(lambda, w2, w4, 0)?;
        let delta = mean_shift(lambda, w2, w4);
        if !(delta > 0.0) {
            return Err(Error::domain(format!("degenerate parameters: mean shift {delta} is not positive")));
        }
        Ok(RankEstimator { phi: spectrum::optimal_function_phi(lambda, w2, w4)?, m0: model.m0, delta, k_max })
    }

    pub fn from_statistic(&self, statistic: f64) -> RankEstimate {
        let kappa_raw = (statistic - self.m0) / self.delta;
        let mut kappa =
            if statistic <= self.m0 + 0.5 * self.delta { 0 } else { (kappa_raw - 0.5).ceil().max(0.0) as usize };
        if let Some(k_max) = self.k_max {
            kappa = kappa.min(k_max);
        }
        RankEstimate { kappa_raw, kappa }
    }

    /// Spectral overflow propagates as an error; callers decide whether to abort the trial.
    pub fn estimate(&self, m: &DataMatrix, method: StatisticMethod) -> Result<(f64, RankEstimate)> {
        let l = evaluate(&self.phi, m, method)?;
        Ok((l, self.from_statistic(l)))
    }
}

pub fn estimate_rank(m: &DataMatrix, lambda: f64, w2: f64, w4: f64) -> Result<RankEstimate> {
    Ok(RankEstimator::new(lambda, w2, w4, None)?.estimate(m, StatisticMethod::Eigen)?.1)
}

/// `erfc((k2-k1)/4 sqrt(Delta))` for the plain test. Defined for `0 <= lambda < 1`.
pub fn limiting_error(hyp: HypothesisPair, lambda: f64, w2: f64, w4: f64) -> f64 {
    erfc(hyp.gap() / 4.0 * mean_shift(lambda, w2, w4).sqrt())
}

/// Transformed counterpart, with `Delta~` from the density functionals.
pub fn limiting_error_transformed(hyp: HypothesisPair, lambda: f64, funcs: &DensityFunctionals, w2: f64) -> f64 {
    erfc(hyp.gap() / 4.0 * transformed_mean_shift(lambda, funcs, w2).sqrt())
}

/// `(1 - p0/2) erfc(sqrt(Delta)/4)`, or `(1 - (p0 + p_max)/2) erfc(sqrt(Delta)/4)`
/// when the largest rank is known.
pub fn limiting_error_rank(lambda: f64, w2: f64, w4: f64, p0: f64, p_max: Option<f64>) -> Result<f64> {
    let in_unit = |p: f64| (0.0..=1.0).contains(&p);
    if !in_unit(p0) || p_max.is_some_and(|p| !in_unit(p)) {
        return Err(Error::domain(format!("probabilities must lie in [0, 1], got p0={p0}, p_max={p_max:?}")));
    }
    let edge = p0 + p_max.unwrap_or(0.0);
    if edge > 1.0 + 1e-12 {
        return Err(Error::domain(format!("p0 + p_max = {edge} exceeds 1")));
    }
    Ok((1.0 - edge / 2.0) * erfc(mean_shift(lambda, w2, w4).sqrt() / 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrLimit {
    /// The log-LR is asymptotically `N(-mu, 2mu)` under H1 and `N(mu, 2mu)` under H2.
    pub mu: f64,
    pub limit_error: f64,
}

pub fn lr_limit_parameters(hyp: HypothesisPair, lambda: f64, w2: f64) -> Result<LrLimit> {
    lr_limit_parameters_with_guard(hyp, lambda, w2, DEFAULT_LR_GUARD)
}

/// `mu = (k2-k1)^2/4 (-log(1-lambda) + (2/w2 - 1) lambda)` and the optimal error
/// `erfc((k2-k1)/4 sqrt(...))`, which is `erfc(sqrt(mu)/2)`.
pub fn lr_limit_parameters_with_guard(hyp: HypothesisPair, lambda: f64, w2: f64, guard: f64) -> Result<LrLimit> {
    if !(lambda >= 0.0 && lambda < guard && guard <= 1.0) {
        return Err(Error::domain(format!("lambda={lambda} outside the guarded range [0, {guard})")));
    }
    if !(w2 > 0.0) {
        return Err(Error::domain(format!("w2 must be positive, got {w2}")));
    }
    let inner = -(-lambda).ln_1p() + (2.0 / w2 - 1.0) * lambda;
    let mu = hyp.gap().powi(2) / 4.0 * inner;
    let arg = hyp.gap() / 4.0 * inner.sqrt();
    debug_assert!((arg - mu.sqrt() / 2.0).abs() <= 1e-12 * arg.max(1.0));
    Ok(LrLimit { mu, limit_error: erfc(arg) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_spot_values() {
        assert_eq!(erfc(0.0), 1.0);
        assert!((erfc(1.0) - 0.157_299_207_050_285_1).abs() < 1e-15);
        assert!((erfc(-1.0) - 1.842_700_792_949_715).abs() < 1e-15);
    }

    #[test]
    fn goe_error_example() {
        let hyp = HypothesisPair::new(1, 2).unwrap();
        let e = limiting_error(hyp, 0.5, 2.0, 3.0);
        assert!((e - erfc(0.25 * 2f64.ln().sqrt())).abs() < 1e-15);
        assert!((e - 0.7684).abs() < 1e-4);
        assert_eq!(limiting_error(hyp, 0.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn rank_rule_examples() {
        let est = RankEstimator::new(0.5, 2.0, 3.0, None).unwrap();
        let m = |k: f64| est.m0 + k * est.delta;
        assert_eq!(est.from_statistic(m(3.0)).kappa, 3);
        assert_eq!(est.from_statistic(0.5 * (m(1.0) + m(2.0))).kappa, 1);
        assert_eq!(est.from_statistic(m(0.0) - 1.0).kappa, 0);
        assert_eq!(est.from_statistic(0.5 * (m(0.0) + m(1.0))).kappa, 0);
        let bounded = RankEstimator { k_max: Some(4), ..est };
        assert_eq!(bounded.from_statistic(m(9.0)).kappa, 4);
    }

    #[test]
    fn rank_error_examples() {
        let lam: f64 = 0.3;
        let base = erfc(0.25 * (-(1.0 - lam).ln()).sqrt());
        let bounded = limiting_error_rank(lam, 2.0, 3.0, 0.2, Some(0.2)).unwrap();
        assert!((bounded - 0.8 * base).abs() < 1e-15);
        let null = limiting_error_rank(lam, 2.0, 3.0, 1.0, None).unwrap();
        assert!((null - 0.5 * base).abs() < 1e-15);
        assert!(limiting_error_rank(lam, 2.0, 3.0, 1.2, None).is_err());
        assert!(limiting_error_rank(lam, 2.0, 3.0, 0.5, Some(-0.1)).is_err());
    }

    #[test]
    fn lr_limit_examples() {
        let hyp = HypothesisPair::new(0, 1).unwrap();
        let lim = lr_limit_parameters(hyp, 0.3, 2.0).unwrap();
        assert!((lim.mu - 0.25 * -(0.7f64).ln()).abs() < 1e-15);
        assert!(lr_limit_parameters(hyp, 0.5, 2.0).is_err());
        let wide = lr_limit_parameters_with_guard(hyp, 0.5, 2.0, 0.9).unwrap();
        assert!((wide.mu - 0.173_286_795_139_986_3).abs() < 1e-12);
        assert!((wide.limit_error - 0.7684).abs() < 1e-4);
        assert!(HypothesisPair::new(2, 2).is_err());
    }

    #[test]
    fn sech_transformed_threshold_and_domain() {
        use crate::density::Density;
        use std::f64::consts::PI;
        let funcs = DensityFunctionals { fh: PI * PI / 8.0, fhd: PI * PI / 8.0, gh: PI * PI / 16.0, w4t: 1.5 };
        let t = EntrywiseTransform::with_functionals(Density::Sech, Density::Sech, funcs, 1.0);
        let test = TransformedTest::new(0.4, t.clone(), HypothesisPair::new(1, 3).unwrap()).unwrap();
        let want =
            -2.5 * (1.0 - PI * PI * 0.4 / 8.0).ln() + 3.0 * PI * PI * 0.4 / 16.0 - 3.0 * PI.powi(4) * 0.16 / 512.0;
        assert!((test.threshold - want).abs() < 1e-12);
        let err = TransformedTest::new(0.9, t, HypothesisPair::new(1, 3).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Domain(msg) if msg.contains("PCA")));
    }

    #[test]
    fn ties_go_to_h1() {
        let o = TestOutcome::decide(Ok(2f64.ln()), 2f64.ln()).unwrap();
        assert_eq!(o.decision, Decision::H1);
        let o = TestOutcome::decide(Ok(0.6), 2f64.ln()).unwrap();
        assert_eq!(o.decision, Decision::H1);
        let o = TestOutcome::decide(Ok(0.8), 2f64.ln()).unwrap();
        assert_eq!(o.decision, Decision::H2);
        let o = TestOutcome::decide(Err(Error::SpectralOverflow { eigenvalue: None, bound: 2.1 }), 0.7).unwrap();
        assert!(o.aborted && o.statistic.is_nan());
    }
}
