//! Monte Carlo experiment drivers. Every trial owns the random stream keyed
//! by its `trial_id`, and results are gathered in `trial_id` order, so the
//! output does not depend on the number of workers.

use rand::Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::detect::{
    limiting_error, limiting_error_rank, limiting_error_transformed, lr_limit_parameters_with_guard, Decision,
    HypothesisPair, PlainTest, RankEstimator, TestOutcome, TransformedTest,
};
use crate::error::{Error, Result};
use crate::model::{sample_spike, sample_spiked, trial_rng, SpikePriorKind};
use crate::oracle;
use crate::par;
use crate::spectrum::lss_mean_variance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub lambda: f64,
    pub true_k: usize,
    pub statistic: f64,
    pub threshold: f64,
    /// `H1`/`H2`, the estimated rank, or `-` where no decision is made.
    pub decision: String,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub lambda: f64,
    pub k1: usize,
    /// `k2`, or `k_max` for rank experiments.
    pub k2: usize,
    /// Type-I plus Type-II error (hypothesis), or misclassification rate (rank).
    pub empirical_error: f64,
    pub theoretical_error: f64,
    pub trials: usize,
    pub aborted_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionRow {
    pub lambda: f64,
    pub true_k: usize,
    pub kappa: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRow {
    pub lambda: f64,
    pub k: usize,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub theory_mean: f64,
    pub theory_variance: f64,
    pub mean_tolerance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
    pub trials: usize,
    pub aborted_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrRow {
    pub lambda: f64,
    pub k1: usize,
    pub k2: usize,
    pub mu: f64,
    pub mean_h1: f64,
    pub var_h1: f64,
    pub mean_h2: f64,
    pub var_h2: f64,
    /// `E_H1[exp(log LR)]` and its standard error; should be 1 when `k1 = 0`.
    pub null_lr_mean: f64,
    pub null_lr_se: f64,
    pub empirical_error: f64,
    pub theoretical_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub tolerance: f64,
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    /// The plain test evaluated on the same matrices as the transformed one.
    pub baseline_trials: Option<Vec<TrialRecord>>,
    pub baseline_summary: Option<Vec<SummaryRow>>,
    pub confusion: Option<Vec<ConfusionRow>>,
    pub clt: Option<Vec<CltRow>>,
    pub lr: Option<Vec<LrRow>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl ExperimentReport {
    fn new(experiment: ExperimentKind, tolerance: f64) -> Self {
        ExperimentReport {
            experiment,
            tolerance,
            trials: Vec::new(),
            summary: Vec::new(),
            baseline_trials: None,
            baseline_summary: None,
            confusion: None,
            clt: None,
            lr: None,
            warnings: Vec::new(),
        }
    }

    /// Pass/fail of each summary row against the report tolerance.
    pub fn checks(&self) -> Vec<Check> {
        let band = |label: &str, rows: &[SummaryRow]| -> Vec<Check> {
            rows.iter()
                .map(|r| {
                    let gap = (r.empirical_error - r.theoretical_error).abs();
                    Check {
                        name: format!("{label} lambda={} k1={} k2={}", r.lambda, r.k1, r.k2),
                        passed: gap <= self.tolerance,
                        detail: format!(
                            "empirical {:.4} theory {:.4} gap {:.4} (tol {})",
                            r.empirical_error, r.theoretical_error, gap, self.tolerance
                        ),
                    }
                })
                .collect()
        };
        let mut out = match self.experiment {
            ExperimentKind::CltCheck => Vec::new(),
            ExperimentKind::HypothesisTransformed => band("transformed", &self.summary),
            _ => band(self.experiment.name(), &self.summary),
        };
        if let Some(rows) = &self.baseline_summary {
            out.extend(band("baseline", rows));
        }
        if let Some(rows) = &self.clt {
            for r in rows {
                out.push(Check {
                    name: format!("clt lambda={} k={}", r.lambda, r.k),
                    passed: r.mean_ok && r.variance_ok,
                    detail: format!(
                        "mean {:.4} vs {:.4} (tol {:.4}), variance {:.4} vs {:.4}",
                        r.sample_mean, r.theory_mean, r.mean_tolerance, r.sample_variance, r.theory_variance
                    ),
                });
            }
        }
        out
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        ExperimentKind::Hypothesis => run_hypothesis(cfg),
        ExperimentKind::HypothesisTransformed => run_transformed(cfg),
        ExperimentKind::Rank => run_rank(cfg),
        ExperimentKind::CltCheck => run_clt(cfg),
        ExperimentKind::LrOracle => run_lr(cfg),
    }
}

/// Trial layout for hypothesis experiments: for each `(lambda, k2)` group,
/// `trials` draws under H1 then `trials` under H2.
struct Layout {
    lambdas: usize,
    hyps: usize,
    trials: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.lambdas * self.hyps * 2 * self.trials
    }

    /// `(lambda index, hypothesis index, under H2, trial)`.
    fn decode(&self, id: usize) -> (usize, usize, bool, usize) {
        let t = id % self.trials;
        let rest = id / self.trials;
        let h2 = rest % 2 == 1;
        let rest = rest / 2;
        (rest / self.hyps, rest % self.hyps, h2, t)
    }
}

fn record(id: usize, lambda: f64, true_k: usize, o: &TestOutcome) -> TrialRecord {
    TrialRecord {
        trial_id: id as u64,
        lambda,
        true_k,
        statistic: o.statistic,
        threshold: o.threshold,
        decision: o.decision.label().to_string(),
        aborted: o.aborted,
    }
}

/// Raw Type-I + Type-II error over non-aborted trials of one group.
pub fn error_sum(records: &[TrialRecord], k1: usize) -> (f64, usize) {
    let (mut n1, mut e1, mut n2, mut e2, mut aborted) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for r in records {
        if r.aborted {
            aborted += 1;
            continue;
        }
        if r.true_k == k1 {
            n1 += 1;
            e1 += (r.decision == Decision::H2.label()) as usize;
        } else {
            n2 += 1;
            e2 += (r.decision == Decision::H1.label()) as usize;
        }
    }
    let rate = |e: usize, n: usize| if n == 0 { f64::NAN } else { e as f64 / n as f64 };
    (rate(e1, n1) + rate(e2, n2), aborted)
}

fn summarize_groups(
    cfg: &ExperimentConfig,
    layout: &Layout,
    records: &[TrialRecord],
    theory: impl Fn(f64, HypothesisPair) -> f64,
) -> Vec<SummaryRow> {
    let group = 2 * layout.trials;
    let mut rows = Vec::new();
    for (li, &lambda) in cfg.lambda_grid.iter().enumerate() {
        for (hi, hyp) in cfg.hyps.iter().enumerate() {
            let start = (li * layout.hyps + hi) * group;
            let slice = &records[start..start + group];
            let (err, aborted) = error_sum(slice, hyp.k1);
            rows.push(SummaryRow {
                lambda,
                k1: hyp.k1,
                k2: hyp.k2,
                empirical_error: err,
                theoretical_error: theory(lambda, *hyp),
                trials: group,
                aborted_count: aborted,
            });
        }
    }
    rows
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn run_hypothesis(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (w2, w4) = (cfg.noise.w2, cfg.noise.w4);
    let tests = cfg
        .lambda_grid
        .iter()
        .map(|&lam| cfg.hyps.iter().map(|&h| PlainTest::new(lam, w2, w4, h)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let layout = Layout { lambdas: cfg.lambda_grid.len(), hyps: cfg.hyps.len(), trials: cfg.trials };

    let records = collect(par::map_indexed(layout.len(), |id| {
        let (li, hi, h2, _) = layout.decode(id);
        let test = &tests[li][hi];
        let k = if h2 { test.hyp.k2 } else { test.hyp.k1 };
        let lambda = cfg.lambda_grid[li];
        let mut rng = trial_rng(cfg.seed, id as u64);
        let m = sample_spiked(&cfg.noise, &cfg.prior, cfg.n, k, lambda, &mut rng)?;
        Ok(record(id, lambda, k, &test.run(&m, cfg.method)?))
    }))?;

    let mut report = ExperimentReport::new(cfg.experiment, cfg.tolerance);
    report.summary = summarize_groups(cfg, &layout, &records, |lam, h| limiting_error(h, lam, w2, w4));
    report.trials = records;
    Ok(report)
}

/// Warn when a custom spike prior is not delocalized enough for the
/// transformed test (`||x||_inf <= n^(-3/8)` should hold comfortably).
fn delocalization_warning(cfg: &ExperimentConfig) -> Option<String> {
    if !matches!(cfg.prior.kind, SpikePriorKind::Custom(_)) {
        return None;
    }
    let mut rng = trial_rng(cfg.seed, u64::MAX);
    let spike = sample_spike(&cfg.prior, cfg.n, 1, &mut rng).ok()?;
    let sup = spike.columns[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let bound = (cfg.n as f64).powf(-0.375);
    (sup > bound).then(|| {
        format!(
            "custom spike prior has max entry {sup:.4} > n^(-3/8) = {bound:.4}; the transformed limit may not apply"
        )
    })
}

fn run_transformed(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let transform = cfg.transform.clone().ok_or_else(|| Error::config("transformed experiment without densities"))?;
    let (w2, w4) = (cfg.noise.w2, cfg.noise.w4);
    let funcs = transform.functionals;
    let mut plain = Vec::new();
    let mut trans = Vec::new();
    for &lam in &cfg.lambda_grid {
        let mut p = Vec::new();
        let mut t = Vec::new();
        for &h in &cfg.hyps {
            p.push(PlainTest::new(lam, w2, w4, h)?);
            t.push(TransformedTest::new(lam, transform.clone(), h)?);
        }
        plain.push(p);
        trans.push(t);
    }
    let layout = Layout { lambdas: cfg.lambda_grid.len(), hyps: cfg.hyps.len(), trials: cfg.trials };

    let pairs = collect(par::map_indexed(layout.len(), |id| {
        let (li, hi, h2, _) = layout.decode(id);
        let hyp = cfg.hyps[hi];
        let k = if h2 { hyp.k2 } else { hyp.k1 };
        let lambda = cfg.lambda_grid[li];
        let mut rng = trial_rng(cfg.seed, id as u64);
        let m = sample_spiked(&cfg.noise, &cfg.prior, cfg.n, k, lambda, &mut rng)?;
        let t = trans[li][hi].run(&m, cfg.method)?;
        let b = plain[li][hi].run(&m, cfg.method)?;
        Ok((record(id, lambda, k, &t), record(id, lambda, k, &b)))
    }))?;
    let (records, baseline): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();

    let mut report = ExperimentReport::new(cfg.experiment, cfg.tolerance);
    report.summary = summarize_groups(cfg, &layout, &records, |lam, h| limiting_error_transformed(h, lam, &funcs, w2));
    report.baseline_summary = Some(summarize_groups(cfg, &layout, &baseline, |lam, h| limiting_error(h, lam, w2, w4)));
    report.trials = records;
    report.baseline_trials = Some(baseline);
    report.warnings.extend(delocalization_warning(cfg));
    Ok(report)
}

fn run_rank(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (w2, w4) = (cfg.noise.w2, cfg.noise.w4);
    let k_max = cfg.k_max;
    let bound = cfg.rank_bounded.then_some(k_max);
    let estimators =
        cfg.lambda_grid.iter().map(|&lam| RankEstimator::new(lam, w2, w4, bound)).collect::<Result<Vec<_>>>()?;
    let total = cfg.lambda_grid.len() * cfg.trials;

    let records = collect(par::map_indexed(total, |id| {
        let li = id / cfg.trials;
        let lambda = cfg.lambda_grid[li];
        let mut rng = trial_rng(cfg.seed, id as u64);
        let k = rng.random_range(0..=k_max);
        let m = sample_spiked(&cfg.noise, &cfg.prior, cfg.n, k, lambda, &mut rng)?;
        let est = &estimators[li];
        let threshold = est.m0 + 0.5 * est.delta;
        let rec = match est.estimate(&m, cfg.method) {
            Ok((l, r)) => TrialRecord {
                trial_id: id as u64,
                lambda,
                true_k: k,
                statistic: l,
                threshold,
                decision: r.kappa.to_string(),
                aborted: false,
            },
            Err(Error::SpectralOverflow { .. }) => TrialRecord {
                trial_id: id as u64,
                lambda,
                true_k: k,
                statistic: f64::NAN,
                threshold,
                decision: "-".into(),
                aborted: true,
            },
            Err(e) => return Err(e),
        };
        Ok(rec)
    }))?;

    let p0 = 1.0 / (k_max as f64 + 1.0);
    let p_max = (cfg.rank_bounded && k_max > 0).then_some(p0);
    let mut summary = Vec::new();
    let mut confusion = Vec::new();
    for (li, &lambda) in cfg.lambda_grid.iter().enumerate() {
        let slice = &records[li * cfg.trials..(li + 1) * cfg.trials];
        let (err, aborted) = misclassification(slice);
        summary.push(SummaryRow {
            lambda,
            k1: 0,
            k2: k_max,
            empirical_error: err,
            theoretical_error: limiting_error_rank(lambda, w2, w4, p0, p_max)?,
            trials: slice.len(),
            aborted_count: aborted,
        });
        let width = slice.iter().filter_map(|r| r.decision.parse::<usize>().ok()).max().unwrap_or(0).max(k_max) + 1;
        let mut counts = vec![0usize; (k_max + 1) * width];
        for r in slice.iter().filter(|r| !r.aborted) {
            let kappa: usize = r.decision.parse().unwrap_or(0);
            counts[r.true_k * width + kappa] += 1;
        }
        for true_k in 0..=k_max {
            for kappa in 0..width {
                confusion.push(ConfusionRow { lambda, true_k, kappa, count: counts[true_k * width + kappa] });
            }
        }
    }
    let mut report = ExperimentReport::new(cfg.experiment, cfg.tolerance);
    report.trials = records;
    report.summary = summary;
    report.confusion = Some(confusion);
    Ok(report)
}

/// Fraction of non-aborted trials whose estimate differs from the truth.
pub fn misclassification(records: &[TrialRecord]) -> (f64, usize) {
    let valid: Vec<_> = records.iter().filter(|r| !r.aborted).collect();
    let wrong = valid.iter().filter(|r| r.decision.parse::<usize>().ok() != Some(r.true_k)).count();
    let err = if valid.is_empty() { f64::NAN } else { wrong as f64 / valid.len() as f64 };
    (err, records.len() - valid.len())
}

/// Mean, unbiased variance, skewness and excess kurtosis.
pub fn sample_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let central = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    (mean, m2 * n / (n - 1.0), m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn run_clt(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (w2, w4) = (cfg.noise.w2, cfg.noise.w4);
    let ks = &cfg.true_ks;
    let models = cfg
        .lambda_grid
        .iter()
        .map(|&lam| Ok((lss_mean_variance(lam, w2, w4, 0)?, crate::spectrum::optimal_function_phi(lam, w2, w4)?)))
        .collect::<Result<Vec<_>>>()?;
    let per_lambda = ks.len() * cfg.trials;
    let total = cfg.lambda_grid.len() * per_lambda;

    let records = collect(par::map_indexed(total, |id| {
        let li = id / per_lambda;
        let k = ks[(id % per_lambda) / cfg.trials];
        let lambda = cfg.lambda_grid[li];
        let (model, phi) = &models[li];
        let mut rng = trial_rng(cfg.seed, id as u64);
        let m = sample_spiked(&cfg.noise, &cfg.prior, cfg.n, k, lambda, &mut rng)?;
        let stat = match cfg.method {
            crate::detect::StatisticMethod::Cholesky => phi.statistic_dense(&m),
            crate::detect::StatisticMethod::Eigen => phi.statistic(&crate::spectrum::eigenvalues(&m)?),
        };
        let (statistic, aborted) = match stat {
            Ok(v) => (v, false),
            Err(Error::SpectralOverflow { .. }) => (f64::NAN, true),
            Err(e) => return Err(e),
        };
        Ok(TrialRecord {
            trial_id: id as u64,
            lambda,
            true_k: k,
            statistic,
            threshold: model.mean_for_rank(k),
            decision: "-".into(),
            aborted,
        })
    }))?;

    let mut rows = Vec::new();
    for (li, &lambda) in cfg.lambda_grid.iter().enumerate() {
        let model = &models[li].0;
        for (ki, &k) in ks.iter().enumerate() {
            let start = li * per_lambda + ki * cfg.trials;
            let slice = &records[start..start + cfg.trials];
            let values: Vec<f64> = slice.iter().filter(|r| !r.aborted).map(|r| r.statistic).collect();
            let (mean, var, skew, kurt) = sample_moments(&values);
            let theory_mean = model.mean_for_rank(k);
            let mean_tolerance = 0.05 + 3.0 * (model.v0 / values.len() as f64).sqrt();
            rows.push(CltRow {
                lambda,
                k,
                sample_mean: mean,
                sample_variance: var,
                theory_mean,
                theory_variance: model.v0,
                mean_tolerance,
                skewness: skew,
                excess_kurtosis: kurt,
                mean_ok: (mean - theory_mean).abs() <= mean_tolerance,
                variance_ok: (var - model.v0).abs() <= 0.15 * model.v0,
                trials: slice.len(),
                aborted_count: slice.len() - values.len(),
            });
        }
    }
    let mut report = ExperimentReport::new(cfg.experiment, cfg.tolerance);
    report.trials = records;
    report.clt = Some(rows);
    Ok(report)
}

fn run_lr(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let w2 = cfg.noise.w2;
    let mut report = ExperimentReport::new(cfg.experiment, cfg.tolerance);
    let mut next_id = 0u64;
    let mut lr_rows = Vec::new();
    for (li, &lambda) in cfg.lambda_grid.iter().enumerate() {
        for (hi, hyp) in cfg.hyps.iter().enumerate() {
            // each group gets its own key so groups never share streams
            let group_seed = cfg.seed ^ (((li * cfg.hyps.len() + hi) as u64 + 1) << 40);
            let samples = oracle::lr_monte_carlo(cfg.n, hyp.k1, hyp.k2, lambda, w2, cfg.trials, group_seed)?;
            let limit = lr_limit_parameters_with_guard(*hyp, lambda, w2, cfg.lr_guard)?;
            for (h2, values) in [(false, &samples.under_h1), (true, &samples.under_h2)] {
                for &v in values.iter() {
                    report.trials.push(TrialRecord {
                        trial_id: next_id,
                        lambda,
                        true_k: if h2 { hyp.k2 } else { hyp.k1 },
                        statistic: v,
                        threshold: 0.0,
                        decision: if v <= 0.0 { "H1" } else { "H2" }.into(),
                        aborted: false,
                    });
                    next_id += 1;
                }
            }
            let (mean_h1, var_h1, _, _) = sample_moments(&samples.under_h1);
            let (mean_h2, var_h2, _, _) = sample_moments(&samples.under_h2);
            let lr: Vec<f64> = samples.under_h1.iter().map(|v| v.exp()).collect();
            let (lr_mean, lr_var, _, _) = sample_moments(&lr);
            let error = samples.test_error();
            report.summary.push(SummaryRow {
                lambda,
                k1: hyp.k1,
                k2: hyp.k2,
                empirical_error: error,
                theoretical_error: limit.limit_error,
                trials: 2 * cfg.trials,
                aborted_count: 0,
            });
            lr_rows.push(LrRow {
                lambda,
                k1: hyp.k1,
                k2: hyp.k2,
                mu: limit.mu,
                mean_h1,
                var_h1,
                mean_h2,
                var_h2,
                null_lr_mean: lr_mean,
                null_lr_se: (lr_var / cfg.trials as f64).sqrt(),
                empirical_error: error,
                theoretical_error: limit.limit_error,
                trials: cfg.trials,
            });
        }
    }
    report.lr = Some(lr_rows);
    Ok(report)
}
