//! Experiment configuration (TOML). Unknown keys are rejected; values a
//! config leaves out are filled from the selected profile.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{Density, TabulatedDensity};
use crate::detect::{HypothesisPair, StatisticMethod, DEFAULT_LR_GUARD};
use crate::error::{Error, Result};
use crate::model::{NoiseSpec, SpikePrior};
use crate::transform::EntrywiseTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Hypothesis,
    HypothesisTransformed,
    Rank,
    CltCheck,
    LrOracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Hypothesis => "hypothesis",
            ExperimentKind::HypothesisTransformed => "hypothesis_transformed",
            ExperimentKind::Rank => "rank",
            ExperimentKind::CltCheck => "clt_check",
            ExperimentKind::LrOracle => "lr_oracle",
        }
    }
}

/// Scale presets. `paper` is the full experiment scale; `ci` is a
/// smaller run with a wider tolerance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Paper,
    Ci,
}

impl Profile {
    pub fn n(self) -> usize {
        match self {
            Profile::Paper => 256,
            Profile::Ci => 64,
        }
    }

    pub fn trials(self) -> usize {
        match self {
            Profile::Paper => 10_000,
            Profile::Ci => 2_000,
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Profile::Paper => 0.03,
            Profile::Ci => 0.06,
        }
    }

    /// Enumeration is exponential in `n`, so the oracle runs at desk scale.
    pub fn lr_n(self) -> usize {
        match self {
            Profile::Paper => 12,
            Profile::Ci => 8,
        }
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "ci" => Ok(Profile::Ci),
            other => Err(Error::config(format!("unknown profile `{other}` (expected paper or ci)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Ci => "ci",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChoice {
    #[default]
    Goe,
    /// Gaussian with unit diagonal variance.
    Gaussian,
    Sech,
    Tabulated,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kind: NoiseChoice,
    /// Two-column CSV (x, density) for the off-diagonal law.
    pub density: Option<PathBuf>,
    /// Unit-variance law of the diagonal; defaults to the off-diagonal one.
    pub diag_density: Option<PathBuf>,
    /// Diagonal variance factor for tabulated noise.
    pub w2: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorChoice {
    #[default]
    Rademacher,
    Gaussian,
    Tabulated,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub kind: PriorChoice,
    pub density: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypConfig {
    pub k1: usize,
    pub k2: OneOrMany,
}

/// The document as written.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: ExperimentKind,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    pub hyp: Option<HypConfig>,
    pub rank_range: Option<[usize; 2]>,
    /// Clamp estimates to the range (default true when a range is given).
    pub rank_bounded: Option<bool>,
    pub true_ks: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<StatisticMethod>,
    /// Absolute tolerance of the self-test; profile default otherwise.
    pub tolerance: Option<f64>,
    pub lr_guard: Option<f64>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub profile: Profile,
    pub n: usize,
    pub trials: usize,
    pub lambda_grid: Vec<f64>,
    pub noise: NoiseSpec,
    pub prior: SpikePrior,
    pub hyps: Vec<HypothesisPair>,
    pub k_max: usize,
    pub rank_bounded: bool,
    pub true_ks: Vec<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub method: StatisticMethod,
    pub tolerance: f64,
    pub lr_guard: f64,
    /// Present for the transformed experiment.
    pub transform: Option<EntrywiseTransform>,
}

pub const DEFAULT_SEED: u64 = 20_200_601;

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Validate and fill in defaults. Relative density paths are taken from `base_dir`.
    ///
    /// The `paper` profile only fills what the file leaves out; `ci` replaces
    /// the file's `n`, `trials` and `tolerance` with its own smaller settings.
    pub fn resolve(&self, profile: Profile, overrides: &Overrides, base_dir: &Path) -> Result<ExperimentConfig> {
        let kind = self.experiment;
        let from_file = |v: Option<usize>| if profile == Profile::Ci { None } else { v };
        let n = overrides.n.or(from_file(self.n)).unwrap_or(if kind == ExperimentKind::LrOracle {
            profile.lr_n()
        } else {
            profile.n()
        });
        let trials = overrides.trials.or(from_file(self.trials)).unwrap_or(profile.trials());
        if n < 2 {
            return Err(Error::config(format!("n: must be at least 2, got {n}")));
        }
        if trials < 1 {
            return Err(Error::config("trials: must be at least 1"));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::config("lambda_grid: must not be empty"));
        }

        let noise = self.noise.build(base_dir)?;
        let prior = self.prior.build(base_dir)?;

        let transform = if kind == ExperimentKind::HypothesisTransformed {
            let (off, diag) = self.noise.densities(base_dir)?;
            Some(EntrywiseTransform::new(off, diag, noise.w2)?)
        } else {
            None
        };
        let upper = match &transform {
            Some(t) => 1.0 / t.functionals.fh,
            None if kind == ExperimentKind::LrOracle => self.lr_guard.unwrap_or(DEFAULT_LR_GUARD),
            None => 1.0,
        };
        for (i, &lam) in self.lambda_grid.iter().enumerate() {
            if !(lam > 0.0 && lam < upper) {
                return Err(Error::config(format!("lambda_grid[{i}]: {lam} is outside (0, {upper})")));
            }
        }

        let needs_hyp = matches!(
            kind,
            ExperimentKind::Hypothesis | ExperimentKind::HypothesisTransformed | ExperimentKind::LrOracle
        );
        let hyps = match (&self.hyp, needs_hyp) {
            (Some(h), true) => {
                let k2s = h.k2.values();
                if k2s.is_empty() {
                    return Err(Error::config("hyp.k2: must list at least one rank"));
                }
                k2s.into_iter()
                    .map(|k2| HypothesisPair::new(h.k1, k2).map_err(|e| Error::config(format!("hyp: {e}"))))
                    .collect::<Result<Vec<_>>>()?
            }
            (None, true) => return Err(Error::config(format!("hyp: required for experiment {}", kind.name()))),
            (_, false) => Vec::new(),
        };

        let (k_max, rank_bounded) = match (kind, self.rank_range) {
            (ExperimentKind::Rank, Some([lo, hi])) => {
                if lo != 0 {
                    return Err(Error::config(format!("rank_range: lower end must be 0, got {lo}")));
                }
                (hi, self.rank_bounded.unwrap_or(true))
            }
            (ExperimentKind::Rank, None) => return Err(Error::config("rank_range: required for experiment rank")),
            _ => (0, false),
        };

        let true_ks = match (kind, &self.true_ks) {
            (ExperimentKind::CltCheck, Some(ks)) if !ks.is_empty() => ks.clone(),
            (ExperimentKind::CltCheck, _) => return Err(Error::config("true_ks: required for experiment clt_check")),
            _ => Vec::new(),
        };

        if kind == ExperimentKind::LrOracle {
            if !matches!(self.noise.kind, NoiseChoice::Goe | NoiseChoice::Gaussian) {
                return Err(Error::config("noise.kind: the likelihood-ratio oracle needs Gaussian noise"));
            }
            if !matches!(self.prior.kind, PriorChoice::Rademacher) {
                return Err(Error::config("prior.kind: the likelihood-ratio oracle enumerates Rademacher spikes"));
            }
            let widest = hyps.iter().map(|h| h.k2).max().unwrap_or(0);
            if n * widest > crate::oracle::MAX_SIGN_BITS {
                return Err(Error::Capacity { n, k: widest });
            }
        }

        let tolerance = match profile {
            Profile::Paper => self.tolerance.unwrap_or(profile.tolerance()),
            Profile::Ci => profile.tolerance(),
        };
        if !(tolerance > 0.0) {
            return Err(Error::config(format!("tolerance: must be positive, got {tolerance}")));
        }
        let lr_guard = self.lr_guard.unwrap_or(DEFAULT_LR_GUARD);
        if !(lr_guard > 0.0 && lr_guard <= 1.0) {
            return Err(Error::config(format!("lr_guard: must lie in (0, 1], got {lr_guard}")));
        }

        Ok(ExperimentConfig {
            experiment: kind,
            profile,
            n,
            trials,
            lambda_grid: self.lambda_grid.clone(),
            noise,
            prior,
            hyps,
            k_max,
            rank_bounded,
            true_ks,
            seed: overrides.seed.or(self.seed).unwrap_or(DEFAULT_SEED),
            out_dir: overrides
                .out_dir
                .clone()
                .or_else(|| self.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(kind.name())),
            method: self.method.unwrap_or(StatisticMethod::Cholesky),
            tolerance,
            lr_guard,
            transform,
        })
    }
}

fn load_tabulated(path: &Path, base_dir: &Path, field: &str) -> Result<Density> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base_dir.join(path) };
    let table = TabulatedDensity::from_csv(&full).map_err(|e| Error::config(format!("{field}: {e}")))?;
    Ok(Density::Tabulated(std::sync::Arc::new(table)))
}

impl NoiseConfig {
    /// Off-diagonal and unit-normalized diagonal densities.
    pub fn densities(&self, base_dir: &Path) -> Result<(Density, Density)> {
        match self.kind {
            NoiseChoice::Goe | NoiseChoice::Gaussian => Ok((Density::StandardGaussian, Density::StandardGaussian)),
            NoiseChoice::Sech => Ok((Density::Sech, Density::Sech)),
            NoiseChoice::Tabulated => {
                let path = self
                    .density
                    .as_ref()
                    .ok_or_else(|| Error::config("noise.density: required for tabulated noise"))?;
                let off = load_tabulated(path, base_dir, "noise.density")?;
                let diag = match &self.diag_density {
                    Some(p) => load_tabulated(p, base_dir, "noise.diag_density")?,
                    None => off.clone(),
                };
                Ok((off, diag))
            }
        }
    }

    pub fn build(&self, base_dir: &Path) -> Result<NoiseSpec> {
        let fixed = |name: &str| -> Result<()> {
            if self.density.is_some() || self.diag_density.is_some() || self.w2.is_some() {
                return Err(Error::config(format!("noise: `{name}` takes no density or w2 settings")));
            }
            Ok(())
        };
        match self.kind {
            NoiseChoice::Goe => fixed("goe").map(|_| NoiseSpec::goe()),
            NoiseChoice::Gaussian => fixed("gaussian").map(|_| NoiseSpec::gaussian_unit_diag()),
            NoiseChoice::Sech => fixed("sech").map(|_| NoiseSpec::sech()),
            NoiseChoice::Tabulated => {
                let (off, diag) = self.densities(base_dir)?;
                let w2 = self.w2.ok_or_else(|| Error::config("noise.w2: required for tabulated noise"))?;
                NoiseSpec::custom(off, Some(diag), w2).map_err(|e| Error::config(format!("noise: {e}")))
            }
        }
    }
}

impl PriorConfig {
    pub fn build(&self, base_dir: &Path) -> Result<SpikePrior> {
        match (self.kind, &self.density) {
            (PriorChoice::Rademacher, None) => Ok(SpikePrior::rademacher()),
            (PriorChoice::Gaussian, None) => Ok(SpikePrior::gaussian()),
            (PriorChoice::Tabulated, Some(p)) => SpikePrior::custom(load_tabulated(p, base_dir, "prior.density")?)
                .map_err(|e| Error::config(format!("prior: {e}"))),
            (PriorChoice::Tabulated, None) => Err(Error::config("prior.density: required for a tabulated prior")),
            (_, Some(_)) => Err(Error::config("prior.density: only valid with kind = \"tabulated\"")),
        }
    }
}
