//! Noise densities and their score functions.
//!
//! A density here is the law of a normalized noise entry `sqrt(N) H_ij` (or of
//! the normalized diagonal entry). The transform works with the score
//! `h = -g'/g` and its derivative; built-in laws have closed forms, everything
//! else falls back to central differences of `log g`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};

/// Step for the first central difference of `log g`.
pub const SCORE_STEP: f64 = 1e-5;
/// The second difference needs a wider step to stay above rounding noise.
const SCORE_DERIVATIVE_STEP: f64 = 1e-4;

type DensityFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Density {
    StandardGaussian,
    /// Centered Gaussian with the given standard deviation.
    Gaussian {
        std_dev: f64,
    },
    /// `g(x) = 1 / (2 cosh(pi x / 2))`, unit variance and fourth moment 5.
    Sech,
    Tabulated(Arc<TabulatedDensity>),
    /// User-supplied pdf; has no sampler.
    Custom {
        name: String,
        pdf: Arc<DensityFn>,
    },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::StandardGaussian => write!(f, "StandardGaussian"),
            Density::Gaussian { std_dev } => write!(f, "Gaussian {{ std_dev: {std_dev} }}"),
            Density::Sech => write!(f, "Sech"),
            Density::Tabulated(t) => write!(f, "Tabulated({} knots)", t.xs.len()),
            Density::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Density {
    pub fn custom(name: impl Into<String>, pdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Density::Custom { name: name.into(), pdf: Arc::new(pdf) }
    }

    pub fn name(&self) -> String {
        match self {
            Density::StandardGaussian => "gaussian".into(),
            Density::Gaussian { std_dev } => format!("gaussian(sd={std_dev})"),
            Density::Sech => "sech".into(),
            Density::Tabulated(_) => "tabulated".into(),
            Density::Custom { name, .. } => name.clone(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Density::StandardGaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            Density::Gaussian { std_dev } => {
                let z = x / std_dev;
                (-0.5 * z * z).exp() / (std_dev * (2.0 * PI).sqrt())
            }
            Density::Sech => 0.5 / (FRAC_PI_2 * x).cosh(),
            Density::Tabulated(t) => t.pdf(x),
            Density::Custom { pdf, .. } => pdf(x),
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Density::Sech => {
                // log(1/(2 cosh a)) without overflow for large |a|
                let a = (FRAC_PI_2 * x).abs();
                -a - (1.0 + (-2.0 * a).exp()).ln()
            }
            _ => self.pdf(x).ln(),
        }
    }

    /// Score `h(x) = -g'(x)/g(x)`.
    pub fn score(&self, x: f64) -> f64 {
        match self {
            Density::StandardGaussian => x,
            Density::Gaussian { std_dev } => x / (std_dev * std_dev),
            Density::Sech => FRAC_PI_2 * (FRAC_PI_2 * x).tanh(),
            Density::Tabulated(t) => {
                let (lo, hi) = t.support();
                let x = x.clamp(lo + SCORE_STEP, hi - SCORE_STEP);
                self.score_fd(x)
            }
            Density::Custom { .. } => self.score_fd(x),
        }
    }

    fn score_fd(&self, x: f64) -> f64 {
        let d = SCORE_STEP;
        -(self.log_pdf(x + d) - self.log_pdf(x - d)) / (2.0 * d)
    }

    /// `h'(x)`.
    pub fn score_derivative(&self, x: f64) -> f64 {
        match self {
            Density::StandardGaussian => 1.0,
            Density::Gaussian { std_dev } => 1.0 / (std_dev * std_dev),
            Density::Sech => {
                let s = 1.0 / (FRAC_PI_2 * x).cosh();
                FRAC_PI_2 * FRAC_PI_2 * s * s
            }
            Density::Tabulated(_) | Density::Custom { .. } => {
                let d = SCORE_DERIVATIVE_STEP;
                -(self.log_pdf(x + d) - 2.0 * self.log_pdf(x) + self.log_pdf(x - d)) / (d * d)
            }
        }
    }

    /// Bounded support, if any (tabulated densities vanish outside their grid).
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Density::Tabulated(t) => Some(t.support()),
            _ => None,
        }
    }

    pub fn has_sampler(&self) -> bool {
        !matches!(self, Density::Custom { .. })
    }

    /// One draw from the law, or `None` when no sampler is known.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match self {
            Density::StandardGaussian => Some(rng.sample(StandardNormal)),
            Density::Gaussian { std_dev } => Some(std_dev * rng.sample::<f64, _>(StandardNormal)),
            Density::Sech => Some(sech_inverse_cdf(rng.sample(Open01))),
            Density::Tabulated(t) => Some(t.inverse_cdf(rng.sample(Open01))),
            Density::Custom { .. } => None,
        }
    }
}

/// Inverse CDF of the sech law: `F^-1(u) = (2/pi) log(tan(pi u / 2))`.
pub fn sech_inverse_cdf(u: f64) -> f64 {
    (2.0 / PI) * (FRAC_PI_2 * u).tan().ln()
}

/// Density given on a grid, interpolated by a monotone (Fritsch–Carlson)
/// piecewise cubic and normalized to unit mass.
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    /// CDF at each knot.
    cdf: Vec<f64>,
}

impl TabulatedDensity {
    /// Mass of the raw table may differ from 1 by at most this much before
    /// renormalization; larger gaps usually mean a truncated or mis-scaled grid.
    pub const MASS_TOLERANCE: f64 = 1e-3;

    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
        }
        if xs.len() < 3 {
            return Err(Error::config("tabulated density needs at least 3 grid points"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("tabulated density grid must be strictly increasing"));
        }
        if ys.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
            return Err(Error::config("tabulated density values must be positive and finite"));
        }
        let slopes = pchip_slopes(&xs, &ys);
        let mut table = TabulatedDensity { xs, ys, slopes, cdf: Vec::new() };
        table.cdf = table.knot_cdf();
        let mass = *table.cdf.last().unwrap();
        if (mass - 1.0).abs() > Self::MASS_TOLERANCE {
            return Err(Error::config(format!(
                "tabulated density integrates to {mass}, expected 1 (tolerance {})",
                Self::MASS_TOLERANCE
            )));
        }
        for v in table.ys.iter_mut().chain(table.slopes.iter_mut()) {
            *v /= mass;
        }
        table.cdf = table.knot_cdf();
        Ok(table)
    }

    /// Reads a two-column `x,g` CSV (a header row is optional).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::config(format!("{}: row {} must have 2 columns", path.display(), row + 1)));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if row == 0 => continue,
                _ => return Err(Error::config(format!("{}: row {} is not numeric", path.display(), row + 1))),
            }
        }
        Self::new(xs, ys)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    fn interval(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i => (i - 1).min(self.xs.len() - 2),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        self.ys[i] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * self.slopes[i] * (t3 - 2.0 * t2 + t)
            + self.ys[i + 1] * (-2.0 * t3 + 3.0 * t2)
            + h * self.slopes[i + 1] * (t3 - t2)
    }

    /// Integral of the interpolant over `[x_i, x_i + s h]`, `s` in [0, 1].
    fn partial_mass(&self, i: usize, s: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        h * (self.ys[i] * (s4 / 2.0 - s3 + s)
            + h * self.slopes[i] * (s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0)
            + self.ys[i + 1] * (-s4 / 2.0 + s3)
            + h * self.slopes[i + 1] * (s4 / 4.0 - s3 / 3.0))
    }

    fn knot_cdf(&self) -> Vec<f64> {
        let mut cdf = Vec::with_capacity(self.xs.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 0..self.xs.len() - 1 {
            acc += self.partial_mass(i, 1.0);
            cdf.push(acc);
        }
        cdf
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = match self.cdf.partition_point(|&c| c <= u) {
            0 => 0,
            k => (k - 1).min(self.xs.len() - 2),
        };
        let target = u - self.cdf[i];
        let h = self.xs[i + 1] - self.xs[i];
        // safeguarded Newton on s in [0, 1]
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut s = 0.5;
        for _ in 0..60 {
            let f = self.partial_mass(i, s) - target;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let df = h * self.pdf(self.xs[i] + s * h);
            let newton = s - f / df;
            s = if df > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-14 {
                break;
            }
        }
        self.xs[i] + s * h
    }
}

/// Fritsch–Carlson slopes (as in PCHIP) so the interpolant is monotone wherever the data are.
fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let mut s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            s = 0.0;
        } else if d0 * d1 <= 0.0 && s.abs() > (3.0 * d0).abs() {
            s = 3.0 * d0;
        }
        s
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}
