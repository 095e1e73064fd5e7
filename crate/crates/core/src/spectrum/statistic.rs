use super::Spectrum;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::DataMatrix;
use crate::transform::DensityFunctionals;

fn check_plain_domain(lambda: f64, w2: f64, w4: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(w2 > 0.0) || !w2.is_finite() {
        return Err(Error::domain(format!("w2 must be positive and finite, got {w2}")));
    }
    if !(w4 > 1.0) || !w4.is_finite() {
        return Err(Error::domain(format!("w4 must exceed 1, got {w4}")));
    }
    Ok(())
}

fn check_transformed_domain(lambda: f64, funcs: &DensityFunctionals, w2: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be non-negative, got {lambda}")));
    }
    if !(lambda * funcs.fh < 1.0) {
        return Err(Error::domain(format!(
            "lambda * F^H = {} >= 1: the transformed signal is above the spectral threshold, use PCA instead",
            lambda * funcs.fh
        )));
    }
    if !(w2 > 0.0) || !w2.is_finite() {
        return Err(Error::domain(format!("w2 must be positive and finite, got {w2}")));
    }
    if !(funcs.w4t > 1.0) {
        return Err(Error::domain(format!("transformed fourth moment must exceed 1, got {}", funcs.w4t)));
    }
    Ok(())
}

/// The function
///
/// `phi(x) = -log(1 + s - sqrt(s) x) + linear * x + quadratic * x^2`
///
/// whose centered linear statistic is the test statistic. For the plain test
/// `s = lambda`, `linear = sqrt(lambda)(2/w2 - 1)` and
/// `quadratic = lambda (1/(w4-1) - 1/2)`; the transformed test replaces these
/// with `s = lambda F^H` and the corresponding density functionals.
///
/// The quadratic coefficient carries a single power of lambda. That is what
/// the log-determinant statistic uses and what makes `phi` the maximizer of
/// the separation-to-noise ratio among all linear statistics; a `lambda^2`
/// variant of the display does not reproduce the statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalLss {
    /// Effective SNR `s`.
    pub snr: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl OptimalLss {
    pub fn plain(lambda: f64, w2: f64, w4: f64) -> Result<Self> {
        if lambda == 0.0 {
            return Ok(OptimalLss { snr: 0.0, linear: 0.0, quadratic: 0.0 });
        }
        check_plain_domain(lambda, w2, w4)?;
        Ok(OptimalLss {
            snr: lambda,
            linear: lambda.sqrt() * (2.0 / w2 - 1.0),
            quadratic: lambda * (1.0 / (w4 - 1.0) - 0.5),
        })
    }

    pub fn transformed(lambda: f64, funcs: &DensityFunctionals, w2: f64) -> Result<Self> {
        check_transformed_domain(lambda, funcs, w2)?;
        Ok(OptimalLss {
            snr: lambda * funcs.fh,
            linear: lambda.sqrt() * (2.0 * funcs.fhd.sqrt() / w2 - funcs.fh.sqrt()),
            quadratic: lambda * (funcs.gh / (funcs.w4t - 1.0) - funcs.fh / 2.0),
        })
    }

    /// Location of the logarithmic singularity, `(1+s)/sqrt(s)`.
    pub fn pole(&self) -> f64 {
        if self.snr == 0.0 {
            f64::INFINITY
        } else {
            (1.0 + self.snr) / self.snr.sqrt()
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let arg = 1.0 + self.snr - self.snr.sqrt() * x;
        if !(arg > 0.0) {
            return Err(Error::domain(format!("phi is undefined at x={x} (pole at {})", self.pole())));
        }
        Ok(-arg.ln() + self.linear * x + self.quadratic * x * x)
    }

    /// Statistic from pre-aggregated pieces: `log det((1+s)I - sqrt(s) M)`, `Tr M`, `Tr M^2`.
    fn assemble(&self, n: usize, log_det: f64, trace: f64, trace_sq: f64) -> f64 {
        let nf = n as f64;
        -log_det + self.snr * nf / 2.0 + self.linear * trace + self.quadratic * (trace_sq - nf)
    }

    /// Test statistic from eigenvalues; the log-determinant is a sum of logs.
    pub fn statistic(&self, spectrum: &Spectrum) -> Result<f64> {
        let root = self.snr.sqrt();
        let mut log_det = 0.0;
        for &mu in spectrum.eigenvalues() {
            let arg = 1.0 + self.snr - root * mu;
            if !(arg > 0.0) {
                return Err(Error::SpectralOverflow { eigenvalue: spectrum.largest(), bound: self.pole() });
            }
            log_det += arg.ln();
        }
        Ok(self.assemble(spectrum.len(), log_det, spectrum.trace(), spectrum.trace_of_square()))
    }

    /// Same statistic from the matrix itself via a Cholesky log-determinant.
    /// Positive definiteness of the shifted matrix is exactly the condition that
    /// every eigenvalue lies below the pole.
    pub fn statistic_dense(&self, m: &DataMatrix) -> Result<f64> {
        let log_det = if self.snr == 0.0 {
            0.0
        } else {
            linalg::shifted_log_det(m, 1.0 + self.snr, self.snr.sqrt())
                .ok_or(Error::SpectralOverflow { eigenvalue: None, bound: self.pole() })?
        };
        Ok(self.assemble(m.n(), log_det, m.trace(), m.trace_of_square()))
    }
}

pub fn optimal_function_phi(lambda: f64, w2: f64, w4: f64) -> Result<OptimalLss> {
    check_plain_domain(lambda, w2, w4)?;
    OptimalLss::plain(lambda, w2, w4)
}

/// `L_lambda` computed from the spectrum.
pub fn test_statistic_l(spectrum: &Spectrum, lambda: f64, w2: f64, w4: f64) -> Result<f64> {
    OptimalLss::plain(lambda, w2, w4)?.statistic(spectrum)
}

/// Per-spike mean increment
/// `Delta = -log(1-lambda) + (2/w2 - 1) lambda + (1/(w4-1) - 1/2) lambda^2`.
pub fn mean_shift(lambda: f64, w2: f64, w4: f64) -> f64 {
    -(-lambda).ln_1p() + (2.0 / w2 - 1.0) * lambda + (1.0 / (w4 - 1.0) - 0.5) * lambda * lambda
}

/// Limiting mean and variance of `L_lambda` under a rank-`k` spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LssModel {
    pub lambda: f64,
    pub w2: f64,
    pub w4: f64,
    pub k: usize,
    pub m0: f64,
    pub mk: f64,
    pub v0: f64,
}

impl LssModel {
    pub fn mean_shift(&self) -> f64 {
        mean_shift(self.lambda, self.w2, self.w4)
    }

    /// Mean under rank `k`, `m0 + k Delta`.
    pub fn mean_for_rank(&self, k: usize) -> f64 {
        self.m0 + k as f64 * self.mean_shift()
    }
}

pub fn lss_mean_variance(lambda: f64, w2: f64, w4: f64, k: usize) -> Result<LssModel> {
    check_plain_domain(lambda, w2, w4)?;
    let log1m = (-lambda).ln_1p();
    let m0 = -0.5 * log1m + ((w2 - 1.0) / (w4 - 1.0) - 0.5) * lambda + (w4 - 3.0) * lambda * lambda / 4.0;
    let v0 = -2.0 * log1m + (4.0 / w2 - 2.0) * lambda + (2.0 / (w4 - 1.0) - 1.0) * lambda * lambda;
    let mk = m0 + k as f64 * mean_shift(lambda, w2, w4);
    Ok(LssModel { lambda, w2, w4, k, m0, mk, v0 })
}

/// `(m_{k1} + m_{k2}) / 2`.
pub fn critical_value(lambda: f64, w2: f64, w4: f64, k1: usize, k2: usize) -> Result<f64> {
    if k1 >= k2 {
        return Err(Error::domain(format!("hypotheses need k1 < k2, got k1={k1}, k2={k2}")));
    }
    let model = lss_mean_variance(lambda, w2, w4, 0)?;
    Ok(0.5 * (model.mean_for_rank(k1) + model.mean_for_rank(k2)))
}

/// Limiting law of the transformed statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedLssModel {
    pub lambda: f64,
    pub fh: f64,
    pub fhd: f64,
    pub gh: f64,
    pub w2: f64,
    pub w4t: f64,
    pub k: usize,
    pub m0: f64,
    pub mk: f64,
    pub v0: f64,
}

impl TransformedLssModel {
    pub fn new(lambda: f64, funcs: &DensityFunctionals, w2: f64, k: usize) -> Result<Self> {
        check_transformed_domain(lambda, funcs, w2)?;
        let DensityFunctionals { fh, fhd, gh, w4t } = *funcs;
        let s = lambda * fh;
        let log1m = (-s).ln_1p();
        let m0 = -0.5 * log1m + ((w2 - 1.0) * gh / (w4t - 1.0) - fh / 2.0) * lambda + (w4t - 3.0) / 4.0 * s * s;
        let v0 = -2.0 * log1m
            + (4.0 * fhd / w2 - 2.0 * fh) * lambda
            + (2.0 * gh * gh / (w4t - 1.0) - fh * fh) * lambda * lambda;
        let mk = m0 + k as f64 * transformed_mean_shift(lambda, funcs, w2);
        Ok(TransformedLssModel { lambda, fh, fhd, gh, w2, w4t, k, m0, mk, v0 })
    }

    pub fn mean_for_rank(&self, k: usize) -> f64 {
        let funcs = DensityFunctionals { fh: self.fh, fhd: self.fhd, gh: self.gh, w4t: self.w4t };
        self.m0 + k as f64 * transformed_mean_shift(self.lambda, &funcs, self.w2)
    }
}

/// `-log(1 - lambda F) + (2 F_d / w2 - F) lambda + (G^2/(w4t - 1) - F^2/2) lambda^2`.
pub fn transformed_mean_shift(lambda: f64, funcs: &DensityFunctionals, w2: f64) -> f64 {
    let DensityFunctionals { fh, fhd, gh, w4t } = *funcs;
    -(-lambda * fh).ln_1p() + (2.0 * fhd / w2 - fh) * lambda + (gh * gh / (w4t - 1.0) - fh * fh / 2.0) * lambda * lambda
}

pub fn transformed_critical_value(
    lambda: f64,
    funcs: &DensityFunctionals,
    w2: f64,
    k1: usize,
    k2: usize,
) -> Result<f64> {
    if k1 >= k2 {
        return Err(Error::domain(format!("hypotheses need k1 < k2, got k1={k1}, k2={k2}")));
    }
    let model = TransformedLssModel::new(lambda, funcs, w2, 0)?;
    Ok(0.5 * (model.mean_for_rank(k1) + model.mean_for_rank(k2)))
}

/// Transformed statistic on the spectrum of the transformed matrix, with its limiting law.
pub fn transformed_statistic_and_model(
    spectrum: &Spectrum,
    lambda: f64,
    funcs: &DensityFunctionals,
    w2: f64,
    k: usize,
) -> Result<(f64, TransformedLssModel)> {
    let stat = OptimalLss::transformed(lambda, funcs, w2)?.statistic(spectrum)?;
    Ok((stat, TransformedLssModel::new(lambda, funcs, w2, k)?))
}
