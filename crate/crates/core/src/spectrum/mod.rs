//! Spectra, linear spectral statistics and their limiting Gaussian laws.

mod chebyshev;
mod statistic;

pub use chebyshev::{
    chebyshev_coeffs, clt_mean_variance, default_lmax, semicircle_mean, transformed_clt_mean_variance, ChebCoeffs,
    CltMoments, SERIES_TOLERANCE,
};
pub use statistic::{
    critical_value, lss_mean_variance, mean_shift, optimal_function_phi, test_statistic_l, transformed_critical_value,
    transformed_mean_shift, transformed_statistic_and_model, LssModel, OptimalLss, TransformedLssModel,
};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::DataMatrix;

/// Eigenvalues of a data matrix, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Sorts the given values descending.
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Spectrum { eigenvalues }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn largest(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn trace_of_square(&self) -> f64 {
        self.eigenvalues.iter().map(|m| m * m).sum()
    }
}

pub fn eigenvalues(m: &DataMatrix) -> Result<Spectrum> {
    Ok(Spectrum { eigenvalues: linalg::eigenvalues_desc(m)? })
}

/// `L_N(f) = sum_i f(mu_i)`.
pub fn lss(f: impl Fn(f64) -> f64, spectrum: &Spectrum) -> Result<f64> {
    let mut acc = 0.0;
    for &mu in spectrum.eigenvalues() {
        let v = f(mu);
        if !v.is_finite() {
            return Err(Error::NonFinite { eigenvalue: mu });
        }
        acc += v;
    }
    Ok(acc)
}
