//! Chebyshev coefficients on [-2, 2] and the CLT mean/variance of a general
//! linear spectral statistic.
//!
//! `tau_l(f) = (1/pi) int_{-2}^{2} T_l(x/2) f(x) / sqrt(4 - x^2) dx`. With
//! `x = 2 cos(theta)` this is a cosine transform, evaluated exactly for
//! polynomials by Gauss–Chebyshev quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::transform::DensityFunctionals;

/// Tail bound used for the truncated series.
pub const SERIES_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs {
    /// `tau_0 ..= tau_lmax`.
    pub values: Vec<f64>,
    pub lmax: usize,
}

impl ChebCoeffs {
    pub fn tau(&self, l: usize) -> f64 {
        self.values.get(l).copied().unwrap_or(0.0)
    }
}

fn node_count(lmax: usize) -> usize {
    4 * lmax + 64
}

/// `tau_0 ..= tau_lmax` using `4 lmax + 64` Gauss–Chebyshev nodes.
pub fn chebyshev_coeffs(f: impl Fn(f64) -> f64, lmax: usize) -> ChebCoeffs {
    let nodes = node_count(lmax);
    let mut values = vec![0.0; lmax + 1];
    for j in 0..nodes {
        let theta = PI * (j as f64 + 0.5) / nodes as f64;
        let t = theta.cos();
        let fx = f(2.0 * t);
        // T_l(t) = cos(l theta) by the three-term recurrence
        let (mut prev, mut cur) = (1.0, t);
        values[0] += fx;
        for v in values.iter_mut().skip(1) {
            *v += cur * fx;
            let next = 2.0 * t * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    for v in &mut values {
        *v /= nodes as f64;
    }
    ChebCoeffs { values, lmax }
}

/// `int f(x) sqrt(4-x^2)/(2 pi) dx`, which equals `tau_0(f) - tau_2(f)`.
pub fn semicircle_mean(f: impl Fn(f64) -> f64) -> f64 {
    let c = chebyshev_coeffs(f, 2 * 64);
    c.tau(0) - c.tau(2)
}

/// Default truncation: `max(50, ceil(log(1e-12) / log(sqrt(lambda))))`.
pub fn default_lmax(lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 50;
    }
    let geometric = (1e-12f64.ln() / lambda.sqrt().ln()).ceil();
    if geometric.is_finite() {
        (geometric as usize).max(50)
    } else {
        50
    }
}

/// Limiting mean and variance of `sum_i f(mu_i) - N int f dsc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltMoments {
    pub mean: f64,
    pub variance: f64,
    pub lmax: usize,
}

/// Mean/variance from coefficients, with `spike_weight(l)` the per-spike
/// factor multiplying `tau_l` in the mean.
fn moments_from_coeffs(
    f: &dyn Fn(f64) -> f64,
    lmax: usize,
    w2: f64,
    w4: f64,
    k: usize,
    spike_weight: &dyn Fn(usize) -> f64,
) -> Result<CltMoments> {
    let lmax = lmax.max(4);
    // twice the needed degree so the tail beyond lmax can be measured
    let coeffs = chebyshev_coeffs(f, 2 * lmax);
    let tau = |l: usize| coeffs.tau(l);

    let mut spike_sum = 0.0;
    let mut variance_sum = 0.0;
    for l in 1..=lmax {
        spike_sum += spike_weight(l) * tau(l);
        variance_sum += l as f64 * tau(l) * tau(l);
    }

    let mut mean_tail = 0.0;
    let mut variance_tail = 0.0;
    for l in lmax + 1..=2 * lmax {
        mean_tail += (spike_weight(l) * tau(l)).abs();
        variance_tail += l as f64 * tau(l) * tau(l);
    }
    // geometric extrapolation past the measured window, skipped once the
    // terms are at rounding level
    let last = (spike_weight(2 * lmax) * tau(2 * lmax)).abs();
    let before = (spike_weight(2 * lmax - 1) * tau(2 * lmax - 1)).abs();
    if before > 1e-3 * SERIES_TOLERANCE {
        let ratio = last / before;
        mean_tail += if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
    }
    let tail = if k == 0 { variance_tail } else { mean_tail.max(variance_tail) };
    if !(tail <= SERIES_TOLERANCE) {
        return Err(Error::Truncation { lmax, tail, tolerance: SERIES_TOLERANCE });
    }

    let mean =
        0.25 * (f(2.0) + f(-2.0)) - 0.5 * tau(0) + (w2 - 2.0) * tau(2) + (w4 - 3.0) * tau(4) + k as f64 * spike_sum;
    let variance = (w2 - 2.0) * tau(1) * tau(1) + 2.0 * (w4 - 3.0) * tau(2) * tau(2) + 2.0 * variance_sum;
    Ok(CltMoments { mean, variance, lmax })
}

/// CLT mean `m_k(f)` and variance `V_0(f)` for a rank-`k` spiked Wigner matrix.
pub fn clt_mean_variance(
    f: impl Fn(f64) -> f64,
    lambda: f64,
    w2: f64,
    w4: f64,
    k: usize,
    lmax: Option<usize>,
) -> Result<CltMoments> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let lmax = lmax.unwrap_or_else(|| default_lmax(lambda));
    let root = lambda.sqrt();
    moments_from_coeffs(&f, lmax, w2, w4, k, &|l| root.powi(l as i32))
}

/// CLT mean and variance after the entrywise transformation. The spike enters
/// `tau_1` through `sqrt(lambda F_d)`, `tau_2` through `lambda G`, and higher
/// orders through `(lambda F)^{l/2}`; the fourth-moment terms use `w4t`.
pub fn transformed_clt_mean_variance(
    f: impl Fn(f64) -> f64,
    lambda: f64,
    funcs: &DensityFunctionals,
    w2: f64,
    k: usize,
    lmax: Option<usize>,
) -> Result<CltMoments> {
    let s = lambda * funcs.fh;
    if !(lambda > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("need 0 < lambda and lambda F^H < 1, got lambda F^H = {s}")));
    }
    let lmax = lmax.unwrap_or_else(|| default_lmax(s));
    let (fhd, gh) = (funcs.fhd, funcs.gh);
    let weight = move |l: usize| match l {
        1 => (lambda * fhd).sqrt(),
        2 => lambda * gh,
        _ => s.sqrt().powi(l as i32),
    };
    moments_from_coeffs(&f, lmax, w2, funcs.w4t, k, &weight)
}
