//! Exact likelihood ratio for the spiked Gaussian Wigner model at small `n`,
//! by enumeration over Rademacher spikes.
//!
//! Works with `Y = sqrt(lambda/n) X X^T + W`, where `X` has `+-1` entries,
//! `W` has unit off-diagonal and `w2` diagonal variance. With `A = X X^T`,
//!
//! `-H(X) = sum_{i<j} [sqrt(lambda/n) Y_ij A_ij - lambda/(2n) A_ij^2]
//!          + (1/w2) sum_i [sqrt(lambda/n) Y_ii A_ii - lambda/(2n) A_ii^2]`.
//!
//! `A` is unchanged by flipping the sign of a whole column, so the first
//! row is pinned to `+1` and only `2^((n-1)k)` matrices are visited, in Gray
//! code order with an `O(n)` update per step.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{trial_rng, DataMatrix};
use crate::par;

/// Largest `n * k` that will be enumerated.
pub const MAX_SIGN_BITS: usize = 24;
const CHUNK_BITS: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModelY {
    pub n: usize,
    /// Row-major symmetric `n x n`.
    pub y: Vec<f64>,
    pub lambda: f64,
    pub w2: f64,
}

impl GaussianModelY {
    pub fn new(n: usize, y: Vec<f64>, lambda: f64, w2: f64) -> Result<Self> {
        if y.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: y.len() });
        }
        if !(lambda >= 0.0) || !(w2 > 0.0) {
            return Err(Error::domain(format!("need lambda >= 0 and w2 > 0, got {lambda}, {w2}")));
        }
        for i in 0..n {
            for j in 0..i {
                if y[i * n + j] != y[j * n + i] {
                    return Err(Error::domain("Y must be symmetric"));
                }
            }
        }
        Ok(GaussianModelY { n, y, lambda, w2 })
    }

    /// `Y = sqrt(n) M` for a matrix in the `1/n` variance convention.
    pub fn from_data_matrix(m: &DataMatrix, lambda: f64, w2: f64) -> Result<Self> {
        let root = (m.n() as f64).sqrt();
        GaussianModelY::new(m.n(), m.entries().iter().map(|v| root * v).collect(), lambda, w2)
    }

    /// Draw `Y` with a rank-`k` Rademacher spike.
    pub fn sample<R: Rng + ?Sized>(n: usize, k: usize, lambda: f64, w2: f64, rng: &mut R) -> Result<Self> {
        let x: Vec<f64> = (0..n * k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let scale = (lambda / n as f64).sqrt();
        let sd_diag = w2.sqrt();
        let mut y = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let a: f64 = (0..k).map(|m| x[i * k + m] * x[j * k + m]).sum();
                let z: f64 = StandardNormal.sample(rng);
                let w = if i == j { sd_diag * z } else { z };
                y[i * n + j] = scale * a + w;
                y[j * n + i] = y[i * n + j];
            }
        }
        GaussianModelY::new(n, y, lambda, w2)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.y[i * self.n + j]
    }
}

/// `H(X)` for an `n x k` sign matrix given row-major.
pub fn hamiltonian(x: &[f64], k: usize, model: &GaussianModelY) -> Result<f64> {
    let n = model.n;
    if x.len() != n * k {
        return Err(Error::DimensionMismatch { expected: n * k, got: x.len() });
    }
    if x.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::domain("sign matrix entries must be +1 or -1"));
    }
    let nf = n as f64;
    let (a_lin, a_quad) = ((model.lambda / nf).sqrt(), model.lambda / (2.0 * nf));
    let gram = |i: usize, j: usize| -> f64 { (0..k).map(|m| x[i * k + m] * x[j * k + m]).sum() };
    let mut neg_h = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let a = gram(i, j);
            neg_h += a_lin * model.at(i, j) * a - a_quad * a * a;
        }
        let a = gram(i, i);
        neg_h += (a_lin * model.at(i, i) * a - a_quad * a * a) / model.w2;
    }
    Ok(-neg_h)
}

/// Running `log sum exp`.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    const EMPTY: LogSumExp = LogSumExp { max: f64::NEG_INFINITY, sum: 0.0 };

    fn push(&mut self, v: f64) {
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn merge(self, other: LogSumExp) -> LogSumExp {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let max = self.max.max(other.max);
        LogSumExp { max, sum: self.sum * (self.max - max).exp() + other.sum * (other.max - max).exp() }
    }
}

/// Enumeration state: signs, Gram matrix and the current `-H`.
struct Walker<'a> {
    model: &'a GaussianModelY,
    k: usize,
    x: Vec<f64>,
    gram: Vec<f64>,
    neg_h: f64,
    a_lin: f64,
    a_quad: f64,
}

impl<'a> Walker<'a> {
    /// Start at the configuration with Gray code `code`.
    fn at_code(model: &'a GaussianModelY, k: usize, code: u64) -> Self {
        let n = model.n;
        let mut x = vec![1.0; n * k];
        for bit in 0..(n - 1) * k {
            if code >> bit & 1 == 1 {
                let (row, col) = Self::position(n, bit);
                x[row * k + col] = -1.0;
            }
        }
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = (0..k).map(|m| x[i * k + m] * x[j * k + m]).sum();
            }
        }
        let nf = n as f64;
        let mut w = Walker {
            model,
            k,
            x,
            gram,
            neg_h: 0.0,
            a_lin: (model.lambda / nf).sqrt(),
            a_quad: model.lambda / (2.0 * nf),
        };
        w.neg_h = w.full_neg_h();
        w
    }

    fn position(n: usize, bit: usize) -> (usize, usize) {
        (1 + bit % (n - 1), bit / (n - 1))
    }

    fn full_neg_h(&self) -> f64 {
        let n = self.model.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let a = self.gram[i * n + j];
                acc += self.a_lin * self.model.at(i, j) * a - self.a_quad * a * a;
            }
            let a = self.gram[i * n + i];
            acc += (self.a_lin * self.model.at(i, i) * a - self.a_quad * a * a) / self.model.w2;
        }
        acc
    }

    /// Flip one sign; only row/column `row` of the Gram matrix moves.
    fn flip(&mut self, bit: usize) {
        let n = self.model.n;
        let (row, col) = Self::position(n, bit);
        let xi = self.x[row * self.k + col];
        for j in 0..n {
            if j == row {
                continue;
            }
            let old = self.gram[row * n + j];
            let new = old - 2.0 * xi * self.x[j * self.k + col];
            self.neg_h += self.a_lin * self.model.at(row, j) * (new - old) - self.a_quad * (new * new - old * old);
            self.gram[row * n + j] = new;
            self.gram[j * n + row] = new;
        }
        self.x[row * self.k + col] = -xi;
    }
}

/// `log L(Y; k)`: log of the average of `exp(-H)` over all sign matrices.
pub fn log_likelihood(model: &GaussianModelY, k: usize) -> Result<f64> {
    let n = model.n;
    if n * k > MAX_SIGN_BITS {
        return Err(Error::Capacity { n, k });
    }
    if k == 0 || n == 0 {
        return Ok(0.0);
    }
    let bits = ((n - 1) * k) as u32;
    let chunk_bits = bits.min(CHUNK_BITS);
    let chunks = 1usize << (bits - chunk_bits);
    let per_chunk = 1u64 << chunk_bits;

    let partials = par::map_indexed(chunks, |c| {
        let start = c as u64 * per_chunk;
        let mut walker = Walker::at_code(model, k, start ^ (start >> 1));
        let mut acc = LogSumExp::EMPTY;
        acc.push(walker.neg_h);
        for t in start + 1..start + per_chunk {
            walker.flip(t.trailing_zeros() as usize);
            acc.push(walker.neg_h);
        }
        acc
    });
    let total = partials.into_iter().fold(LogSumExp::EMPTY, LogSumExp::merge);
    // the count is a power of two, so the division is exact
    Ok(total.max + (total.sum / (1u64 << bits) as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrResult {
    pub log_l1: f64,
    pub log_l2: f64,
    pub log_lr: f64,
}

pub fn log_lr(model: &GaussianModelY, k1: usize, k2: usize) -> Result<LrResult> {
    let log_l1 = log_likelihood(model, k1)?;
    let log_l2 = if k1 == k2 { log_l1 } else { log_likelihood(model, k2)? };
    Ok(LrResult { log_l1, log_l2, log_lr: log_l2 - log_l1 })
}

/// Log-LR samples with `Y` drawn independently under each hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSamples {
    pub under_h1: Vec<f64>,
    pub under_h2: Vec<f64>,
}

impl LrSamples {
    /// `P1(log LR <= 0) + P2(log LR > 0)`; a tie accepts H1.
    pub fn test_error(&self) -> f64 {
        let p1 = self.under_h1.iter().filter(|&&v| !(v <= 0.0)).count() as f64 / self.under_h1.len() as f64;
        let p2 = self.under_h2.iter().filter(|&&v| v <= 0.0).count() as f64 / self.under_h2.len() as f64;
        p1 + p2
    }
}

/// Trial `t` under H1 uses stream `2t`, under H2 stream `2t + 1`.
pub fn lr_monte_carlo(
    n: usize,
    k1: usize,
    k2: usize,
    lambda: f64,
    w2: f64,
    trials: usize,
    seed: u64,
) -> Result<LrSamples> {
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    if n * k1.max(k2) > MAX_SIGN_BITS {
        return Err(Error::Capacity { n, k: k1.max(k2) });
    }
    let draw = |t: usize, k_true: usize, stream: u64| -> Result<f64> {
        let mut rng = trial_rng(seed, 2 * t as u64 + stream);
        let y = GaussianModelY::sample(n, k_true, lambda, w2, &mut rng)?;
        Ok(log_lr(&y, k1, k2)?.log_lr)
    };
    let under_h1 = par::map_indexed(trials, |t| draw(t, k1, 0)).into_iter().collect::<Result<Vec<_>>>()?;
    let under_h2 = par::map_indexed(trials, |t| draw(t, k2, 1)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LrSamples { under_h1, under_h2 })
}

/// Monte Carlo estimate of the error of the likelihood-ratio test.
pub fn lr_test_error_mc(n: usize, k1: usize, k2: usize, lambda: f64, w2: f64, trials: usize, seed: u64) -> Result<f64> {
    Ok(lr_monte_carlo(n, k1, k2, lambda, w2, trials, seed)?.test_error())
}
