//! Noise and spike models, and samplers for spiked Wigner matrices
//! `M = sqrt(lambda) X X^T + H`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::Density;
use crate::error::{Error, Result};

/// Per-trial random stream.
pub type TrialRng = ChaCha8Rng;

/// Counter-based stream: the key comes from `master_seed`, the ChaCha stream id
/// from `stream`, so a trial's draws never depend on scheduling order.
pub fn trial_rng(master_seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    GaussianGoe,
    GaussianUnitDiag,
    Sech,
    Custom,
}

impl NoiseKind {
    pub fn tag(self) -> &'static str {
        match self {
            NoiseKind::GaussianGoe => "gaussian_goe",
            NoiseKind::GaussianUnitDiag => "gaussian_unit_diag",
            NoiseKind::Sech => "sech",
            NoiseKind::Custom => "custom",
        }
    }
}

/// Noise law of a Wigner matrix.
///
/// `w2 = N E[H_ii^2]`, `w3 = N^{3/2} E[H_ij^3]`, `w4 = N^2 E[H_ij^4]`. The
/// off-diagonal density is the law of `sqrt(N) H_ij`; the diagonal density is
/// the law of the unit-variance entry `sqrt(N / w2) H_ii`.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub off_density: Option<Density>,
    pub diag_density: Option<Density>,
}

impl NoiseSpec {
    /// GOE: Gaussian entries, diagonal variance 2/N.
    pub fn goe() -> Self {
        NoiseSpec {
            kind: NoiseKind::GaussianGoe,
            w2: 2.0,
            w3: 0.0,
            w4: 3.0,
            off_density: Some(Density::StandardGaussian),
            diag_density: Some(Density::StandardGaussian),
        }
    }

    pub fn gaussian_unit_diag() -> Self {
        NoiseSpec { kind: NoiseKind::GaussianUnitDiag, w2: 1.0, ..Self::goe() }
    }

    /// Every entry (diagonal included) drawn from `1/(2 cosh(pi x/2))`.
    pub fn sech() -> Self {
        NoiseSpec {
            kind: NoiseKind::Sech,
            w2: 1.0,
            w3: 0.0,
            w4: 5.0,
            off_density: Some(Density::Sech),
            diag_density: Some(Density::Sech),
        }
    }

    /// Custom law; `w3` and `w4` are computed from the off-diagonal density.
    pub fn custom(off: Density, diag: Option<Density>, w2: f64) -> Result<Self> {
        let moments = crate::transform::density_moments(&off)?;
        if (moments.mass - 1.0).abs() > 1e-8 {
            return Err(Error::config(format!("off-diagonal density integrates to {}, not 1", moments.mass)));
        }
        if (moments.second - 1.0).abs() > 1e-3 {
            return Err(Error::config(format!(
                "off-diagonal density must have unit variance (got {})",
                moments.second
            )));
        }
        let spec = NoiseSpec {
            kind: NoiseKind::Custom,
            w2,
            w3: moments.third,
            w4: moments.fourth,
            off_density: Some(off.clone()),
            diag_density: Some(diag.unwrap_or(off)),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w2 >= 0.0) || !self.w2.is_finite() {
            return Err(Error::config(format!("w2 must be finite and >= 0 (got {})", self.w2)));
        }
        if !(self.w4 >= 1.0) {
            return Err(Error::config(format!("w4 must be >= 1 (got {})", self.w4)));
        }
        Ok(())
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }
}

#[derive(Debug, Clone)]
pub enum SpikePriorKind {
    /// Entries `+-1` before normalization.
    Rademacher,
    Gaussian,
    Custom(Density),
}

/// Per-entry law of a spike column (before normalization to unit norm).
#[derive(Debug, Clone)]
pub struct SpikePrior {
    pub kind: SpikePriorKind,
    pub bounded: bool,
    pub third_moment: f64,
}

impl SpikePrior {
    pub fn rademacher() -> Self {
        SpikePrior { kind: SpikePriorKind::Rademacher, bounded: true, third_moment: 0.0 }
    }

    pub fn gaussian() -> Self {
        SpikePrior { kind: SpikePriorKind::Gaussian, bounded: false, third_moment: 0.0 }
    }

    pub fn custom(density: Density) -> Result<Self> {
        if !density.has_sampler() {
            return Err(Error::config("custom spike prior needs a sampleable density"));
        }
        let m = crate::transform::density_moments(&density)?;
        if m.first.abs() > 1e-6 {
            return Err(Error::config(format!("spike prior must be centered (mean {})", m.first)));
        }
        Ok(SpikePrior {
            bounded: density.support().is_some(),
            third_moment: m.third,
            kind: SpikePriorKind::Custom(density),
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SpikePriorKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SpikePriorKind::Gaussian => Density::StandardGaussian.sample(rng).unwrap(),
            SpikePriorKind::Custom(d) => d.sample(rng).expect("checked at construction"),
        }
    }
}

/// `N x k` spike with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeMatrix {
    pub n: usize,
    pub columns: Vec<Vec<f64>>,
}

impl SpikeMatrix {
    pub fn empty(n: usize) -> Self {
        SpikeMatrix { n, columns: Vec::new() }
    }

    pub fn from_columns(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        for c in &columns {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!("spike column norm {norm} is not 1")));
            }
        }
        Ok(SpikeMatrix { n, columns })
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    /// `max |<x_a, x_b> - delta_ab|`; columns are not orthogonalized.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (a, xa) in self.columns.iter().enumerate() {
            for (b, xb) in self.columns.iter().enumerate().skip(a) {
                let dot: f64 = xa.iter().zip(xb).map(|(p, q)| p * q).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMeta {
    pub lambda: f64,
    pub true_rank: usize,
    pub noise_tag: String,
}

/// Real symmetric `n x n` matrix (dense, row-major) plus provenance.
#[derive(Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    entries: Vec<f64>,
    pub meta: MatrixMeta,
}

impl fmt::Debug for DataMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DataMatrix").field("n", &self.n).field("meta", &self.meta).finish_non_exhaustive()
    }
}

impl DataMatrix {
    /// Builds from the upper triangle; `(i, j)` with `i <= j` is evaluated once and mirrored.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = upper(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        DataMatrix { n, entries, meta: MatrixMeta { lambda: 0.0, true_rank: 0, noise_tag: String::new() } }
    }

    /// From full rows; rejects anything not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(i) {
                if v != rows[j][i] {
                    return Err(Error::domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_upper(n, |i, j| rows[i][j]))
    }

    pub fn with_meta(mut self, meta: MatrixMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_faer(&self) -> faer::MatRef<'_, f64> {
        // symmetric, so row-major storage is also a valid column-major view
        faer::MatRef::from_column_major_slice(&self.entries, self.n, self.n)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `Tr M^2` for symmetric `M`.
    pub fn trace_of_square(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Elementwise map over the upper triangle with the diagonal handled separately.
    pub fn map_entries(&self, off: impl Fn(f64) -> f64, diag: impl Fn(f64) -> f64) -> DataMatrix {
        let out =
            DataMatrix::from_upper(self.n, |i, j| if i == j { diag(self.get(i, i)) } else { off(self.get(i, j)) });
        out.with_meta(self.meta.clone())
    }
}

/// Samples a Wigner matrix with off-diagonal variance `1/n` and diagonal variance `w2/n`.
pub fn sample_wigner<R: Rng + ?Sized>(noise: &NoiseSpec, n: usize, rng: &mut R) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::domain("matrix size must be at least 1"));
    }
    let off = noise
        .off_density
        .as_ref()
        .filter(|d| d.has_sampler())
        .ok_or_else(|| Error::config(format!("noise '{}' has no off-diagonal sampler", noise.tag())))?;
    let diag = noise
        .diag_density
        .as_ref()
        .filter(|d| d.has_sampler())
        .ok_or_else(|| Error::config(format!("noise '{}' has no diagonal sampler", noise.tag())))?;
    let scale = 1.0 / (n as f64).sqrt();
    let diag_scale = (noise.w2 / n as f64).sqrt();
    let m = DataMatrix::from_upper(n, |i, j| {
        if i == j {
            diag_scale * diag.sample(rng).unwrap()
        } else {
            scale * off.sample(rng).unwrap()
        }
    });
    Ok(m.with_meta(MatrixMeta { lambda: 0.0, true_rank: 0, noise_tag: noise.tag().to_string() }))
}

/// Samples `k` columns entrywise from `prior`, each scaled to unit norm.
pub fn sample_spike<R: Rng + ?Sized>(prior: &SpikePrior, n: usize, k: usize, rng: &mut R) -> Result<SpikeMatrix> {
    if n == 0 {
        return Err(Error::domain("spike length must be at least 1"));
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut columns = Vec::with_capacity(k);
    for _ in 0..k {
        let column = match prior.kind {
            SpikePriorKind::Rademacher => (0..n).map(|_| prior.draw(rng) * inv_sqrt_n).collect(),
            _ => loop {
                let raw: Vec<f64> = (0..n).map(|_| prior.draw(rng)).collect();
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break raw.into_iter().map(|v| v / norm).collect();
                }
            },
        };
        columns.push(column);
    }
    Ok(SpikeMatrix { n, columns })
}

/// `M = sqrt(lambda) X X^T + H`.
pub fn assemble(spike: &SpikeMatrix, lambda: f64, noise_draw: &DataMatrix) -> Result<DataMatrix> {
    if spike.n != noise_draw.n {
        return Err(Error::DimensionMismatch { expected: noise_draw.n, got: spike.n });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be finite and >= 0 (got {lambda})")));
    }
    let meta = MatrixMeta { lambda, true_rank: spike.rank(), noise_tag: noise_draw.meta.noise_tag.clone() };
    if spike.rank() == 0 || lambda == 0.0 {
        return Ok(noise_draw.clone().with_meta(meta));
    }
    let s = lambda.sqrt();
    let m = DataMatrix::from_upper(noise_draw.n, |i, j| {
        let signal: f64 = spike.columns.iter().map(|c| c[i] * c[j]).sum();
        noise_draw.get(i, j) + s * signal
    });
    Ok(m.with_meta(meta))
}

/// Draws spike and noise from one stream: spike first, then noise.
pub fn sample_spiked<R: Rng + ?Sized>(
    noise: &NoiseSpec,
    prior: &SpikePrior,
    n: usize,
    k: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<DataMatrix> {
    let spike = sample_spike(prior, n, k, rng)?;
    let h = sample_wigner(noise, n, rng)?;
    assemble(&spike, lambda, &h)
}

/// `(n mean_{i<j} H_ij^2, n mean_i H_ii^2, n^2 mean_{i<j} H_ij^4)` of one matrix.
pub fn empirical_moments(m: &DataMatrix) -> (f64, f64, f64) {
    let n = m.n();
    let nf = n as f64;
    let (mut s2, mut s4, mut d2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        d2 += m.get(i, i).powi(2);
        for j in i + 1..n {
            let v = m.get(i, j).powi(2);
            s2 += v;
            s4 += v * v;
        }
    }
    let pairs = nf * (nf - 1.0) / 2.0;
    (nf * s2 / pairs, nf * d2 / nf, nf * nf * s4 / pairs)
}
