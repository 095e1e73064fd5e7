//! Entrywise score transformation and the density functionals that govern it.
//!
//! With `h = -g'/g`, `g' = -h g` and `g'' = (h^2 - h') g`, so
//!
//! * `F^H   = int h^2 g`
//! * `G^H   = (1 / 2F^H) int h^2 (h^2 - h') g`
//! * `w4t   = (1 / (F^H)^2) int h^4 g`
//!
//! and `F^H_d` is the first of these for the diagonal density.

use crate::density::Density;
use crate::error::{Error, Result};
use crate::model::DataMatrix;

/// Quadrature target (absolute) for each functional.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// The integration window grows until the integrand at its ends is below this.
pub const TAIL_TOLERANCE: f64 = 1e-12;
const INITIAL_HALF_WIDTH: f64 = 10.0;
const MAX_HALF_WIDTH: f64 = 640.0;
/// Error estimates above this are treated as non-convergence. Finite-difference
/// scores carry noise near 1e-10 that the rule cannot integrate away.
const CONVERGENCE_FLOOR: f64 = 1e-6;
/// Sub-interval width for the piecewise double-exponential rule.
const PANEL_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityFunctionals {
    pub fh: f64,
    pub fhd: f64,
    pub gh: f64,
    pub w4t: f64,
}

impl DensityFunctionals {
    /// Values for the standard Gaussian, where the transform is the identity.
    pub const GAUSSIAN: DensityFunctionals = DensityFunctionals { fh: 1.0, fhd: 1.0, gh: 1.0, w4t: 3.0 };
}

/// Half-width `W` of `[-W, W]`, doubled from 10 until every probe is below the tail tolerance.
fn window(density: &Density, probes: &[&dyn Fn(f64) -> f64]) -> Result<(f64, f64)> {
    if let Some(support) = density.support() {
        return Ok(support);
    }
    let mut w = INITIAL_HALF_WIDTH;
    loop {
        let small = probes.iter().all(|p| p(w).abs() < TAIL_TOLERANCE && p(-w).abs() < TAIL_TOLERANCE);
        if small {
            return Ok((-w, w));
        }
        w *= 2.0;
        if w > MAX_HALF_WIDTH {
            return Err(Error::Quadrature(format!(
                "integrand of {} does not decay below {TAIL_TOLERANCE:e} within |x| <= {MAX_HALF_WIDTH}",
                density.name()
            )));
        }
    }
}

fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let panels = ((hi - lo) / PANEL_WIDTH).ceil().max(1.0) as usize;
    let width = (hi - lo) / panels as f64;
    let tol = QUADRATURE_TOLERANCE / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let b = if p + 1 == panels { hi } else { a + width };
        let out = quadrature::double_exponential::integrate(&f, a, b, tol);
        if !out.integral.is_finite() || out.error_estimate > CONVERGENCE_FLOOR {
            return Err(Error::Quadrature(format!(
                "panel [{a}, {b}] did not converge (estimate {:e})",
                out.error_estimate
            )));
        }
        total += out.integral;
    }
    Ok(total)
}

fn check_positive(density: &Density, lo: f64, hi: f64) -> Result<()> {
    let steps = 400;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let g = density.pdf(x);
        if !(g > 0.0) && density.support().is_none() {
            return Err(Error::Quadrature(format!("density {} is not positive at x={x}", density.name())));
        }
    }
    Ok(())
}

fn fisher_information(density: &Density) -> Result<f64> {
    let integrand = |x: f64| density.score(x).powi(2) * density.pdf(x);
    let (lo, hi) = window(density, &[&integrand])?;
    check_positive(density, lo, hi)?;
    integrate(integrand, lo, hi)
}

/// `F^H`, `F^H_d`, `G^H` and `w4t` by quadrature.
pub fn fisher_functionals(g: &Density, g_d: &Density) -> Result<DensityFunctionals> {
    let f_int = |x: f64| g.score(x).powi(2) * g.pdf(x);
    let g_int = |x: f64| {
        let h = g.score(x);
        h * h * (h * h - g.score_derivative(x)) * g.pdf(x)
    };
    let w_int = |x: f64| g.score(x).powi(4) * g.pdf(x);
    let (lo, hi) = window(g, &[&f_int, &g_int, &w_int])?;
    check_positive(g, lo, hi)?;
    let fh = integrate(f_int, lo, hi)?;
    let gh = integrate(g_int, lo, hi)? / (2.0 * fh);
    let w4t = integrate(w_int, lo, hi)? / (fh * fh);
    let fhd = fisher_information(g_d)?;
    Ok(DensityFunctionals { fh, fhd, gh, w4t })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMoments {
    pub mass: f64,
    pub first: f64,
    pub second: f64,
    pub third: f64,
    pub fourth: f64,
}

/// Raw moments `int x^p g(x) dx`, `p = 0..=4`.
pub fn density_moments(density: &Density) -> Result<DensityMoments> {
    let fourth = |x: f64| x.powi(4) * density.pdf(x);
    let (lo, hi) = window(density, &[&fourth])?;
    let m = |p: i32| integrate(|x| x.powi(p) * density.pdf(x), lo, hi);
    Ok(DensityMoments { mass: m(0)?, first: m(1)?, second: m(2)?, third: m(3)?, fourth: m(4)? })
}

/// The entrywise map
///
/// `M~_ij = h(sqrt(n) M_ij) / sqrt(F n)` off the diagonal and
/// `M~_ii = sqrt(w2 / (F_d n)) h_d(sqrt(n / w2) M_ii)` on it.
#[derive(Debug, Clone)]
pub struct EntrywiseTransform {
    pub off: Density,
    pub diag: Density,
    pub functionals: DensityFunctionals,
    pub w2: f64,
}

impl EntrywiseTransform {
    pub fn new(off: Density, diag: Density, w2: f64) -> Result<Self> {
        if !(w2 > 0.0) || !w2.is_finite() {
            return Err(Error::domain(format!("w2 must be positive, got {w2}")));
        }
        let functionals = fisher_functionals(&off, &diag)?;
        Ok(EntrywiseTransform { off, diag, functionals, w2 })
    }

    /// With functionals already known (e.g. closed forms).
    pub fn with_functionals(off: Density, diag: Density, functionals: DensityFunctionals, w2: f64) -> Self {
        EntrywiseTransform { off, diag, functionals, w2 }
    }

    pub fn apply(&self, m: &DataMatrix) -> Result<DataMatrix> {
        let nf = m.n() as f64;
        let root_n = nf.sqrt();
        let off_scale = 1.0 / (self.functionals.fh * nf).sqrt();
        let diag_in = (nf / self.w2).sqrt();
        let diag_out = (self.w2 / (self.functionals.fhd * nf)).sqrt();
        let out =
            m.map_entries(|v| off_scale * self.off.score(root_n * v), |v| diag_out * self.diag.score(diag_in * v));
        if out.entries().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("score function overflowed during the entrywise transform"));
        }
        Ok(out)
    }
}

pub fn entrywise_transform(m: &DataMatrix, g: &Density, g_d: &Density, w2: f64) -> Result<DataMatrix> {
    EntrywiseTransform::new(g.clone(), g_d.clone(), w2)?.apply(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_wigner, trial_rng, NoiseSpec};
    use std::f64::consts::PI;

    #[test]
    fn gaussian_functionals() {
        let f = fisher_functionals(&Density::StandardGaussian, &Density::StandardGaussian).unwrap();
        assert!((f.fh - 1.0).abs() < 1e-8);
        assert!((f.fhd - 1.0).abs() < 1e-8);
        assert!((f.gh - 1.0).abs() < 1e-8);
        assert!((f.w4t - 3.0).abs() < 1e-8);
    }

    #[test]
    fn sech_functionals() {
        let f = fisher_functionals(&Density::Sech, &Density::Sech).unwrap();
        assert!((f.fh - PI * PI / 8.0).abs() < 1e-8);
        assert!((f.fhd - PI * PI / 8.0).abs() < 1e-8);
        assert!((f.gh - PI * PI / 16.0).abs() < 1e-8);
        assert!((f.w4t - 1.5).abs() < 1e-8);
    }

    #[test]
    fn scaled_gaussian_diagonal() {
        let f = fisher_functionals(&Density::StandardGaussian, &Density::Gaussian { std_dev: 2f64.sqrt() }).unwrap();
        assert!((f.fhd - 0.5).abs() < 1e-8);
    }

    #[test]
    fn finite_difference_scores_give_the_same_functionals() {
        let sech = Density::custom("sech-fd", |x: f64| 0.5 / (PI * x / 2.0).cosh());
        let f = fisher_functionals(&sech, &sech).unwrap();
        assert!((f.fh - PI * PI / 8.0).abs() < 1e-6);
        assert!((f.gh - PI * PI / 16.0).abs() < 1e-5);
        assert!((f.w4t - 1.5).abs() < 1e-6);
    }

    #[test]
    fn gaussian_transform_is_identity() {
        let m = sample_wigner(&NoiseSpec::gaussian_unit_diag(), 32, &mut trial_rng(3, 0)).unwrap();
        let t = entrywise_transform(&m, &Density::StandardGaussian, &Density::StandardGaussian, 1.0).unwrap();
        for (a, b) in m.entries().iter().zip(t.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
        // GOE diagonal is also untouched: unit-normalized diagonal law is standard Gaussian
        let m = sample_wigner(&NoiseSpec::goe(), 32, &mut trial_rng(3, 1)).unwrap();
        let t = entrywise_transform(&m, &Density::StandardGaussian, &Density::StandardGaussian, 2.0).unwrap();
        for (a, b) in m.entries().iter().zip(t.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sech_transform_is_tanh() {
        let n = 64;
        let m = sample_wigner(&NoiseSpec::sech(), n, &mut trial_rng(4, 0)).unwrap();
        let t = entrywise_transform(&m, &Density::Sech, &Density::Sech, 1.0).unwrap();
        let nf = n as f64;
        for i in 0..n {
            for j in 0..n {
                let want = (2.0 / nf).sqrt() * (PI * nf.sqrt() * m.get(i, j) / 2.0).tanh();
                assert!((t.get(i, j) - want).abs() < 1e-12);
            }
        }
        assert!(t.is_symmetric());
    }

    #[test]
    fn zero_matrix_maps_to_zero() {
        let z = DataMatrix::from_upper(5, |_, _| 0.0);
        let t = entrywise_transform(&z, &Density::Sech, &Density::Sech, 1.0).unwrap();
        assert!(t.entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transform_restores_unit_variance() {
        let n = 1024;
        let m = sample_wigner(&NoiseSpec::sech(), n, &mut trial_rng(6, 0)).unwrap();
        let t = entrywise_transform(&m, &Density::Sech, &Density::Sech, 1.0).unwrap();
        let (off, _, _) = crate::model::empirical_moments(&t);
        assert!((0.9..=1.1).contains(&off), "{off}");
    }

    #[test]
    fn moments_of_builtins() {
        let m = density_moments(&Density::Sech).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-9);
        assert!((m.second - 1.0).abs() < 1e-9);
        assert!((m.fourth - 5.0).abs() < 1e-8);
        assert!(m.first.abs() < 1e-12 && m.third.abs() < 1e-9);
    }
}
