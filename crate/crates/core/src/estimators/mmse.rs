use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{CascadeTerms, ChannelVector, LinkBudget, SubbandGrid};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Frequency-domain channel covariance `E[w w^H]` (K x K, Hermitian PSD).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<Complex64>);

impl CovarianceMatrix {
    const HERMITIAN_TOL: f64 = 1e-10;
    const PSD_TOL: f64 = 1e-10;

    /// Validates Hermitian symmetry and positive semidefiniteness relative to
    /// the trace.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("covariance must be square".into()));
        }
        let scale = m
            .diagonal()
            .iter()
            .map(|c| c.re.abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > Self::HERMITIAN_TOL * scale {
                    return Err(Error::InvalidInput(format!("covariance not Hermitian at ({i}, {j})")));
                }
            }
        }
        let eig = m.clone().symmetric_eigenvalues();
        if let Some(min) = eig.iter().copied().reduce(f64::min) {
            if min < -Self::PSD_TOL * scale {
                return Err(Error::InvalidInput(format!("covariance has eigenvalue {min:e}")));
            }
        }
        Ok(Self(m))
    }

    /// Rank-one `w w^H`.
    pub fn outer(w: &[Complex64]) -> Self {
        let v = DVector::from_column_slice(w);
        Self(&v * v.adjoint())
    }

    pub fn identity(k: usize) -> Self {
        Self(DMatrix::identity(k, k))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    }
}

/// Scalar per-sub-band MMSE, `R_k s^* (|s|^2 R_k + noise)^-1 r_k`.
pub fn mmse_per_subband(
    received: &[Complex64],
    pilot: Complex64,
    prior_variance: &[f64],
    noise: f64,
) -> Result<ChannelVector> {
    if prior_variance.len() != received.len() {
        return Err(Error::LengthMismatch {
            expected: received.len(),
            found: prior_variance.len(),
        });
    }
    let sp = pilot.norm_sqr();
    Ok(received
        .iter()
        .zip(prior_variance)
        .map(|(r, &rk)| {
            let den = sp * rk + noise;
            if rk <= 0.0 || den == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                r * pilot.conj() * (rk / den)
            }
        })
        .collect::<Vec<_>>()
        .into())
}

/// Per-sub-band MSE of the scalar MMSE estimate.
pub fn mmse_mse(prior_variance: f64, pilot_power: f64, noise: f64) -> f64 {
    let den = pilot_power * prior_variance + noise;
    if den == 0.0 {
        0.0
    } else {
        prior_variance * noise / den
    }
}

/// Joint MMSE filter `R (R + mu I)^-1` with `mu = alpha * noise / pilot_power`,
/// factored once for repeated use.
#[derive(Debug, Clone)]
pub struct JmmseFilter {
    covariance: DMatrix<Complex64>,
    factor: Cholesky<Complex64, Dyn>,
    pub loading: f64,
}

impl JmmseFilter {
    pub fn new(r: &CovarianceMatrix, alpha: f64, noise: f64, pilot_power: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput("regularization alpha must be positive".into()));
        }
        if !(pilot_power > 0.0) {
            return Err(Error::InvalidInput("pilot power must be positive".into()));
        }
        let k = r.dim();
        let mut loading = alpha * noise / pilot_power;
        // noiseless links: smallest loading that keeps the factorization
        // defined, so the filter tends to the projection onto range(R)
        let floor = 1e-12 * r.trace().max(f64::MIN_POSITIVE) / k as f64;
        if loading < floor {
            loading = floor;
        }
        let loaded = r.matrix() + DMatrix::identity(k, k) * Complex64::new(loading, 0.0);
        let factor = Cholesky::new(loaded)
            .ok_or_else(|| Error::InvalidInput("loaded covariance is not positive definite".into()))?;
        Ok(Self {
            covariance: r.matrix().clone(),
            factor,
            loading,
        })
    }

    /// Applies the filter to the pilot-normalized observation `S^-1 r`.
    pub fn apply(&self, normalized: &[Complex64]) -> Result<ChannelVector> {
        if normalized.len() != self.covariance.nrows() {
            return Err(Error::LengthMismatch {
                expected: self.covariance.nrows(),
                found: normalized.len(),
            });
        }
        let x = self.factor.solve(&DVector::from_column_slice(normalized));
        Ok(ChannelVector((&self.covariance * x).iter().copied().collect()))
    }

    /// Filters raw pilots received with a constant pilot symbol.
    pub fn estimate(&self, received: &[Complex64], pilot: Complex64) -> Result<ChannelVector> {
        let normalized: Vec<Complex64> = received.iter().map(|r| r / pilot).collect();
        self.apply(&normalized)
    }
}

/// `R (R + alpha noise / |s|^2 I)^-1 S^-1 r` for a constant pilot `s`.
pub fn jmmse_estimate(
    received: &[Complex64],
    pilot: Complex64,
    r: &CovarianceMatrix,
    noise: f64,
    alpha: f64,
) -> Result<ChannelVector> {
    JmmseFilter::new(r, alpha, noise, pilot.norm_sqr())?.estimate(received, pilot)
}

/// Where the UE is believed to be when forming the channel covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UePrior {
    /// The true position; yields a rank-one covariance.
    Oracle(Vec3),
    /// Uniform over an axis-aligned cube.
    Cube { center: Vec3, side: f64 },
}

impl UePrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match *self {
            UePrior::Oracle(p) => p,
            UePrior::Cube { center, side } => {
                let h = 0.5 * side;
                let mut u = || if h > 0.0 { rng.random_range(-h..h) } else { 0.0 };
                center + Vec3::new(u(), u(), u())
            }
        }
    }

    /// Reflection of `p` through the prior center, for antithetic draws.
    pub fn mirror(&self, p: Vec3) -> Option<Vec3> {
        match *self {
            UePrior::Oracle(_) => None,
            UePrior::Cube { center, .. } => Some(center * 2.0 - p),
        }
    }
}

/// Sample covariance of the wideband channel through `elements` with
/// coefficients `theta`, over UE positions drawn from `prior`.
///
/// Draws come in pairs mirrored through the prior center, so the sample
/// has no first-order offset from the center.
#[allow(clippy::too_many_arguments)]
pub fn genie_covariance<R: Rng + ?Sized>(
    bs: Vec3,
    prior: &UePrior,
    positions: &[Vec3],
    element_area: f64,
    theta: &[Complex64],
    grid: &SubbandGrid,
    budget: &LinkBudget,
    draws: usize,
    rng: &mut R,
) -> Result<CovarianceMatrix> {
    if draws == 0 {
        return Err(Error::InvalidInput("covariance needs at least one draw".into()));
    }
    let draws = if matches!(prior, UePrior::Oracle(_)) { 1 } else { draws };
    let k = grid.count;
    let mut acc = DMatrix::<Complex64>::zeros(k, k);
    let mut pending = None;
    for _ in 0..draws {
        let ue = match pending.take() {
            Some(p) => p,
            None => {
                let p = prior.sample(rng);
                pending = prior.mirror(p);
                p
            }
        };
        let w = CascadeTerms::from_positions(bs, ue, positions, element_area, budget)?.wideband(theta, grid)?;
        let v = DVector::from_column_slice(&w);
        acc.ger(Complex64::new(1.0, 0.0), &v, &v.conjugate(), Complex64::new(1.0, 0.0));
    }
    acc /= Complex64::new(draws as f64, 0.0);
    // exact Hermitian symmetry against rounding in the accumulation
    let sym = (&acc + acc.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(CovarianceMatrix(sym))
}
