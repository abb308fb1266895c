use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DistanceEstimate, Method, RangingContext};
use crate::channel::{SubbandGrid, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Tuning of the total-least-squares matrix pencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpOptions {
    /// Pencil parameter; `None` means `floor(K / 2)`.
    pub pencil: Option<usize>,
    /// Singular values below `noise_factor * median` are treated as noise.
    pub noise_factor: f64,
    /// Singular values below `rel_floor * max` are dropped.
    pub rel_floor: f64,
    /// Per-sample noise variance when known. Replaces the median rule with
    /// `edge_margin` times the largest singular value expected from noise
    /// alone, `sigma (sqrt(K - L) + sqrt(L + 1))`.
    pub noise_variance: Option<f64>,
    pub edge_margin: f64,
}

impl Default for MpOptions {
    fn default() -> Self {
        Self {
            pencil: None,
            noise_factor: 3.0,
            rel_floor: 0.1,
            noise_variance: None,
            edge_margin: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilMode {
    /// Per-sample ratio of the mode, `exp(-j 2 pi f_d d / c)` for path `d`.
    pub z: Complex64,
    pub singular_value: f64,
}

impl PencilMode {
    /// Path length of the mode, unwrapped to the alias interval nearest
    /// `prior_path`.
    pub fn path_length(&self, subband_width: f64, prior_path: f64) -> f64 {
        let period = SPEED_OF_LIGHT / subband_width;
        let raw = -self.z.arg() * SPEED_OF_LIGHT / (2.0 * PI * subband_width);
        raw + ((prior_path - raw) / period).round() * period
    }
}

/// Estimates the modes of `samples[k] = sum_i c_i z_i^k`.
///
/// At most `max_modes` modes are kept; fewer when the Hankel spectrum drops
/// into the noise floor.
pub fn matrix_pencil(samples: &[Complex64], max_modes: usize, opts: &MpOptions) -> Result<Vec<PencilMode>> {
    let k = samples.len();
    if k < 3 {
        return Err(Error::InvalidInput(format!(
            "matrix pencil needs at least 3 samples, got {k}"
        )));
    }
    if max_modes == 0 {
        return Err(Error::InvalidInput("matrix pencil needs at least one mode".into()));
    }
    let l = opts.pencil.unwrap_or(k / 2);
    if l < 1 || l >= k - 1 {
        return Err(Error::InvalidInput(format!(
            "pencil parameter {l} out of range for {k} samples"
        )));
    }
    let hankel = DMatrix::from_fn(k - l, l + 1, |i, j| samples[i + j]);
    let vt = hankel.clone().svd(false, true).v_t.ok_or(Error::RankCollapse)?;
    // nalgebra may sort the singular values without permuting v_t, so rank
    // the right singular vectors by their measured gain
    let mut ranked: Vec<(f64, usize)> = (0..vt.nrows())
        .map(|i| ((&hankel * vt.row(i).adjoint()).norm(), i))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sv: Vec<f64> = ranked.iter().map(|r| r.0).collect();
    let smax = sv[0];
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::RankCollapse);
    }
    let mut sorted = sv.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let noise_floor = match opts.noise_variance {
        Some(v) => opts.edge_margin * v.sqrt() * (((k - l) as f64).sqrt() + ((l + 1) as f64).sqrt()),
        None => opts.noise_factor * median,
    };
    let threshold = noise_floor.max(opts.rel_floor * smax).max(1e-12 * smax);
    let cap = max_modes.min(l);
    let r = sv.iter().take_while(|&&s| s >= threshold).count().clamp(1, cap);

    let w = DMatrix::from_fn(r, l + 1, |i, j| vt[(ranked[i].1, j)]);
    let w1 = w.columns(0, l);
    let w2 = w.columns(1, l);
    let g = w1 * w1.adjoint();
    let p = w2 * w1.adjoint();
    let m = g.lu().solve(&p).ok_or(Error::RankCollapse)?;
    let eig = m
        .eigenvalues()
        .or_else(|| m.clone().schur().eigenvalues())
        .ok_or(Error::RankCollapse)?;
    let modes = eig
        .iter()
        .zip(&sv)
        .map(|(&z, &s)| PencilMode { z, singular_value: s })
        .collect();
    Ok(modes)
}

/// Matrix-pencil ranging: modes of the pilot-normalized samples, mean path
/// length of the retained modes, minus the BS leg.
pub fn mp_distance(
    received: &[Complex64],
    pilot: Complex64,
    grid: &SubbandGrid,
    max_modes: usize,
    ctx: &RangingContext,
    opts: &MpOptions,
) -> Result<DistanceEstimate> {
    if received.len() != grid.count {
        return Err(Error::LengthMismatch {
            expected: grid.count,
            found: received.len(),
        });
    }
    let samples: Vec<Complex64> = received.iter().map(|r| r / pilot).collect();
    let modes = matrix_pencil(&samples, max_modes, opts)?;
    let prior = ctx.prior_path();
    let mean = modes
        .iter()
        .map(|m| m.path_length(grid.subband_width, prior))
        .sum::<f64>()
        / modes.len() as f64;
    Ok(DistanceEstimate {
        distance: mean - ctx.bs_leg,
        method: Method::Mp,
        delay: None,
        flagged: false,
    })
}
