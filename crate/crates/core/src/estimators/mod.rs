//! Unit-set to UE distance estimation from wideband pilot receptions.
//!
//! Every estimator returns a [`DistanceEstimate`]: the total BS -> unit set
//! -> UE path is estimated from the phase progression across sub-bands and
//! the known BS leg is subtracted.

mod mmse;
mod pencil;
mod spectrum;

pub use mmse::{genie_covariance, jmmse_estimate, mmse_mse, mmse_per_subband, CovarianceMatrix, JmmseFilter, UePrior};
pub use pencil::{matrix_pencil, mp_distance, MpOptions, PencilMode};
pub use spectrum::{delay_spectrum, search_peak, DelayEstimate, DelayWindow, COARSE_POINTS, REFINE_TOLERANCE};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{SubbandGrid, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mp,
    Mmse,
    Jmmse,
    Tof,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mp, Method::Mmse, Method::Jmmse, Method::Tof];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Mp => "MP",
            Method::Mmse => "MMSE",
            Method::Jmmse => "JMMSE",
            Method::Tof => "ToF",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    /// Unit set to UE distance in meters.
    pub distance: f64,
    pub method: Method,
    /// Spectrum search details for the Bartlett-type estimators.
    pub delay: Option<DelayEstimate>,
    /// Set when the spectrum peak sits on the search window boundary.
    pub flagged: bool,
}

/// What is known about one unit set's geometry when ranging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangingContext {
    /// Distance from the BS to the unit-set anchor, `d_bs,m`.
    pub bs_leg: f64,
    /// Coarse prior for the unit set to UE distance.
    pub prior_distance: f64,
    /// Half width of the delay search window, in meters of path length.
    pub half_width: f64,
}

impl RangingContext {
    pub const DEFAULT_HALF_WIDTH: f64 = 5.0;

    pub fn new(bs_leg: f64, prior_distance: f64) -> Self {
        Self {
            bs_leg,
            prior_distance,
            half_width: Self::DEFAULT_HALF_WIDTH,
        }
    }

    /// BS leg delay `t_bs,m`.
    pub fn bs_delay(&self) -> f64 {
        self.bs_leg / SPEED_OF_LIGHT
    }

    /// Prior total path length.
    pub fn prior_path(&self) -> f64 {
        self.bs_leg + self.prior_distance
    }

    pub fn window(&self, grid: &SubbandGrid) -> DelayWindow {
        DelayWindow::around(
            self.prior_path() / SPEED_OF_LIGHT,
            self.half_width / SPEED_OF_LIGHT,
            grid,
        )
    }

    fn to_distance(self, delay: f64) -> f64 {
        SPEED_OF_LIGHT * (delay - self.bs_delay())
    }
}

fn spectrum_distance(
    estimate: &[num_complex::Complex64],
    grid: &SubbandGrid,
    ctx: &RangingContext,
    method: Method,
) -> DistanceEstimate {
    let delay = search_peak(estimate, grid, ctx.window(grid));
    DistanceEstimate {
        distance: ctx.to_distance(delay.delay),
        method,
        flagged: delay.on_boundary,
        delay: Some(delay),
    }
}

/// Bartlett peak search on a per-sub-band channel estimate.
pub fn bartlett_distance(
    estimate: &[num_complex::Complex64],
    grid: &SubbandGrid,
    ctx: &RangingContext,
) -> DistanceEstimate {
    spectrum_distance(estimate, grid, ctx, Method::Mmse)
}

/// Peak search on a jointly estimated wideband channel.
pub fn jmmse_distance(
    estimate: &[num_complex::Complex64],
    grid: &SubbandGrid,
    ctx: &RangingContext,
) -> DistanceEstimate {
    spectrum_distance(estimate, grid, ctx, Method::Jmmse)
}

/// Timing error standard deviation of the time-of-flight baseline, seconds.
pub const TOF_SIGMA: f64 = 1e-9;

/// `d + c * eps` with `eps ~ N(0, sigma^2)`.
pub fn tof_baseline<R: Rng + ?Sized>(true_distance: f64, sigma: f64, rng: &mut R) -> DistanceEstimate {
    let eps: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
    DistanceEstimate {
        distance: true_distance + SPEED_OF_LIGHT * eps,
        method: Method::Tof,
        delay: None,
        flagged: false,
    }
}
