use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::SubbandGrid;

/// Coarse grid size of the delay search.
pub const COARSE_POINTS: usize = 2048;
/// Golden-section stopping width, seconds.
pub const REFINE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl DelayWindow {
    /// `center +/- half_width`, narrowed to stay strictly inside one alias
    /// period `1 / f_d`.
    pub fn around(center: f64, half_width: f64, grid: &SubbandGrid) -> Self {
        let half = half_width.min(0.5 * grid.alias_period() * (1.0 - 1.0 / COARSE_POINTS as f64));
        Self {
            t_min: center - half,
            t_max: center + half,
        }
    }

    pub fn width(&self) -> f64 {
        self.t_max - self.t_min
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    pub delay: f64,
    pub peak: f64,
    pub window: DelayWindow,
    pub step: f64,
    pub on_boundary: bool,
}

/// `|w^T b(t)|^2` with `b(t)_k = exp(j 2 pi f_k t)`.
pub fn delay_spectrum(estimate: &[Complex64], grid: &SubbandGrid, t: f64) -> f64 {
    // exp(j 2 pi f_1 t) is a common unit-modulus factor
    let z = Complex64::from_polar(1.0, 2.0 * PI * grid.subband_width * t);
    estimate
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &w| acc * z + w)
        .norm_sqr()
}

/// Coarse grid over the window followed by golden-section refinement
/// around the best grid point.
pub fn search_peak(estimate: &[Complex64], grid: &SubbandGrid, window: DelayWindow) -> DelayEstimate {
    let n = COARSE_POINTS;
    let step = window.width() / (n - 1) as f64;
    let at = |i: usize| window.t_min + i as f64 * step;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n {
        let p = delay_spectrum(estimate, grid, at(i));
        if p > best.1 {
            best = (i, p);
        }
    }
    let (i0, p0) = best;
    let on_boundary = i0 == 0 || i0 == n - 1;

    let mut lo = at(i0.saturating_sub(1));
    let mut hi = at((i0 + 1).min(n - 1));
    let f = |t: f64| delay_spectrum(estimate, grid, t);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > REFINE_TOLERANCE {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    let (mut delay, mut peak) = if fa >= fb { (a, fa) } else { (b, fb) };
    if p0 > peak {
        delay = at(i0);
        peak = p0;
    }
    DelayEstimate {
        delay,
        peak,
        window,
        step,
        on_boundary,
    }
}
