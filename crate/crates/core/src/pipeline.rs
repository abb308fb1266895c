//! End-to-end estimation: codeword sweep and ranging on each reflecting
//! unit set, coplanar ML positioning, RIS to UE channel reconstruction and
//! reflection design.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    bs_element_channel, cascaded_channel, link_snr, optimal_theta, receive_pilots, received_snr, throughput,
    ue_element_channel, CascadeTerms, ChannelVector, LinkBudget, ReflectionCoefficients, SubbandGrid,
};
use crate::codebook::{argmax_energy, build_codebook, codeword_channels, sweep_channels, Codebook};
use crate::error::{Error, Result};
use crate::estimators::{
    bartlett_distance, genie_covariance, jmmse_distance, mmse_per_subband, mp_distance, tof_baseline, DistanceEstimate,
    JmmseFilter, Method, MpOptions, RangingContext, UePrior, TOF_SIGMA,
};
use crate::geometry::{anchor_point, rus_elements, RisLayout, RusSpec, Vec3};
use crate::localization::{cml_position, AnchorRectangle, DistanceVector, PositionEstimate};
use crate::par::trial_rng;

/// How the JMMSE covariance is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceModel {
    /// Rank-one covariance at the true UE.
    Oracle,
    /// Sample covariance over UE positions uniform in a cube around the true UE.
    Genie { side: f64, draws: usize },
}

impl Default for CovarianceModel {
    fn default() -> Self {
        CovarianceModel::Genie { side: 0.5, draws: 256 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs: Vec3,
    pub ue: Vec3,
    pub layout: RisLayout,
    pub rus: [RusSpec; 4],
    pub grid: SubbandGrid,
    pub budget: LinkBudget,
    pub estimator: Method,
    /// Distance error variance assumed by localization, m^2.
    pub distance_variance: f64,
    pub seed: u64,
    /// DFT oversampling `(O_1, O_2)`.
    pub oversampling: (usize, usize),
    /// Sweep the codebook on the first unit set only and reuse the winner.
    pub shared_codewords: bool,
    pub covariance: CovarianceModel,
    /// Centers of the delay search windows; the true distances when `None`.
    pub prior_distances: Option<[f64; 4]>,
    pub window_half_width: f64,
    pub mp: MpOptions,
}

impl ScenarioConfig {
    /// Default scenario: 64 x 128 surface, corner 4 x 4 unit sets, BS at (5, -5, 2), UE at (5, 0.32, 0.16).
    pub fn baseline() -> Self {
        Self {
            bs: Vec3::new(5.0, -5.0, 2.0),
            ue: Vec3::new(5.0, 0.32, 0.16),
            layout: RisLayout::baseline(),
            rus: RusSpec::corners(4, 4),
            grid: SubbandGrid::baseline(),
            budget: LinkBudget::baseline(),
            estimator: Method::Jmmse,
            distance_variance: 1e-6,
            seed: 0,
            oversampling: (1, 1),
            shared_codewords: false,
            covariance: CovarianceModel::default(),
            prior_distances: None,
            window_half_width: RangingContext::DEFAULT_HALF_WIDTH,
            mp: MpOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("bs", self.bs), ("ue", self.ue)] {
            if !(p.is_finite() && p.x > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in front of the surface (x > 0)"
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for rus in &self.rus {
            for n in rus_elements(&self.layout, rus)? {
                if !seen.insert(n) {
                    return Err(Error::InvalidInput(format!(
                        "reflecting unit sets overlap at element {n}"
                    )));
                }
            }
        }
        if !(self.distance_variance > 0.0) {
            return Err(Error::InvalidInput("distance variance must be positive".into()));
        }
        if !(self.window_half_width > 0.0) {
            return Err(Error::InvalidInput("search half width must be positive".into()));
        }
        if let CovarianceModel::Genie { side, draws } = self.covariance {
            if !(side >= 0.0) || draws == 0 {
                return Err(Error::InvalidInput(
                    "genie prior needs side >= 0 and at least one draw".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `|w - ŵ|^2 / |w|^2` with all-ones reflection at the carrier.
    pub nmse: f64,
    pub snr_estimated_db: f64,
    pub snr_optimal_db: f64,
    pub snr_random_db: f64,
    pub throughput_estimated: f64,
    pub throughput_optimal: f64,
    /// Per-axis squared position error, m^2.
    pub squared_error: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct EstimationReport {
    /// Selected 1-based codeword per unit set.
    pub codewords: [usize; 4],
    pub pilot_slots: usize,
    pub distances: Option<[DistanceEstimate; 4]>,
    pub position: Option<PositionEstimate>,
    pub g_hat: Option<ChannelVector>,
    pub theta_hat: Option<ReflectionCoefficients>,
    pub metrics: Option<Metrics>,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

/// Pilot receptions used for ranging.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub codewords: [usize; 4],
    pub receptions: Vec<ChannelVector>,
    pub pilot_slots: usize,
}

struct Prepared {
    filter: JmmseFilter,
    diagonal: Vec<f64>,
}

struct SurfaceLink {
    terms: CascadeTerms,
    h: Vec<Complex64>,
    g: Vec<Complex64>,
    optimal: ReflectionCoefficients,
}

/// A configuration with its geometry and noiseless channels precomputed.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub rect: AnchorRectangle,
    pub anchors: [Vec3; 4],
    pub bs_legs: [f64; 4],
    pub true_distances: [f64; 4],
    pub codebook: Codebook,
    positions: Vec<Vec<Vec3>>,
    channels: Vec<Vec<ChannelVector>>,
    prepared: Vec<OnceLock<std::result::Result<Prepared, String>>>,
    surface: OnceLock<std::result::Result<SurfaceLink, String>>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let layout = &config.layout;
        let mut anchors = [Vec3::ZERO; 4];
        let mut positions = Vec::with_capacity(4);
        for (m, rus) in config.rus.iter().enumerate() {
            anchors[m] = anchor_point(layout, rus)?;
            positions.push(
                rus_elements(layout, rus)?
                    .iter()
                    .map(|&n| layout.element_position(n))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let rect = AnchorRectangle::new(anchors)?;
        let (o1, o2) = config.oversampling;
        let first = &config.rus[0];
        if config
            .rus
            .iter()
            .any(|r| (r.n_rows, r.n_cols) != (first.n_rows, first.n_cols))
        {
            return Err(Error::InvalidInput("unit sets must share one shape".into()));
        }
        let codebook = build_codebook(first.n_rows, first.n_cols, o1, o2)?;
        let channels = positions
            .iter()
            .map(|pos| {
                let terms =
                    CascadeTerms::from_positions(config.bs, config.ue, pos, layout.element_area(), &config.budget)?;
                codeword_channels(&terms, &codebook, &config.grid)
            })
            .collect::<Result<Vec<_>>>()?;
        let bs_legs = anchors.map(|a| a.distance(config.bs));
        let true_distances = anchors.map(|a| a.distance(config.ue));
        let prepared = (0..4 * codebook.len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            rect,
            anchors,
            bs_legs,
            true_distances,
            codebook,
            positions,
            channels,
            prepared,
            surface: OnceLock::new(),
            config,
        })
    }

    pub fn grid(&self) -> &SubbandGrid {
        &self.config.grid
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.config.budget
    }

    /// Noiseless wideband channel of unit set `m` (0-based) under codeword `n` (1-based).
    pub fn codeword_channel(&self, m: usize, n: usize) -> &ChannelVector {
        &self.channels[m][n - 1]
    }

    /// Codeword each unit set would pick without noise.
    pub fn noiseless_codewords(&self) -> [usize; 4] {
        std::array::from_fn(|m| {
            argmax_energy(&self.channels[m].iter().map(ChannelVector::norm_sqr).collect::<Vec<_>>())
        })
    }

    /// Received pilot SNR `||S w||^2 / ||eta||^2` of each unit set with its
    /// noiseless best codeword, dB.
    pub fn rus_snr_db(&self) -> [f64; 4] {
        let best = self.noiseless_codewords();
        std::array::from_fn(|m| received_snr(self.codeword_channel(m, best[m]), self.grid(), self.budget()))
    }

    /// Pilot slots a sweep consumes.
    pub fn pilot_slots(&self) -> usize {
        if self.config.shared_codewords {
            self.codebook.len() + 4
        } else {
            4 * self.codebook.len()
        }
    }

    fn prepared(&self, m: usize, n: usize) -> Result<&Prepared> {
        let slot = &self.prepared[m * self.codebook.len() + (n - 1)];
        slot.get_or_init(|| self.prepare(m, n).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::InvalidInput(e.clone()))
    }

    fn prepare(&self, m: usize, n: usize) -> Result<Prepared> {
        let cfg = &self.config;
        let prior = match cfg.covariance {
            CovarianceModel::Oracle => UePrior::Oracle(cfg.ue),
            CovarianceModel::Genie { side, .. } => UePrior::Cube { center: cfg.ue, side },
        };
        let draws = match cfg.covariance {
            CovarianceModel::Oracle => 1,
            CovarianceModel::Genie { draws, .. } => draws,
        };
        // fixed per (unit set, codeword) so every trial sees the same covariance
        let mut rng = trial_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, m as u32, n as u32);
        let r = genie_covariance(
            cfg.bs,
            &prior,
            &self.positions[m],
            cfg.layout.element_area(),
            self.codebook.codeword(n)?,
            &cfg.grid,
            &cfg.budget,
            draws,
            &mut rng,
        )?;
        let filter = JmmseFilter::new(
            &r,
            cfg.budget.alpha,
            cfg.budget.subband_noise(&cfg.grid),
            cfg.budget.pilot(&cfg.grid).norm_sqr(),
        )?;
        Ok(Prepared {
            diagonal: r.diagonal(),
            filter,
        })
    }

    /// Codeword selection and the receptions used for ranging.
    pub fn sweep<R: Rng + ?Sized>(&self, rng: &mut R) -> SweepOutcome {
        let (grid, budget) = (self.grid(), self.budget());
        if self.config.shared_codewords {
            let n = sweep_channels(&self.channels[0], grid, budget, rng).index;
            let receptions = (0..4)
                .map(|m| receive_pilots(self.codeword_channel(m, n), grid, budget, rng))
                .collect();
            SweepOutcome {
                codewords: [n; 4],
                receptions,
                pilot_slots: self.pilot_slots(),
            }
        } else {
            let mut codewords = [0; 4];
            let mut receptions = Vec::with_capacity(4);
            for (m, chans) in self.channels.iter().enumerate() {
                let mut s = sweep_channels(chans, grid, budget, rng);
                codewords[m] = s.index;
                receptions.push(s.receptions.swap_remove(s.index - 1));
            }
            SweepOutcome {
                codewords,
                receptions,
                pilot_slots: self.pilot_slots(),
            }
        }
    }

    pub fn ranging_context(&self, m: usize) -> RangingContext {
        let prior = self.config.prior_distances.map_or(self.true_distances[m], |p| p[m]);
        RangingContext {
            bs_leg: self.bs_legs[m],
            prior_distance: prior,
            half_width: self.config.window_half_width,
        }
    }

    /// Distances to the four anchors with one estimator.
    pub fn range<R: Rng + ?Sized>(
        &self,
        sweep: &SweepOutcome,
        method: Method,
        rng: &mut R,
    ) -> Result<[DistanceEstimate; 4]> {
        let (grid, budget) = (self.grid(), self.budget());
        let pilot = budget.pilot(grid);
        let mut out = Vec::with_capacity(4);
        for m in 0..4 {
            let ctx = self.ranging_context(m);
            let r = &sweep.receptions[m];
            let n = sweep.codewords[m];
            let est = match method {
                Method::Mp => {
                    let mut opts = self.config.mp;
                    opts.noise_variance
                        .get_or_insert(budget.subband_noise(grid) / pilot.norm_sqr());
                    mp_distance(r, pilot, grid, self.codebook.n_rows * self.codebook.n_cols, &ctx, &opts)?
                }
                Method::Mmse => {
                    let prep = self.prepared(m, n)?;
                    let w = mmse_per_subband(r, pilot, &prep.diagonal, budget.subband_noise(grid))?;
                    bartlett_distance(&w, grid, &ctx)
                }
                Method::Jmmse => {
                    let w = self.prepared(m, n)?.filter.estimate(r, pilot)?;
                    jmmse_distance(&w, grid, &ctx)
                }
                Method::Tof => tof_baseline(self.true_distances[m], TOF_SIGMA, rng),
            };
            out.push(est);
        }
        Ok(out.try_into().expect("four unit sets"))
    }

    /// CML position from four distances.
    pub fn localize(&self, distances: [f64; 4]) -> Result<PositionEstimate> {
        let dv = DistanceVector::new(distances.to_vec(), self.config.distance_variance)
            .map_err(|e| Error::Localization(e.to_string()))?;
        cml_position(&dv, &self.rect)
    }

    fn surface(&self) -> Result<&SurfaceLink> {
        self.surface
            .get_or_init(|| self.build_surface().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::InvalidInput(e.clone()))
    }

    fn build_surface(&self) -> Result<SurfaceLink> {
        let cfg = &self.config;
        let lambda = cfg.grid.center_wavelength();
        let n = cfg.layout.len();
        let h = (1..=n)
            .map(|i| bs_element_channel(cfg.bs, &cfg.layout, i, lambda))
            .collect::<Result<Vec<_>>>()?;
        let g = (1..=n)
            .map(|i| ue_element_channel(cfg.ue, &cfg.layout, i, lambda))
            .collect::<Result<Vec<_>>>()?;
        let optimal = optimal_theta(&h, &g)?;
        let terms = CascadeTerms::from_positions(
            cfg.bs,
            cfg.ue,
            &cfg.layout.positions(),
            cfg.layout.element_area(),
            &cfg.budget,
        )?;
        Ok(SurfaceLink { terms, h, g, optimal })
    }

    /// Reconstructed RIS to UE channel at the carrier and the phase-only
    /// reflection it implies.
    pub fn reconstruct(&self, position: Vec3) -> Result<(ChannelVector, ReflectionCoefficients)> {
        let cfg = &self.config;
        let lambda = cfg.grid.center_wavelength();
        let g_hat = (1..=cfg.layout.len())
            .map(|i| ue_element_channel(position, &cfg.layout, i, lambda))
            .collect::<Result<Vec<_>>>()?;
        let theta = optimal_theta(&self.surface()?.h, &g_hat)?;
        Ok((ChannelVector(g_hat), theta))
    }

    /// Link SNR over the whole surface with reflection `theta`, dB.
    pub fn surface_snr_db(&self, theta: &ReflectionCoefficients) -> Result<f64> {
        let w = self.surface()?.terms.wideband(theta.as_slice(), self.grid())?;
        Ok(link_snr(&w, self.grid(), self.budget()))
    }

    /// SNR with perfect channel knowledge, dB.
    pub fn optimal_snr_db(&self) -> Result<f64> {
        let s = self.surface()?;
        self.surface_snr_db(&s.optimal)
    }

    /// `|w - ŵ|^2 / |w|^2` for the all-ones reflection at the carrier.
    pub fn nmse_sample(&self, g_hat: &[Complex64]) -> Result<f64> {
        let s = self.surface()?;
        let ones = ReflectionCoefficients::ones(s.h.len());
        let w = cascaded_channel(&s.h, &s.g, &ones, self.budget())?;
        let w_hat = cascaded_channel(&s.h, g_hat, &ones, self.budget())?;
        Ok((w - w_hat).norm_sqr() / w.norm_sqr())
    }

    /// The full estimation chain for one noise realization.
    pub fn run_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> EstimationReport {
        let sweep = self.sweep(rng);
        let mut report = EstimationReport {
            codewords: sweep.codewords,
            pilot_slots: sweep.pilot_slots,
            distances: None,
            position: None,
            g_hat: None,
            theta_hat: None,
            metrics: None,
            failure: None,
        };
        if let Err(e) = self.finish_trial(&sweep, &mut report, rng) {
            report.failure = Some(e.to_string());
        }
        report
    }

    fn finish_trial<R: Rng + ?Sized>(
        &self,
        sweep: &SweepOutcome,
        report: &mut EstimationReport,
        rng: &mut R,
    ) -> Result<()> {
        let distances = self.range(sweep, self.config.estimator, rng)?;
        report.distances = Some(distances.clone());
        let position = self.localize(distances.map(|d| d.distance))?;
        report.position = Some(position);
        let (g_hat, theta) = self.reconstruct(position.position)?;
        let random = ReflectionCoefficients::random_phase(self.config.layout.len(), rng);
        let snr_est = self.surface_snr_db(&theta)?;
        let snr_opt = self.optimal_snr_db()?;
        let err = position.position - self.config.ue;
        report.metrics = Some(Metrics {
            nmse: self.nmse_sample(&g_hat)?,
            snr_estimated_db: snr_est,
            snr_optimal_db: snr_opt,
            snr_random_db: self.surface_snr_db(&random)?,
            throughput_estimated: throughput(snr_est),
            throughput_optimal: throughput(snr_opt),
            squared_error: [err.x * err.x, err.y * err.y, err.z * err.z],
        });
        report.g_hat = Some(g_hat);
        report.theta_hat = Some(theta);
        Ok(())
    }
}

/// The full estimation chain on a fresh scenario, seeded from the configuration.
pub fn estimate_channel(config: ScenarioConfig) -> Result<EstimationReport> {
    let seed = config.seed;
    let scenario = Scenario::new(config)?;
    Ok(scenario.run_trial(&mut trial_rng(seed, 0, 0)))
}

/// Mean normalized error over trials, dB.
pub fn nmse(pairs: &[(Complex64, Complex64)]) -> f64 {
    let mean = pairs
        .iter()
        .map(|(w, e)| (w - e).norm_sqr() / w.norm_sqr())
        .sum::<f64>()
        / pairs.len() as f64;
    10.0 * mean.log10()
}

/// `MSE(x) + MSE(y) + MSE(z)` over position estimates.
pub fn sum_mse(estimates: &[Vec3], truth: Vec3) -> f64 {
    if estimates.is_empty() {
        return f64::NAN;
    }
    estimates.iter().map(|p| (*p - truth).norm_squared()).sum::<f64>() / estimates.len() as f64
}

/// Transmit power that puts the mean unit-set received SNR at `target_db`.
pub fn power_for_rus_snr(scenario: &Scenario, target_db: f64) -> f64 {
    let mean_linear = scenario.rus_snr_db().iter().map(|s| 10f64.powf(s / 10.0)).sum::<f64>() / 4.0;
    scenario.budget().total_power * 10f64.powf(target_db / 10.0) / mean_linear
}
