//! Seeded Monte-Carlo sweeps behind each figure, scenario files and CSV output.

mod config;
mod table;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

pub use config::{load_config, parse_config, KEYS};
pub use table::{parse_csv, read_csv, to_csv_string, write_csv, ResultRow, ResultTable, HEADER};

use crate::channel::{linear_to_db, throughput, ReflectionCoefficients};
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::geometry::Vec3;
use crate::localization::{position_crlb, trilateration_position, wls_position, DistanceVector};
use crate::oracle;
use crate::par::{map_indexed, trial_rng, Execution};
use crate::pipeline::{power_for_rus_snr, Scenario, ScenarioConfig};

pub const DEFAULT_TRIALS: usize = 1000;

// keeps the random-phase draws off the streams used by the pipeline
const RANDOM_PHASE_SALT: u64 = 0x5eed_0f7a_4d0e_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FigureId {
    DistRmse,
    LocRmse,
    MseVsSigma,
    NmseVsSigma,
    SnrVsX,
    ThroughputVsX,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::DistRmse,
        FigureId::LocRmse,
        FigureId::MseVsSigma,
        FigureId::NmseVsSigma,
        FigureId::SnrVsX,
        FigureId::ThroughputVsX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::DistRmse => "dist-rmse",
            FigureId::LocRmse => "loc-rmse",
            FigureId::MseVsSigma => "mse-vs-sigma",
            FigureId::NmseVsSigma => "nmse-vs-sigma",
            FigureId::SnrVsX => "snr-vs-x",
            FigureId::ThroughputVsX => "throughput-vs-x",
        }
    }

    /// What the sweep column holds.
    pub fn axis(self) -> &'static str {
        match self {
            FigureId::DistRmse | FigureId::LocRmse => "snr_db",
            FigureId::MseVsSigma | FigureId::NmseVsSigma => "sigma_d2_m2",
            FigureId::SnrVsX | FigureId::ThroughputVsX => "x_m",
        }
    }

    /// What the metric column holds.
    pub fn metric(self) -> &'static str {
        match self {
            FigureId::DistRmse | FigureId::LocRmse => "rmse_m",
            FigureId::MseVsSigma => "sum_mse_m2",
            FigureId::NmseVsSigma => "nmse_db",
            FigureId::SnrVsX => "snr_db",
            FigureId::ThroughputVsX => "bps_per_hz",
        }
    }

    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            FigureId::DistRmse | FigureId::LocRmse => (0..9).map(|i| -10.0 + 5.0 * i as f64).collect(),
            FigureId::MseVsSigma | FigureId::NmseVsSigma => [1e-8, 1e-7, 1e-6, 1e-5, 1e-4].to_vec(),
            FigureId::SnrVsX | FigureId::ThroughputVsX => (1..=10).map(f64::from).collect(),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = FigureId::ALL.iter().map(|f| f.name()).collect();
            Error::InvalidInput(format!("unknown figure `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub figure: FigureId,
    pub sweep: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(figure: FigureId) -> Self {
        Self {
            figure,
            sweep: figure.default_sweep(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.sweep.is_empty() || self.sweep.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sweep needs at least one finite value".into()));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("sweep values must be strictly increasing".into()));
        }
        let positive = matches!(
            self.figure,
            FigureId::MseVsSigma | FigureId::NmseVsSigma | FigureId::SnrVsX | FigureId::ThroughputVsX
        );
        if positive && self.sweep[0] <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "{} sweep values must be positive",
                self.figure.axis()
            )));
        }
        Ok(())
    }
}

/// Mean and standard error of the mean.
fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Collects per-trial samples for one table.
struct Collector {
    table: ResultTable,
    failures: Vec<String>,
}

impl Collector {
    fn new() -> Self {
        Self {
            table: ResultTable::default(),
            failures: Vec::new(),
        }
    }

    fn push(&mut self, sweep: f64, method: &str, metric: f64, trials: usize, stderr: f64) {
        self.table.rows.push(ResultRow {
            sweep,
            method: method.to_string(),
            metric,
            trials,
            stderr: finite_or_zero(stderr),
        });
    }

    fn count_failures(&mut self, sweep: f64, method: &str, samples: &[Option<f64>]) -> Vec<f64> {
        let ok: Vec<f64> = samples.iter().flatten().copied().collect();
        let failed = samples.len() - ok.len();
        if failed > 0 {
            self.failures.push(format!("{method}@{sweep:?}:{failed}"));
        }
        ok
    }

    /// `sqrt(mean)` of squared errors.
    fn rmse(&mut self, sweep: f64, method: &str, samples: &[Option<f64>]) {
        let ok = self.count_failures(sweep, method, samples);
        let (m, se) = mean_stderr(&ok);
        let r = m.sqrt();
        self.push(sweep, method, r, ok.len(), if r > 0.0 { se / (2.0 * r) } else { 0.0 });
    }

    fn mean(&mut self, sweep: f64, method: &str, samples: &[Option<f64>]) {
        let ok = self.count_failures(sweep, method, samples);
        let (m, se) = mean_stderr(&ok);
        self.push(sweep, method, m, ok.len(), se);
    }

    /// Mean of linear samples, reported in dB.
    fn mean_db(&mut self, sweep: f64, method: &str, samples: &[Option<f64>]) {
        let ok = self.count_failures(sweep, method, samples);
        let (m, se) = mean_stderr(&ok);
        self.push(
            sweep,
            method,
            linear_to_db(m),
            ok.len(),
            10.0 / std::f64::consts::LN_10 * se / m,
        );
    }

    fn finish(mut self, spec: &ExperimentSpec) -> ResultTable {
        let sweep: Vec<_> = spec.sweep.iter().map(|v| format!("{v:?}")).collect();
        let failures = if self.failures.is_empty() {
            "none".to_string()
        } else {
            self.failures.join(";")
        };
        self.table.metadata = Some(format!(
            "figure={} axis={} metric={} trials={} seed={} sweep={} failures={}",
            spec.figure,
            spec.figure.axis(),
            spec.figure.metric(),
            spec.trials,
            spec.seed,
            sweep.join(";"),
            failures
        ));
        self.table.sort();
        self.table
    }
}

/// Runs the sweep for one figure.
///
/// Trial `i` at sweep point `j` always draws from stream `(seed, j, i)`, so
/// the table does not depend on the execution mode.
pub fn run_experiment(spec: &ExperimentSpec, config: &ScenarioConfig, exec: Execution) -> Result<ResultTable> {
    spec.validate()?;
    let mut config = config.clone();
    config.seed = spec.seed;
    let mut out = Collector::new();
    match spec.figure {
        FigureId::DistRmse | FigureId::LocRmse => ranging(spec, &config, exec, &mut out)?,
        FigureId::MseVsSigma | FigureId::NmseVsSigma => distance_noise(spec, &config, exec, &mut out)?,
        FigureId::SnrVsX | FigureId::ThroughputVsX => along_x(spec, &config, exec, &mut out)?,
    }
    Ok(out.finish(spec))
}

/// RMSE of ranging or localization versus the unit-set received SNR,
/// realized by scaling the transmit power.
fn ranging(spec: &ExperimentSpec, config: &ScenarioConfig, exec: Execution, out: &mut Collector) -> Result<()> {
    let base = Scenario::new(config.clone())?;
    let localize = spec.figure == FigureId::LocRmse;
    for (j, &snr) in spec.sweep.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.budget = cfg.budget.with_total_power(power_for_rus_snr(&base, snr));
        let sc = Scenario::new(cfg)?;
        let trials = map_indexed(spec.trials, exec, |i| {
            let mut rng = trial_rng(spec.seed, j as u32, i as u32);
            let sweep = sc.sweep(&mut rng);
            Method::ALL.map(|method| {
                let d = sc.range(&sweep, method, &mut rng).ok()?;
                if localize {
                    let p = sc.localize(d.clone().map(|e| e.distance)).ok()?;
                    Some((p.position - sc.config.ue).norm_squared())
                } else {
                    Some(
                        d.iter()
                            .zip(sc.true_distances)
                            .map(|(e, t)| (e.distance - t).powi(2))
                            .sum::<f64>()
                            / 4.0,
                    )
                }
            })
        });
        for (k, method) in Method::ALL.iter().enumerate() {
            let samples: Vec<_> = trials.iter().map(|t| t[k]).collect();
            out.rmse(snr, method.tag(), &samples);
        }
    }
    Ok(())
}

const LOCATORS: [&str; 3] = ["CML", "WLS", "Trilateration"];

/// Localization (and channel reconstruction) from true distances plus
/// Gaussian error of variance `sigma_d^2`.
fn distance_noise(spec: &ExperimentSpec, config: &ScenarioConfig, exec: Execution, out: &mut Collector) -> Result<()> {
    let sc = Scenario::new(config.clone())?;
    let ue = config.ue;
    let nmse = spec.figure == FigureId::NmseVsSigma;
    for (j, &var) in spec.sweep.iter().enumerate() {
        let sigma = var.sqrt();
        let trials = map_indexed(spec.trials, exec, |i| {
            let mut rng = trial_rng(spec.seed, j as u32, i as u32);
            let noisy: Vec<f64> = sc
                .true_distances
                .iter()
                .map(|d| d + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let dv = DistanceVector::new(noisy.clone(), var).ok();
            let estimates = [
                sc.localize(noisy.clone().try_into().expect("four distances")).ok(),
                dv.as_ref().and_then(|dv| wls_position(dv, &sc.rect, None).ok()),
                dv.as_ref().and_then(|dv| trilateration_position(dv, &sc.rect).ok()),
            ];
            estimates.map(|e| {
                let p = e?.position;
                if nmse {
                    let (g_hat, _) = sc.reconstruct(p).ok()?;
                    sc.nmse_sample(&g_hat.0).ok()
                } else {
                    Some((p - ue).norm_squared())
                }
            })
        });
        for (k, name) in LOCATORS.iter().enumerate() {
            let samples: Vec<_> = trials.iter().map(|t| t[k]).collect();
            if nmse {
                out.mean_db(var, name, &samples);
            } else {
                out.mean(var, name, &samples);
            }
        }
        if !nmse {
            let bound = position_crlb(ue, &sc.rect, var)?;
            out.push(var, "CRLB", bound.sum, 0, 0.0);
        }
    }
    Ok(())
}

/// Received SNR or throughput with the UE on the line through its
/// configured `(y, z)` perpendicular to the surface.
fn along_x(spec: &ExperimentSpec, config: &ScenarioConfig, exec: Execution, out: &mut Collector) -> Result<()> {
    let snr = spec.figure == FigureId::SnrVsX;
    for (j, &x) in spec.sweep.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.ue = Vec3::new(x, config.ue.y, config.ue.z);
        let sc = Scenario::new(cfg)?;
        let optimal = sc.optimal_snr_db()?;
        let n = sc.config.layout.len();
        let trials = map_indexed(spec.trials, exec, |i| {
            let mut rng = trial_rng(spec.seed, j as u32, i as u32);
            let proposed = sc.run_trial(&mut rng).metrics.map(|m| m.snr_estimated_db);
            let mut rng = trial_rng(spec.seed ^ RANDOM_PHASE_SALT, j as u32, i as u32);
            let random = sc
                .surface_snr_db(&ReflectionCoefficients::random_phase(n, &mut rng))
                .ok();
            (proposed, random)
        });
        let proposed: Vec<_> = trials.iter().map(|t| t.0).collect();
        let random: Vec<_> = trials.iter().map(|t| t.1.map(crate::channel::db_to_linear)).collect();
        if snr {
            out.push(x, "Optimal", optimal, spec.trials, 0.0);
            let lin: Vec<_> = proposed.iter().map(|p| p.map(crate::channel::db_to_linear)).collect();
            out.mean_db(x, "Proposed", &lin);
            out.mean_db(x, "Random", &random);
        } else {
            out.push(x, "Optimal", throughput(optimal), spec.trials, 0.0);
            let rates: Vec<_> = proposed.iter().map(|p| p.map(throughput)).collect();
            out.mean(x, "Proposed", &rates);
            // rate at the mean random-phase SNR
            let ok = out.count_failures(x, "Random", &random);
            let (m, se) = mean_stderr(&ok);
            out.push(
                x,
                "Random",
                (1.0 + m).log2(),
                ok.len(),
                se / ((1.0 + m) * std::f64::consts::LN_2),
            );
        }
    }
    Ok(())
}

pub const ORACLES: [&str; 4] = ["cml", "fim", "crlb", "array-gain"];

/// Reference values from the independent oracles, as printable text.
pub fn oracle_report(name: &str) -> Result<String> {
    use crate::localization::{cml_position, fim, AnchorRectangle};
    let rect = AnchorRectangle::new([
        Vec3::new(0.0, 0.0075, 0.0075),
        Vec3::new(0.0, 0.6275, 0.0075),
        Vec3::new(0.0, 0.6275, 0.3075),
        Vec3::new(0.0, 0.0075, 0.3075),
    ])?;
    let p = Vec3::new(5.0, 0.32, 0.16);
    let var = 1e-6;
    let lines = match name {
        "cml" => {
            let d = rect.distances(p).map(|d| d + 1e-3);
            let fit = oracle::brute_force_cml(d, rect.corners())?;
            let closed = cml_position(&DistanceVector::new(d.to_vec(), var)?, &rect)?;
            vec![
                format!("measured distances  {d:?}"),
                format!("brute-force position {:?}", fit.position.to_array()),
                format!("brute-force distances {:?}", fit.distances),
                format!("brute-force objective {:?}", fit.objective),
                format!("closed-form position {:?}", closed.position.to_array()),
                format!("closed-form distances {:?}", closed.distances),
            ]
        }
        "fim" => {
            let fd = oracle::finite_difference_fim(p, &rect.corners(), var, 1e-4);
            let closed = fim(p, &rect.corners(), var)?;
            vec![
                format!("finite-difference FIM {:?}", fd.as_slice()),
                format!("closed-form FIM       {:?}", closed.as_slice()),
            ]
        }
        "crlb" => {
            let psi = fim(p, &rect.corners(), var)?;
            let inv = oracle::cofactor_inverse(&psi).ok_or_else(|| Error::InvalidInput("FIM is singular".into()))?;
            vec![
                format!("cofactor CRLB trace {:?}", inv.trace()),
                format!("closed-form CRLB sum {:?}", position_crlb(p, &rect, var)?.sum),
            ]
        }
        "array-gain" => {
            let n = 8192;
            let (coherent, random, db) = oracle::array_gain(n, 1000, 1);
            vec![
                format!("elements {n}"),
                format!("coherent power {coherent:?}"),
                format!("mean random-phase power {random:?}"),
                format!("gain {db:?} dB (10 log10 N = {:?})", linear_to_db(n as f64)),
            ]
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown oracle `{other}`, expected one of {}",
                ORACLES.join(", ")
            )))
        }
    };
    Ok(lines.join("\n"))
}
