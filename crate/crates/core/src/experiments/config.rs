//! Flat `key = value` scenario files. Missing keys keep their baseline
//! defaults; values may carry the unit named by the key.

use std::collections::HashMap;
use std::path::Path;

use crate::channel::{LinkBudget, SubbandGrid};
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::geometry::{RisLayout, RusSpec, Vec3};
use crate::pipeline::{CovarianceModel, ScenarioConfig};

/// Every key the parser understands.
pub const KEYS: &[&str] = &[
    "N_v",
    "N_h",
    "D_v_m",
    "D_h_m",
    "F_c_hz",
    "f_d_hz",
    "K",
    "P_t_dbm",
    "noise_psd_dbm_hz",
    "alpha",
    "G_u_dbi",
    "G_t_dbi",
    "G_r_dbi",
    "bs",
    "ue",
    "N_rus_v",
    "N_rus_h",
    "O_1",
    "O_2",
    "sigma_d2",
    "seed",
    "estimator",
    "shared_codewords",
    "covariance",
    "genie_side_m",
    "genie_draws",
    "window_half_width_m",
];

#[derive(Clone, Copy)]
enum Unit {
    Meter,
    Hertz,
    Dbm,
    Dbi,
    DbmPerHz,
    SquareMeter,
    Plain,
}

impl Unit {
    fn scale(self, suffix: &str) -> Option<f64> {
        let s = suffix.to_ascii_lowercase();
        let s = s.as_str();
        match (self, s) {
            (_, "") => Some(1.0),
            (Unit::Meter, "m") => Some(1.0),
            (Unit::Meter, "cm") => Some(1e-2),
            (Unit::Meter, "mm") => Some(1e-3),
            (Unit::Hertz, "hz") => Some(1.0),
            (Unit::Hertz, "khz") => Some(1e3),
            (Unit::Hertz, "mhz") => Some(1e6),
            (Unit::Hertz, "ghz") => Some(1e9),
            (Unit::Dbm, "dbm") => Some(1.0),
            (Unit::Dbi, "dbi") => Some(1.0),
            (Unit::DbmPerHz, "dbm/hz") => Some(1.0),
            (Unit::SquareMeter, "m2" | "m^2") => Some(1.0),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Unit::Meter => "m, cm or mm",
            Unit::Hertz => "Hz, kHz, MHz or GHz",
            Unit::Dbm => "dBm",
            Unit::Dbi => "dBi",
            Unit::DbmPerHz => "dBm/Hz",
            Unit::SquareMeter => "m^2",
            Unit::Plain => "no unit",
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn quantity(key: &str, raw: &str, unit: Unit) -> Result<f64> {
    let raw = raw.trim();
    // longest numeric prefix, then a unit suffix
    let split = (1..=raw.len())
        .rev()
        .filter(|&i| raw.is_char_boundary(i))
        .find(|&i| raw[..i].trim().parse::<f64>().is_ok())
        .ok_or_else(|| config_error(key, format!("`{raw}` is not a number")))?;
    let value: f64 = raw[..split].trim().parse().expect("checked above");
    let suffix = raw[split..].trim();
    let scale = unit
        .scale(suffix)
        .ok_or_else(|| config_error(key, format!("unknown unit `{suffix}`, expected {}", unit.name())))?;
    let v = value * scale;
    if !v.is_finite() {
        return Err(config_error(key, "value must be finite"));
    }
    Ok(v)
}

fn integer<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| config_error(key, format!("`{}` is not a non-negative integer", raw.trim())))
}

fn point(key: &str, raw: &str) -> Result<Vec3> {
    let parts: Vec<_> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(config_error(key, "expected an x,y,z triple"));
    }
    Ok(Vec3::new(
        quantity(key, parts[0], Unit::Meter)?,
        quantity(key, parts[1], Unit::Meter)?,
        quantity(key, parts[2], Unit::Meter)?,
    ))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(config_error(key, format!("`{other}` is not a boolean"))),
    }
}

fn method(key: &str, raw: &str) -> Result<Method> {
    Method::ALL
        .into_iter()
        .find(|m| m.tag().eq_ignore_ascii_case(raw.trim()))
        .ok_or_else(|| {
            config_error(
                key,
                format!("unknown estimator `{}`, expected mp, mmse, jmmse or tof", raw.trim()),
            )
        })
}

/// Splits the text into `key -> value`, rejecting unknown and repeated keys.
fn entries(text: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_error(line, "expected `key = value`"));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(config_error(key, "unknown key"));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(config_error(key, "given more than once"));
        }
    }
    Ok(out)
}

/// Builds a scenario from config text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let kv = entries(text)?;
    let get = |k: &str| kv.get(k).map(String::as_str);
    let q = |k: &str, unit: Unit, default: f64| get(k).map_or(Ok(default), |v| quantity(k, v, unit));
    let n = |k: &str, default: usize| get(k).map_or(Ok(default), |v| integer::<usize>(k, v));

    let mut cfg = ScenarioConfig::baseline();
    let base_layout = &cfg.layout;
    let d_v = q("D_v_m", Unit::Meter, base_layout.row_spacing)?;
    let d_h = q("D_h_m", Unit::Meter, d_v)?;
    cfg.layout = RisLayout::new(n("N_v", base_layout.n_rows)?, n("N_h", base_layout.n_cols)?, d_v, d_h)
        .map_err(|e| config_error("N_v", e.to_string()))?;
    let base_rus = &cfg.rus[0];
    cfg.rus = RusSpec::corners(n("N_rus_v", base_rus.n_rows)?, n("N_rus_h", base_rus.n_cols)?);

    let g = cfg.grid;
    cfg.grid = SubbandGrid::new(
        q("F_c_hz", Unit::Hertz, g.center_frequency)?,
        q("f_d_hz", Unit::Hertz, g.subband_width)?,
        n("K", g.count)?,
    )
    .map_err(|e| config_error("K", e.to_string()))?;

    cfg.budget = LinkBudget::from_db(
        q("G_t_dbi", Unit::Dbi, 21.0)?,
        q("G_r_dbi", Unit::Dbi, 21.0)?,
        q("G_u_dbi", Unit::Dbi, 9.03)?,
        q("P_t_dbm", Unit::Dbm, 30.0)?,
        q("noise_psd_dbm_hz", Unit::DbmPerHz, -170.0)?,
        q("alpha", Unit::Plain, 1e4)?,
    );
    if !(cfg.budget.alpha > 0.0) {
        return Err(config_error("alpha", "must be positive"));
    }

    if let Some(v) = get("bs") {
        cfg.bs = point("bs", v)?;
    }
    if let Some(v) = get("ue") {
        cfg.ue = point("ue", v)?;
    }
    cfg.oversampling = (n("O_1", cfg.oversampling.0)?, n("O_2", cfg.oversampling.1)?);
    cfg.distance_variance = q("sigma_d2", Unit::SquareMeter, cfg.distance_variance)?;
    if let Some(v) = get("seed") {
        cfg.seed = integer("seed", v)?;
    }
    if let Some(v) = get("estimator") {
        cfg.estimator = method("estimator", v)?;
    }
    if let Some(v) = get("shared_codewords") {
        cfg.shared_codewords = flag("shared_codewords", v)?;
    }
    let (default_side, default_draws) = match CovarianceModel::default() {
        CovarianceModel::Genie { side, draws } => (side, draws),
        CovarianceModel::Oracle => unreachable!("default covariance is genie"),
    };
    cfg.covariance = match get("covariance").map(|v| v.to_ascii_lowercase()) {
        None => CovarianceModel::Genie {
            side: q("genie_side_m", Unit::Meter, default_side)?,
            draws: n("genie_draws", default_draws)?,
        },
        Some(v) if v == "genie" => CovarianceModel::Genie {
            side: q("genie_side_m", Unit::Meter, default_side)?,
            draws: n("genie_draws", default_draws)?,
        },
        Some(v) if v == "oracle" => CovarianceModel::Oracle,
        Some(v) => {
            return Err(config_error(
                "covariance",
                format!("unknown model `{v}`, expected genie or oracle"),
            ))
        }
    };
    cfg.window_half_width = q("window_half_width_m", Unit::Meter, cfg.window_half_width)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
