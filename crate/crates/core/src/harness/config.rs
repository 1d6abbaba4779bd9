//! Flat key/value campaign configuration.
//!
//! The file is TOML with one table of scalar keys. Powers accept either a
//! number in watts or a string such as `"20dBm"`, `"0.1W"`; the sample rate
//! accepts `"30.72MHz"`. Short aliases (`P`, `sigma2`, `beta`, `delta`,
//! `delta_f`, `M`, `Nx`, `Ny`, `N_A`, `T`, `K`, `U`, `L`, `eps`) map onto the
//! long names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::beamform::PositionPrior;
use crate::channel::{dbm_to_watts, Scenario};
use crate::error::{Error, Result};
use crate::papir::PapirConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmitFlags {
    pub pseudospectrum: bool,
    pub beampattern: bool,
    pub rmse: bool,
    pub raw: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            pseudospectrum: true,
            beampattern: true,
            rmse: true,
            raw: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenario: Scenario,
    pub prior: PositionPrior,
    pub papir: PapirConfig,
    /// RIS sizes to sweep.
    pub ris_sizes: Vec<usize>,
    /// Reject RIS sizes that are not perfect squares.
    pub square_ris: bool,
    pub runs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit: EmitFlags,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// UE location for single-instance probing.
    pub ue_azimuth: f64,
    pub ue_range: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            prior: PositionPrior {
                azimuth: (260.0, 320.0),
                range: (20.0, 80.0),
                elevation: (0.0, 0.0),
            },
            papir: PapirConfig::default(),
            ris_sizes: vec![16, 32, 64],
            square_ris: false,
            runs: 100,
            seed: 1,
            output_dir: PathBuf::from("out"),
            emit: EmitFlags::default(),
            workers: 0,
            ue_azimuth: 300.0,
            ue_range: 70.0,
        }
    }
}

/// All accepted keys.
pub const KEYS: &[&str] = &[
    "m",
    "nx",
    "ny",
    "d_g",
    "psi_d_x",
    "psi_d_z",
    "psi_a",
    "tx_power",
    "noise_power",
    "pathloss_exponent",
    "spacing",
    "sample_rate",
    "speed_of_light",
    "prior_azimuth_min",
    "prior_azimuth_max",
    "prior_range_min",
    "prior_range_max",
    "prior_elevation",
    "subareas",
    "overlap",
    "epsilon",
    "max_iterations",
    "samples",
    "max_constraints",
    "randomizations",
    "sdp_tol",
    "sdp_max_iterations",
    "sequence_length",
    "upsample",
    "min_peak_to_median",
    "grid_step",
    "ris_sizes",
    "square_ris",
    "runs",
    "seed",
    "output_dir",
    "emit_pseudospectrum",
    "emit_beampattern",
    "emit_rmse",
    "emit_raw",
    "workers",
    "ue_azimuth",
    "ue_range",
];

fn canonical(key: &str) -> &str {
    match key {
        "M" => "m",
        "Nx" | "N_x" => "nx",
        "Ny" | "N_y" => "ny",
        "P" => "tx_power",
        "sigma2" => "noise_power",
        "beta" => "pathloss_exponent",
        "delta" => "spacing",
        "delta_f" => "sample_rate",
        "c" => "speed_of_light",
        "N_A" => "subareas",
        "T" => "samples",
        "K" => "randomizations",
        "U" => "upsample",
        "L" => "sequence_length",
        "eps" => "epsilon",
        "N" => "ris_sizes",
        other => other,
    }
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, format!("expected a number, got {v}"))),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::config(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn flag(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::config(key, format!("expected true or false, got {v}")))
}

fn split_unit(s: &str) -> (f64, String) {
    let s = s.trim();
    let idx = s
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(idx);
    (num.trim().parse().unwrap_or(f64::NAN), unit.trim().to_ascii_lowercase())
}

/// Power in watts from a number (watts) or a `dBm`/`W`/`mW` string.
pub fn parse_power(key: &str, v: &Value) -> Result<f64> {
    let w = match v {
        Value::String(s) => {
            let (x, unit) = split_unit(s);
            match unit.as_str() {
                "dbm" => dbm_to_watts(x),
                "w" | "" => x,
                "mw" => x * 1e-3,
                _ => return Err(Error::config(key, format!("unknown power unit in {s:?}"))),
            }
        }
        other => float(key, other)?,
    };
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::config(key, format!("power must be > 0, got {v}")));
    }
    Ok(w)
}

fn parse_frequency(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => {
            let (x, unit) = split_unit(s);
            let scale = match unit.as_str() {
                "hz" | "" => 1.0,
                "khz" => 1e3,
                "mhz" => 1e6,
                "ghz" => 1e9,
                _ => return Err(Error::config(key, format!("unknown frequency unit in {s:?}"))),
            };
            let f = x * scale;
            if f.is_finite() {
                Ok(f)
            } else {
                Err(Error::config(key, format!("cannot parse {s:?}")))
            }
        }
        other => float(key, other),
    }
}

impl CampaignConfig {
    /// Applies one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let key = canonical(key);
        let sc = &mut self.scenario;
        let pc = &mut self.papir;
        match key {
            "m" => sc.m = count(key, v)?,
            "nx" => sc.nx = count(key, v)?,
            "ny" => sc.ny = count(key, v)?,
            "d_g" => sc.d_g = float(key, v)?,
            "psi_d_x" => sc.psi_d_x = float(key, v)?,
            "psi_d_z" => sc.psi_d_z = float(key, v)?,
            "psi_a" => sc.psi_a = float(key, v)?,
            "tx_power" => sc.tx_power = parse_power(key, v)?,
            "noise_power" => sc.noise_power = parse_power(key, v)?,
            "pathloss_exponent" => sc.pathloss_exponent = float(key, v)?,
            "spacing" => sc.spacing = float(key, v)?,
            "sample_rate" => sc.sample_rate = parse_frequency(key, v)?,
            "speed_of_light" => sc.speed_of_light = float(key, v)?,
            "prior_azimuth_min" => self.prior.azimuth.0 = float(key, v)?,
            "prior_azimuth_max" => self.prior.azimuth.1 = float(key, v)?,
            "prior_range_min" => self.prior.range.0 = float(key, v)?,
            "prior_range_max" => self.prior.range.1 = float(key, v)?,
            "prior_elevation" => {
                let e = float(key, v)?;
                self.prior.elevation = (e, e);
            }
            "subareas" => pc.subareas = count(key, v)?,
            "overlap" => pc.overlap = float(key, v)?,
            "epsilon" => pc.epsilon = float(key, v)?,
            "max_iterations" => pc.max_iterations = count(key, v)?,
            "samples" => pc.beamform.samples = count(key, v)?,
            "max_constraints" => {
                let c = count(key, v)?;
                pc.beamform.max_constraints = (c > 0).then_some(c);
            }
            "randomizations" => pc.beamform.randomizations = count(key, v)?,
            "sdp_tol" => pc.beamform.sdp_tol = float(key, v)?,
            "sdp_max_iterations" => pc.beamform.sdp_max_iterations = count(key, v)?,
            "sequence_length" => pc.sequence_length = count(key, v)?,
            "upsample" => pc.toa.upsample = count(key, v)?,
            "min_peak_to_median" => pc.toa.min_peak_to_median = float(key, v)?,
            "grid_step" => pc.grid_step = float(key, v)?,
            "ris_sizes" => {
                self.ris_sizes = match v {
                    Value::Array(items) => items
                        .iter()
                        .map(|i| count(key, i))
                        .collect::<Result<Vec<_>>>()?,
                    single => vec![count(key, single)?],
                }
            }
            "square_ris" => self.square_ris = flag(key, v)?,
            "runs" => self.runs = count(key, v)?,
            "seed" => {
                self.seed = match v {
                    Value::Integer(i) if *i >= 0 => *i as u64,
                    _ => return Err(Error::config(key, "expected a non-negative integer")),
                }
            }
            "output_dir" => {
                self.output_dir = PathBuf::from(
                    v.as_str()
                        .ok_or_else(|| Error::config(key, "expected a path string"))?,
                )
            }
            "emit_pseudospectrum" => self.emit.pseudospectrum = flag(key, v)?,
            "emit_beampattern" => self.emit.beampattern = flag(key, v)?,
            "emit_rmse" => self.emit.rmse = flag(key, v)?,
            "emit_raw" => self.emit.raw = flag(key, v)?,
            "workers" => self.workers = count(key, v)?,
            "ue_azimuth" => self.ue_azimuth = float(key, v)?,
            "ue_range" => self.ue_range = float(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs", "must be >= 1"));
        }
        if self.ris_sizes.is_empty() {
            return Err(Error::config("ris_sizes", "must list at least one RIS size"));
        }
        for &n in &self.ris_sizes {
            ris_dims(n, self.square_ris).map_err(|e| Error::config("ris_sizes", e.to_string()))?;
            self.scenario_for(n)?
                .validate()
                .map_err(|e| Error::config("ris_sizes", e.to_string()))?;
        }
        self.scenario
            .validate()
            .map_err(|e| Error::config("scenario", e.to_string()))?;
        self.prior
            .validate()
            .map_err(|e| Error::config("prior", e.to_string()))?;
        self.papir
            .validate()
            .map_err(|e| Error::config("algorithm", e.to_string()))?;
        if self.papir.toa.upsample == 0 {
            return Err(Error::config("upsample", "must be >= 1"));
        }
        if !(self.papir.beamform.sdp_tol > 0.0) {
            return Err(Error::config("sdp_tol", "must be > 0"));
        }
        if !(self.ue_range > 0.0) {
            return Err(Error::config("ue_range", "must be > 0"));
        }
        Ok(())
    }

    /// Scenario with the RIS resized to `n` elements.
    pub fn scenario_for(&self, n: usize) -> Result<Scenario> {
        let (nx, ny) = ris_dims(n, self.square_ris)?;
        Ok(Scenario {
            nx,
            ny,
            ..self.scenario.clone()
        })
    }
}

/// Splits `n` into `nx × ny` with `nx >= ny` as close to square as possible.
pub fn ris_dims(n: usize, square_only: bool) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::invalid("RIS size must be positive"));
    }
    let ny = (1..=n).take_while(|d| d * d <= n).filter(|d| n % d == 0).last().unwrap_or(1);
    let nx = n / ny;
    if square_only && nx != ny {
        return Err(Error::invalid(format!("RIS size {n} is not a perfect square")));
    }
    Ok((nx, ny))
}

/// Parses `key=value`; the value is read as a TOML scalar or array, falling
/// back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "override must look like key=value"))?;
    let k = k.trim();
    let v = v.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Builds a config from optional file text plus `key=value` overrides.
pub fn parse_config(text: Option<&str>, overrides: &[String]) -> Result<CampaignConfig> {
    let mut cfg = CampaignConfig::default();
    if let Some(text) = text {
        let table: toml::Table = toml::from_str(text)
            .map_err(|e| Error::config("<file>", e.message().to_string()))?;
        for (k, v) in &table {
            cfg.set(k, v)?;
        }
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<CampaignConfig> {
    let text = path.map(std::fs::read_to_string).transpose()?;
    parse_config(text.as_deref(), overrides)
}
