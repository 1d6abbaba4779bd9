//! Monte Carlo campaigns over RIS sizes, RMSE curves and file outputs.
//!
//! CSV schemas:
//! - `rmse.csv`: `iteration,rmse,N`
//! - `pseudospectrum_N{N}.csv`: `angle,value,iteration,subarea` (first run)
//! - `beampattern_N{N}.csv`: `angle,gain,iteration` (first run, best subarea)
//! - `raw.csv`: `N,run,iteration,theta_hat,d_hat,x,y,z,ue_x,ue_y,ue_z,error,converged`

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamform::{beam_pattern, sample_prior};
use crate::channel::{build_ap_ris_link, Scenario};
use crate::error::{Error, Result};
use crate::geometry::CartesianPosition;
use crate::harness::config::CampaignConfig;
use crate::papir::{run_papir, LocalizationEstimate};
use crate::seeds;

/// Root-mean-square position error per iteration for one RIS size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseCurve {
    pub n: usize,
    pub iterations: Vec<usize>,
    pub rmse: Vec<f64>,
    pub runs: usize,
}

impl RmseCurve {
    pub fn final_rmse(&self) -> f64 {
        self.rmse.last().copied().unwrap_or(f64::NAN)
    }
}

/// `rmse(n) = sqrt(mean_r e_r(n)²)`; runs that stopped before iteration `n`
/// contribute their last error.
pub fn compute_rmse(errors: &[Vec<f64>], n: usize) -> Result<RmseCurve> {
    let runs: Vec<&Vec<f64>> = errors.iter().filter(|e| !e.is_empty()).collect();
    if runs.is_empty() {
        return Err(Error::invalid("no position errors to average"));
    }
    let len = runs.iter().map(|e| e.len()).max().expect("nonempty");
    let rmse = (0..len)
        .map(|k| {
            let sum: f64 = runs
                .iter()
                .map(|e| {
                    let v = e[k.min(e.len() - 1)];
                    v * v
                })
                .sum();
            (sum / runs.len() as f64).sqrt()
        })
        .collect();
    Ok(RmseCurve {
        n,
        iterations: (1..=len).collect(),
        rmse,
        runs: runs.len(),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub ue: CartesianPosition,
    pub result: std::result::Result<LocalizationEstimate, String>,
}

impl RunOutcome {
    /// Position error after each iteration. Iterations without a range
    /// estimate reuse the nearest earlier one (or the first later one).
    pub fn errors(&self) -> Option<Vec<f64>> {
        let est = self.result.as_ref().ok()?;
        let raw: Vec<Option<f64>> = est
            .history
            .iter()
            .map(|r| r.position.map(|p| p.distance(&self.ue)))
            .collect();
        let first = raw.iter().flatten().next().copied()?;
        let mut last = first;
        Some(
            raw.into_iter()
                .map(|e| {
                    if let Some(v) = e {
                        last = v;
                    }
                    last
                })
                .collect(),
        )
    }
}

/// True UE position of run `run`. The draw depends only on the master seed
/// and the run index, so every RIS size sees the same positions.
pub fn ue_position(cfg: &CampaignConfig, sc: &Scenario, run: usize) -> Result<CartesianPosition> {
    Ok(sample_prior(&cfg.prior, 1, &sc.ris_center(), seeds::derive(cfg.seed, &[run as u64]))?[0])
}

fn run_one(cfg: &CampaignConfig, sc: &Scenario, n: usize, run: usize) -> Result<RunOutcome> {
    let ue = ue_position(cfg, sc, run)?;
    let seed = seeds::derive(cfg.seed, &[n as u64, run as u64]);
    let result = run_papir(sc, &cfg.prior, &ue, &cfg.papir, seed).map_err(|e| e.to_string());
    Ok(RunOutcome { run, ue, result })
}

/// Runs every Monte Carlo trial for one RIS size.
pub fn simulate_size(cfg: &CampaignConfig, n: usize) -> Result<Vec<RunOutcome>> {
    let sc = cfg.scenario_for(n)?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        pool.install(|| {
            (0..cfg.runs)
                .into_par_iter()
                .map(|r| run_one(cfg, &sc, n, r))
                .collect()
        })
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.runs).map(|r| run_one(cfg, &sc, n, r)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub runs: usize,
    pub failed: usize,
    pub converged: usize,
    pub curve: RmseCurve,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub seed: u64,
    pub config: CampaignConfig,
    pub sizes: Vec<SizeSummary>,
    pub files: Vec<String>,
}

fn writer(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<csv::Writer<fs::File>> {
    files.push(name.to_string());
    Ok(csv::Writer::from_path(dir.join(name))?)
}

/// Writes the spectrum of every subarea of every iteration.
pub fn write_pseudospectra(path: &Path, est: &LocalizationEstimate) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["angle", "value", "iteration", "subarea"])?;
    for rec in &est.history {
        for (l, out) in rec.outcomes.iter().enumerate() {
            if let Some(spectrum) = &out.spectrum {
                for (a, v) in spectrum.grid.iter().zip(&spectrum.values) {
                    w.serialize((a, v, rec.iteration, l + 1))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Beam pattern of the best subarea's configuration of each iteration over
/// the full circle.
pub fn write_beampatterns(path: &Path, est: &LocalizationEstimate, sc: &Scenario, step: f64) -> Result<()> {
    let link = build_ap_ris_link(sc)?;
    let grid: Vec<f64> = (0..(360.0 / step).round() as usize)
        .map(|k| k as f64 * step)
        .collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["angle", "gain", "iteration"])?;
    for rec in &est.history {
        if let Some(cfg) = &rec.outcomes[rec.best_subarea].config {
            for (a, g) in beam_pattern(cfg, &link, sc, &grid)? {
                w.serialize((a, g, rec.iteration))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the whole sweep and writes the enabled outputs to `cfg.output_dir`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut sizes = Vec::new();
    let mut rmse_w = if cfg.emit.rmse {
        let mut w = writer(dir, "rmse.csv", &mut files)?;
        w.write_record(["iteration", "rmse", "N"])?;
        Some(w)
    } else {
        None
    };
    let mut raw_w = if cfg.emit.raw {
        let mut w = writer(dir, "raw.csv", &mut files)?;
        w.write_record([
            "N", "run", "iteration", "theta_hat", "d_hat", "x", "y", "z", "ue_x", "ue_y", "ue_z",
            "error", "converged",
        ])?;
        Some(w)
    } else {
        None
    };

    for &n in &cfg.ris_sizes {
        let sc = cfg.scenario_for(n)?;
        let outcomes = simulate_size(cfg, n)?;
        let errors: Vec<Vec<f64>> = outcomes.iter().filter_map(RunOutcome::errors).collect();
        let failed = cfg.runs - errors.len();
        if 2 * failed > cfg.runs {
            let first = outcomes
                .iter()
                .find_map(|o| o.result.as_ref().err().cloned())
                .unwrap_or_else(|| "ranging failed".into());
            return Err(Error::EstimationFailure(format!(
                "{failed} of {} runs failed for N={n} (first error: {first})",
                cfg.runs
            )));
        }
        let curve = compute_rmse(&errors, n)?;
        if let Some(w) = rmse_w.as_mut() {
            for (it, r) in curve.iterations.iter().zip(&curve.rmse) {
                w.serialize((it, r, n))?;
            }
        }
        if let Some(w) = raw_w.as_mut() {
            for o in &outcomes {
                let Ok(est) = &o.result else { continue };
                for rec in &est.history {
                    let (x, y, z) = rec.position.map_or((f64::NAN, f64::NAN, f64::NAN), |p| (p.x, p.y, p.z));
                    let d = rec.toa.map_or(f64::NAN, |t| t.distance);
                    let err = rec.position.map_or(f64::NAN, |p| p.distance(&o.ue));
                    w.serialize((
                        n, o.run, rec.iteration, rec.theta_hat, d, x, y, z, o.ue.x, o.ue.y, o.ue.z, err,
                        est.converged,
                    ))?;
                }
            }
        }
        if let Some(Ok(first)) = outcomes.first().map(|o| &o.result) {
            if cfg.emit.pseudospectrum {
                let name = format!("pseudospectrum_N{n}.csv");
                write_pseudospectra(&dir.join(&name), first)?;
                files.push(name);
            }
            if cfg.emit.beampattern {
                let name = format!("beampattern_N{n}.csv");
                write_beampatterns(&dir.join(&name), first, &sc, 0.5)?;
                files.push(name);
            }
        }
        sizes.push(SizeSummary {
            n,
            nx: sc.nx,
            ny: sc.ny,
            runs: cfg.runs,
            failed,
            converged: outcomes
                .iter()
                .filter(|o| o.result.as_ref().is_ok_and(|e| e.converged))
                .count(),
            curve,
        });
    }
    if let Some(mut w) = rmse_w {
        w.flush()?;
    }
    if let Some(mut w) = raw_w {
        w.flush()?;
    }
    files.push("manifest.json".into());
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: cfg.clone(),
        sizes,
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
