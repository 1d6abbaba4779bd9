use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use papir::beamform::{beam_pattern, RisConfiguration};
use papir::channel::build_ap_ris_link;
use papir::geometry::{polar_to_cartesian, Frame, PolarPosition};
use papir::harness::campaign::{write_beampatterns, write_json, write_pseudospectra};
use papir::harness::{load_config, run_campaign, selftest, CampaignConfig};
use papir::papir::run_papir;
use papir::{Error, Result};

#[derive(Parser)]
#[command(name = "papir", version, about = "RIS-aided passive localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set runs=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<CampaignConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(out) = &self.output {
            overrides.push(format!("output_dir={:?}", out.display().to_string()));
        }
        load_config(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo campaign over the configured RIS sizes.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores).
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// One localization run with per-iteration dumps.
    Probe {
        #[command(flatten)]
        common: Common,
        /// UE azimuth in the RIS-centered frame, degrees.
        #[arg(long)]
        azimuth: Option<f64>,
        /// UE distance from the RIS, meters.
        #[arg(long)]
        range: Option<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Beam pattern of a stored RIS configuration.
    Pattern {
        #[command(flatten)]
        common: Common,
        /// JSON file written by `probe` (one configuration or a list).
        #[arg(long)]
        ris: PathBuf,
        /// Grid step in degrees.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
    /// Built-in invariant checks.
    Selftest,
}

#[derive(Serialize, Deserialize)]
struct StoredConfig {
    iteration: usize,
    nx: usize,
    ny: usize,
    v: RisConfiguration,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StoredConfigs {
    One(StoredConfig),
    Many(Vec<StoredConfig>),
}

fn simulate(common: &Common, workers: Option<usize>) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let manifest = run_campaign(&cfg)?;
    for s in &manifest.sizes {
        println!(
            "N={:>3} ({}x{}): runs={} failed={} converged={} final RMSE={:.4} m",
            s.n,
            s.nx,
            s.ny,
            s.runs,
            s.failed,
            s.converged,
            s.curve.final_rmse()
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn probe(common: &Common, azimuth: Option<f64>, range: Option<f64>, seed: u64) -> Result<()> {
    let cfg = common.load()?;
    let sc = cfg.scenario.clone();
    let az = azimuth.unwrap_or(cfg.ue_azimuth);
    let d = range.unwrap_or(cfg.ue_range);
    let ue = polar_to_cartesian(
        &PolarPosition::new(az, cfg.prior.elevation.0, d, Frame::RisCentered)?,
        &sc.ris_center(),
    );
    let est = run_papir(&sc, &cfg.prior, &ue, &cfg.papir, seed)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    write_pseudospectra(&dir.join("pseudospectrum.csv"), &est)?;
    write_beampatterns(&dir.join("beampattern.csv"), &est, &sc, 0.5)?;
    let stored: Vec<StoredConfig> = est
        .history
        .iter()
        .filter_map(|r| {
            r.outcomes[r.best_subarea].config.clone().map(|v| StoredConfig {
                iteration: r.iteration,
                nx: sc.nx,
                ny: sc.ny,
                v,
            })
        })
        .collect();
    write_json(&dir.join("ris_configs.json"), &stored)?;
    write_json(&dir.join("estimate.json"), &est)?;
    for r in &est.history {
        println!(
            "iter {:>2}: area [{:.2}, {:.2}]  θ̂ = {:.4}°  d̂ = {}  subarea estimates = {:?}",
            r.iteration,
            r.area.azimuth.0,
            r.area.azimuth.1,
            r.theta_hat,
            r.toa.map_or("-".into(), |t| format!("{:.3} m", t.distance)),
            r.outcomes.iter().map(|o| o.estimate).collect::<Vec<_>>()
        );
    }
    println!(
        "true ({az:.4}°, {d:.3} m)  estimate ({:.4}°, {:.3} m)  error {:.4} m  converged={} after {} iterations",
        est.theta_hat,
        est.d_hat,
        est.p_hat.distance(&ue),
        est.converged,
        est.iterations
    );
    Ok(())
}

fn pattern(common: &Common, ris: &PathBuf, step: f64) -> Result<()> {
    let cfg = common.load()?;
    if !(step > 0.0) {
        return Err(Error::Config {
            key: "step".into(),
            message: "must be > 0".into(),
        });
    }
    let stored = match serde_json::from_str(&std::fs::read_to_string(ris)?)? {
        StoredConfigs::One(c) => vec![c],
        StoredConfigs::Many(v) => v,
    };
    let grid: Vec<f64> = (0..(360.0 / step).round() as usize).map(|k| k as f64 * step).collect();
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join("beampattern.csv"))?;
    w.write_record(["angle", "gain", "iteration"])?;
    for s in &stored {
        let sc = papir::channel::Scenario {
            nx: s.nx,
            ny: s.ny,
            ..cfg.scenario.clone()
        };
        let link = build_ap_ris_link(&sc)?;
        for (a, g) in beam_pattern(&s.v, &link, &sc, &grid)? {
            w.serialize((a, g, s.iteration))?;
        }
    }
    w.flush()?;
    println!("wrote {}", cfg.output_dir.join("beampattern.csv").display());
    Ok(())
}

fn run_selftest() -> Result<bool> {
    let checks = selftest::run();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, workers } => simulate(common, *workers).map(|_| true),
        Command::Probe {
            common,
            azimuth,
            range,
            seed,
        } => probe(common, *azimuth, *range, *seed).map(|_| true),
        Command::Pattern { common, ris, step } => pattern(common, ris, *step).map(|_| true),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let mut body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            if let Error::Config { key, .. } = &e {
                body["key"] = serde_json::Value::String(key.clone());
            }
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
