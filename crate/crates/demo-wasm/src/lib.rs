//! Browser bindings: RIS beam patterns, a full localization run and
//! Zadoff-Chu correlation, each callable from `www/main.js`.

use serde_json::json;
use wasm_bindgen::prelude::*;

use papir::beamform::{beam_pattern, optimize_ris, BeamformOptions, PositionPrior};
use papir::channel::{build_ap_ris_link, Scenario};
use papir::dsp::{circular_xcorr, fractional_circular_shift, upsample};
use papir::estimate::zc_sequence;
use papir::geometry::{polar_to_cartesian, Frame, PolarPosition};
use papir::harness::config::ris_dims;
use papir::papir::{run_papir, PapirConfig};

fn scenario(n: usize) -> Result<Scenario, String> {
    let (nx, ny) = ris_dims(n, false).map_err(|e| e.to_string())?;
    Ok(Scenario {
        nx,
        ny,
        ..Scenario::default()
    })
}

fn light_options() -> BeamformOptions {
    BeamformOptions {
        samples: 200,
        max_constraints: Some(60),
        randomizations: 150,
        ..BeamformOptions::default()
    }
}

/// Optimizes a beam for the sector `[az_lo, az_hi] × [20, 80] m` and returns
/// the gain at every whole degree from 0 to 359.
pub fn sector_pattern(az_lo: f64, az_hi: f64, n: usize, seed: u64) -> Result<Vec<f64>, String> {
    let sc = scenario(n)?;
    let link = build_ap_ris_link(&sc).map_err(|e| e.to_string())?;
    let prior = PositionPrior::uniform_sector((az_lo, az_hi), (20.0, 80.0), 0.0).map_err(|e| e.to_string())?;
    let bf = optimize_ris(&prior, &sc, &link, &light_options(), seed).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..360).map(f64::from).collect();
    let pattern = beam_pattern(&bf.config, &link, &sc, &grid).map_err(|e| e.to_string())?;
    Ok(pattern.into_iter().map(|(_, g)| g).collect())
}

/// Localizes a UE at (`azimuth`, `range`) from the prior
/// `[260°, 320°] × [20, 80] m`; returns a JSON summary.
pub fn localize_json(azimuth: f64, range: f64, n: usize, seed: u64) -> Result<String, String> {
    let sc = scenario(n)?;
    let prior = PositionPrior::uniform_sector((260.0, 320.0), (20.0, 80.0), 0.0).map_err(|e| e.to_string())?;
    let ue = polar_to_cartesian(
        &PolarPosition::new(azimuth, 0.0, range, Frame::RisCentered).map_err(|e| e.to_string())?,
        &sc.ris_center(),
    );
    let cfg = PapirConfig {
        beamform: light_options(),
        grid_step: 0.1,
        ..PapirConfig::default()
    };
    let est = run_papir(&sc, &prior, &ue, &cfg, seed).map_err(|e| e.to_string())?;
    let iterations: Vec<_> = est
        .history
        .iter()
        .map(|r| {
            json!({
                "iteration": r.iteration,
                "area": [r.area.azimuth.0, r.area.azimuth.1],
                "theta_hat": r.theta_hat,
                "distance": r.toa.map(|t| t.distance),
                "spectra": r.outcomes.iter().map(|o| o.spectrum.as_ref().map(|s| json!({
                    "grid": s.grid,
                    "values": s.values,
                }))).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({
        "theta_hat": est.theta_hat,
        "d_hat": est.d_hat,
        "error_m": est.p_hat.distance(&ue),
        "converged": est.converged,
        "iterations": iterations,
    })
    .to_string())
}

/// Correlation magnitude between a length-`l` ZC sequence and a copy
/// delayed by `delay` samples, after upsampling by `factor`.
pub fn zc_correlation_magnitude(l: usize, delay: f64, factor: usize) -> Result<Vec<f64>, String> {
    let s = zc_sequence(l).map_err(|e| e.to_string())?;
    let delayed = fractional_circular_shift(s.samples(), delay);
    let corr = circular_xcorr(&upsample(&delayed, factor), &upsample(s.samples(), factor));
    Ok(corr.iter().map(|c| c.norm()).collect())
}

#[wasm_bindgen]
pub fn beam_pattern_for_sector(az_lo: f64, az_hi: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    sector_pattern(az_lo, az_hi, n, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn localize(azimuth: f64, range: f64, n: usize, seed: u32) -> Result<String, JsValue> {
    localize_json(azimuth, range, n, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn zc_correlation(l: usize, delay: f64, factor: usize) -> Result<Vec<f64>, JsValue> {
    zc_correlation_magnitude(l, delay, factor).map_err(|e| JsValue::from_str(&e))
}
