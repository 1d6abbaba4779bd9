//! Iterative search-area refinement: split the current sector into
//! overlapping subareas, probe each with a statistically optimized RIS beam,
//! estimate the direction, keep the most likely subareas, and finally range
//! the UE from the time of arrival.
//!
//! With a rank-one RIS→AP link, the MMSE output of one probe always points
//! along `Φ G` and only its complex amplitude depends on the UE direction.
//! Each probe is therefore reduced to one whitened scalar stream
//! `z_k(n) = ê_k^H x_k(n) / σ_k`, and MUSIC runs across probes, with the
//! noiseless response of probe `k` to a unit source at `θ` as the steering
//! entry. Probes from earlier iterations stay in the set, since the channel
//! does not change while the search narrows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beamform::{optimize_ris, BeamformOptions, PositionPrior, RisConfiguration};
use crate::channel::{
    build_ap_ris_link, build_ue_channel, snr, synthesize_rx_delayed, ApRisLink, ReceivedBlock,
    Scenario,
};
use crate::error::{Error, Result};
use crate::estimate::{
    equalize, mmse_filter, music_with_steering, toa_estimate, zc_sequence, Pseudospectrum,
    ToaEstimate, ToaOptions,
};
use crate::geometry::{
    angular_distance, polar_to_cartesian, CartesianPosition, Frame, PolarPosition, C64,
};
use crate::seeds;

/// Azimuth × range sector in the RIS-centered frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchArea {
    pub azimuth: (f64, f64),
    pub range: (f64, f64),
    pub elevation: f64,
}

impl SearchArea {
    pub fn new(azimuth: (f64, f64), range: (f64, f64), elevation: f64) -> Result<Self> {
        let a = Self {
            azimuth,
            range,
            elevation,
        };
        a.to_prior()?;
        if a.width() <= 0.0 {
            return Err(Error::invalid("search area must have positive azimuth width"));
        }
        Ok(a)
    }

    pub fn from_prior(prior: &PositionPrior) -> Result<Self> {
        Self::new(prior.azimuth, prior.range, prior.elevation.0)
    }

    pub fn width(&self) -> f64 {
        self.azimuth.1 - self.azimuth.0
    }

    pub fn contains(&self, azimuth: f64) -> bool {
        self.to_prior().map(|p| p.contains_azimuth(azimuth)).unwrap_or(false)
    }

    pub fn to_prior(&self) -> Result<PositionPrior> {
        PositionPrior::uniform_sector(self.azimuth, self.range, self.elevation)
    }

    /// Grid points on multiples of `step` inside the azimuth interval.
    pub fn grid(&self, step: f64) -> Vec<f64> {
        let first = (self.azimuth.0 / step - 1e-9).ceil() as i64;
        let last = (self.azimuth.1 / step + 1e-9).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

/// Splits the azimuth interval into `n_a` equal slices and widens each
/// interior edge by `overlap · width / 2`.
pub fn subdivide(area: &SearchArea, n_a: usize, overlap: f64) -> Result<Vec<SearchArea>> {
    if n_a < 3 {
        return Err(Error::invalid(format!("need at least 3 subareas, got {n_a}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap {overlap} must be in [0, 1)")));
    }
    let w = area.width() / n_a as f64;
    let pad = overlap * w / 2.0;
    Ok((0..n_a)
        .map(|l| {
            let lo = area.azimuth.0 + l as f64 * w - if l > 0 { pad } else { 0.0 };
            let hi = if l + 1 == n_a {
                area.azimuth.1
            } else {
                area.azimuth.0 + (l + 1) as f64 * w + pad
            };
            SearchArea {
                azimuth: (lo, hi),
                ..*area
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PapirConfig {
    /// Subareas per iteration `N_A`.
    pub subareas: usize,
    /// Overlap `Δ` between adjacent subareas.
    pub overlap: f64,
    /// Stopping threshold on consecutive estimates, degrees.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub beamform: BeamformOptions,
    /// ZC length `L`, also the MUSIC snapshot count.
    pub sequence_length: usize,
    pub toa: ToaOptions,
    /// Azimuth grid step of the pseudospectrum, degrees.
    pub grid_step: f64,
}

impl Default for PapirConfig {
    fn default() -> Self {
        Self {
            subareas: 3,
            overlap: 0.2,
            epsilon: 0.5,
            max_iterations: 15,
            beamform: BeamformOptions::default(),
            sequence_length: 63,
            toa: ToaOptions::default(),
            grid_step: 0.05,
        }
    }
}

impl PapirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subareas < 3 {
            return Err(Error::invalid("subareas must be >= 3"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::invalid("overlap must be in [0, 1)"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::invalid("grid_step must be > 0"));
        }
        if self.beamform.samples == 0 || self.beamform.randomizations == 0 {
            return Err(Error::invalid("beamforming needs samples and randomizations"));
        }
        zc_sequence(self.sequence_length)?;
        Ok(())
    }
}

/// One RIS configuration applied to the true channel.
#[derive(Debug, Clone)]
pub struct Probe {
    pub area: SearchArea,
    pub config: RisConfiguration,
    pub relaxed_objective: f64,
    pub rounded_objective: f64,
    /// SNR the configuration achieves at the true UE.
    pub snr: f64,
    pub block: ReceivedBlock,
    /// Whitened projection of the equalized block, one value per slot.
    pub stream: DVector<C64>,
    /// `r` with `r^T b(θ)` the whitened noiseless response to a unit source
    /// at `θ`.
    pub response: DVector<C64>,
}

impl Probe {
    pub fn steering(&self, b: &DVector<C64>) -> C64 {
        self.response.iter().zip(b.iter()).map(|(r, b)| r * b).sum()
    }
}

/// Optimizes a beam for `sub`, collects one block from the true UE through
/// it and reduces the equalized block to its whitened scalar stream.
pub fn probe_subarea(
    sub: &SearchArea,
    sc: &Scenario,
    link: &ApRisLink,
    true_ue: &CartesianPosition,
    cfg: &PapirConfig,
    seed: u64,
) -> Result<Probe> {
    let bf = optimize_ris(&sub.to_prior()?, sc, link, &cfg.beamform, seeds::derive(seed, &[0]))?;
    let h = build_ue_channel(true_ue, sc, &sc.ris_center())?;
    let s = zc_sequence(cfg.sequence_length)?;
    let delay = (h.distance + sc.d_g) / sc.speed_of_light;
    let block = synthesize_rx_delayed(
        &h,
        link,
        &bf.config,
        s.samples(),
        delay,
        sc,
        seeds::derive(seed, &[1]),
    )?;
    let w = mmse_filter(link, &bf.config, sc)?;
    let x = equalize(&block, &w, sc)?;

    // the filter has rank one; any nonzero column spans its range
    let col = (0..w.ncols())
        .max_by(|&a, &b| w.column(a).norm().total_cmp(&w.column(b).norm()))
        .expect("M >= 1");
    let norm = w.column(col).norm();
    if !(norm > 0.0) {
        return Err(Error::EstimationFailure("MMSE filter vanished".into()));
    }
    let e = w.column(col) / C64::new(norm, 0.0);
    let sigma = sc.noise_to_power().sqrt() * (w.adjoint() * &e).norm();
    if !(sigma > 0.0) {
        return Err(Error::EstimationFailure("probe noise level vanished".into()));
    }
    let scale = C64::new(1.0 / sigma, 0.0);
    let stream = (x.adjoint() * &e).map(|v| v.conj() * scale);
    // e^H W G^H diag(v), as a column
    let row = (e.adjoint() * &w * link.matrix.adjoint()).transpose();
    let response = row.component_mul(bf.config.v()) * scale;
    let achieved = snr(&h, link, &bf.config, sc)?;
    Ok(Probe {
        area: *sub,
        config: bf.config,
        relaxed_objective: bf.relaxed_objective,
        rounded_objective: bf.rounded_objective,
        snr: achieved,
        block,
        stream,
        response,
    })
}

/// MUSIC across a set of probes of the same UE.
pub fn joint_spectrum(probes: &[&Probe], grid: &[f64], sc: &Scenario, elevation: f64) -> Result<Pseudospectrum> {
    let first = probes
        .first()
        .ok_or_else(|| Error::EstimationFailure("no probes to estimate from".into()))?;
    let l = first.stream.len();
    if probes.iter().any(|p| p.stream.len() != l) {
        return Err(Error::DimensionMismatch("probes with different block lengths".into()));
    }
    let z = DMatrix::from_fn(probes.len(), l, |k, n| probes[k].stream[n]);
    let (spectrum, _) = music_with_steering(&z, grid, |theta| {
        let b = sc.ris_steering(theta, elevation)?.into_entries();
        Ok(DVector::from_iterator(
            probes.len(),
            probes.iter().map(|p| p.steering(&b)),
        ))
    })?;
    Ok(spectrum)
}

/// Prior azimuth density at the estimate.
pub fn likelihood_of_estimate(theta_hat: f64, prior: &PositionPrior) -> f64 {
    prior.azimuth_density(theta_hat)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubareaOutcome {
    pub area: SearchArea,
    pub estimate: Option<f64>,
    pub likelihood: f64,
    /// Peak-to-median of the pseudospectrum inside the subarea.
    pub sharpness: f64,
    pub snr: Option<f64>,
    pub config: Option<RisConfiguration>,
    pub spectrum: Option<Pseudospectrum>,
    pub failure: Option<String>,
}

/// Subarea indices ordered by likelihood, then sharpness. Failed subareas
/// are left out.
pub fn rank_subareas(outcomes: &[SubareaOutcome]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..outcomes.len())
        .filter(|&i| outcomes[i].estimate.is_some())
        .collect();
    idx.sort_by(|&a, &b| {
        let (oa, ob) = (&outcomes[a], &outcomes[b]);
        ob.likelihood
            .total_cmp(&oa.likelihood)
            .then(ob.sharpness.total_cmp(&oa.sharpness))
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub area: SearchArea,
    pub outcomes: Vec<SubareaOutcome>,
    pub best_subarea: usize,
    pub theta_hat: f64,
    pub next_area: SearchArea,
    pub toa: Option<ToaEstimate>,
    /// Position from this iteration's direction and range, if ranging worked.
    pub position: Option<CartesianPosition>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationEstimate {
    pub theta_hat: f64,
    pub d_hat: f64,
    pub p_hat: CartesianPosition,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
}

fn position_from(theta: f64, elevation: f64, d: f64, sc: &Scenario) -> Option<CartesianPosition> {
    if !(d >= 0.0) {
        return None;
    }
    let pp = PolarPosition::new(theta, elevation, d, Frame::RisCentered).ok()?;
    Some(polar_to_cartesian(&pp, &sc.ris_center()))
}

fn probe_all(
    subs: &[SearchArea],
    sc: &Scenario,
    link: &ApRisLink,
    true_ue: &CartesianPosition,
    cfg: &PapirConfig,
    seed: u64,
    iteration: usize,
) -> Vec<Result<Probe>> {
    let run = |(l, sub): (usize, &SearchArea)| {
        probe_subarea(sub, sc, link, true_ue, cfg, seeds::derive(seed, &[iteration as u64, l as u64]))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        subs.par_iter().enumerate().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        subs.iter().enumerate().map(run).collect()
    }
}

/// Runs the full search from `prior` against a UE at `true_ue`.
pub fn run_papir(
    sc: &Scenario,
    prior: &PositionPrior,
    true_ue: &CartesianPosition,
    cfg: &PapirConfig,
    seed: u64,
) -> Result<LocalizationEstimate> {
    cfg.validate()?;
    let link = build_ap_ris_link(sc)?;
    let seq = zc_sequence(cfg.sequence_length)?;
    let mut area = SearchArea::from_prior(prior)?;
    let mut probes: Vec<Probe> = Vec::new();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;

    for iteration in 1..=cfg.max_iterations {
        let subs = subdivide(&area, cfg.subareas, cfg.overlap)?;
        let results = probe_all(&subs, sc, &link, true_ue, cfg, seed, iteration);
        let mut fresh: Vec<Option<usize>> = Vec::with_capacity(subs.len());
        let mut failures: Vec<Option<String>> = Vec::with_capacity(subs.len());
        for r in results {
            match r {
                Ok(p) => {
                    probes.push(p);
                    fresh.push(Some(probes.len() - 1));
                    failures.push(None);
                }
                Err(e) => {
                    fresh.push(None);
                    failures.push(Some(e.to_string()));
                }
            }
        }
        if fresh.iter().all(Option::is_none) {
            return Err(Error::AlgorithmFailure {
                iteration,
                reason: "every subarea probe failed".into(),
                history,
            });
        }

        let grid = area.grid(cfg.grid_step);
        let refs: Vec<&Probe> = probes.iter().collect();
        let spectrum = joint_spectrum(&refs, &grid, sc, area.elevation);
        let area_prior = area.to_prior()?;
        let outcomes: Vec<SubareaOutcome> = subs
            .iter()
            .enumerate()
            .map(|(l, sub)| {
                let probe = fresh[l].map(|k| &probes[k]);
                let mut out = SubareaOutcome {
                    area: *sub,
                    estimate: None,
                    likelihood: 0.0,
                    sharpness: 0.0,
                    snr: probe.map(|p| p.snr),
                    config: probe.map(|p| p.config.clone()),
                    spectrum: None,
                    failure: failures[l].clone(),
                };
                if probe.is_none() {
                    return out;
                }
                match &spectrum {
                    Ok(spectrum) => {
                        let local = spectrum.restrict(sub.azimuth.0, sub.azimuth.1);
                        if let Some(theta) = local.refined_peak() {
                            out.estimate = Some(theta);
                            out.likelihood = likelihood_of_estimate(theta, &area_prior);
                            out.sharpness = local.peak_to_median();
                        } else {
                            out.failure = Some("empty subarea grid".into());
                        }
                        out.spectrum = Some(local);
                    }
                    Err(e) => out.failure = Some(e.to_string()),
                }
                out
            })
            .collect();

        let ranked = rank_subareas(&outcomes);
        let Some(&best) = ranked.first() else {
            return Err(Error::AlgorithmFailure {
                iteration,
                reason: "no subarea produced an estimate".into(),
                history,
            });
        };
        let theta_hat = outcomes[best].estimate.expect("ranked outcomes have estimates");
        let keep = &ranked[..ranked.len().min(cfg.subareas - 1)];
        let lo = keep.iter().map(|&i| subs[i].azimuth.0).fold(f64::INFINITY, f64::min);
        let hi = keep.iter().map(|&i| subs[i].azimuth.1).fold(f64::NEG_INFINITY, f64::max);
        let next_area = SearchArea {
            azimuth: (lo, hi),
            ..area
        };

        let best_probe = &probes[fresh[best].expect("ranked subareas were probed")];
        let toa = toa_estimate(&best_probe.block, &seq, sc, &cfg.toa).ok();
        let position = toa.and_then(|t| position_from(theta_hat, area.elevation, t.distance, sc));
        history.push(IterationRecord {
            iteration,
            area,
            outcomes,
            best_subarea: best,
            theta_hat,
            next_area,
            toa,
            position,
        });

        if history.len() >= 2 {
            let prev = history[history.len() - 2].theta_hat;
            if angular_distance(prev, theta_hat) <= cfg.epsilon {
                converged = true;
                break;
            }
        }
        area = next_area;
    }

    let last = history.last().expect("at least one iteration");
    let (theta_hat, elevation) = (last.theta_hat, last.area.elevation);
    let d_hat = history
        .iter()
        .rev()
        .find_map(|r| r.toa.filter(|t| t.valid).map(|t| t.distance))
        .ok_or_else(|| Error::EstimationFailure("ranging failed in every iteration".into()))?;
    let p_hat = position_from(theta_hat, elevation, d_hat, sc).expect("valid range");
    let iterations = history.len();
    Ok(LocalizationEstimate {
        theta_hat,
        d_hat,
        p_hat,
        history,
        converged,
        iterations,
    })
}
