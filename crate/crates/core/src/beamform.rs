//! Statistical RIS beamforming: sample a position prior, build the per-sample
//! Gram matrices of the equivalent channel, solve the relaxed max-min problem
//! and round the result to a unit-modulus configuration.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::channel::{build_ue_channel, ApRisLink, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{polar_to_cartesian, wrap_degrees, CartesianPosition, Frame, PolarPosition, C64};
use crate::sdp::{gaussian_randomization, solve_maxmin_sdp, GramMatrix, MaxMinSdpProblem, SdpOptions};
use crate::seeds;

/// RIS reflection vector `v`. The reflection matrix is `Φ = diag(v*)`, so
/// the reflected signal is `Φ^H h = v ∘ h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct RisConfiguration {
    v: DVector<C64>,
}

impl RisConfiguration {
    pub fn new(v: DVector<C64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("RIS configuration is empty"));
        }
        if let Some(bad) = v.iter().find(|e| !(e.norm() <= 1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "RIS coefficient {bad} exceeds unit modulus"
            )));
        }
        Ok(Self { v })
    }

    pub fn ones(n: usize) -> Self {
        Self {
            v: DVector::from_element(n, C64::new(1.0, 0.0)),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            v: DVector::zeros(n),
        }
    }

    /// Unit-modulus configuration `v_i = u_i / |u_i|`, with 1 where `u_i = 0`.
    pub fn phase_aligned(u: &DVector<C64>) -> Self {
        Self {
            v: u.map(|e| if e.norm() > 0.0 { e / e.norm() } else { C64::new(1.0, 0.0) }),
        }
    }

    pub fn v(&self) -> &DVector<C64> {
        &self.v
    }

    /// `Φ = diag(v*)`.
    pub fn phi(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&self.v.map(|e| e.conj()))
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn is_unit_modulus(&self, tol: f64) -> bool {
        self.v.iter().all(|e| (e.norm() - 1.0).abs() <= tol)
    }
}

impl TryFrom<Vec<[f64; 2]>> for RisConfiguration {
    type Error = Error;

    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(DVector::from_iterator(
            raw.len(),
            raw.iter().map(|&[re, im]| C64::new(re, im)),
        ))
    }
}

impl From<RisConfiguration> for Vec<[f64; 2]> {
    fn from(c: RisConfiguration) -> Self {
        c.v.iter().map(|e| [e.re, e.im]).collect()
    }
}

/// Uniform sector prior in the RIS-centered frame. Azimuth may run past
/// 360° (e.g. `[350, 370]`) to describe a sector across 0°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionPrior {
    pub azimuth: (f64, f64),
    pub range: (f64, f64),
    /// Equal bounds fix the elevation.
    pub elevation: (f64, f64),
}

impl PositionPrior {
    pub fn uniform_sector(azimuth: (f64, f64), range: (f64, f64), elevation: f64) -> Result<Self> {
        let p = Self {
            azimuth,
            range,
            elevation: (elevation, elevation),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.azimuth.0,
            self.azimuth.1,
            self.range.0,
            self.range.1,
            self.elevation.0,
            self.elevation.1,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prior bounds must be finite"));
        }
        if self.azimuth.0 > self.azimuth.1 || self.azimuth_width() > 360.0 {
            return Err(Error::invalid(format!(
                "prior azimuth interval [{}, {}] is empty or wider than 360°",
                self.azimuth.0, self.azimuth.1
            )));
        }
        if self.range.0 > self.range.1 || self.range.0 <= 0.0 {
            return Err(Error::invalid(format!(
                "prior range interval [{}, {}] must be nonempty and positive",
                self.range.0, self.range.1
            )));
        }
        if self.elevation.0 > self.elevation.1
            || self.elevation.0 < -90.0
            || self.elevation.1 > 90.0
        {
            return Err(Error::invalid("prior elevation interval is invalid"));
        }
        Ok(())
    }

    pub fn azimuth_width(&self) -> f64 {
        self.azimuth.1 - self.azimuth.0
    }

    /// Whether `azimuth` (any representative mod 360) lies in the sector.
    pub fn contains_azimuth(&self, azimuth: f64) -> bool {
        let offset = wrap_degrees(azimuth - self.azimuth.0);
        offset <= self.azimuth_width() + 1e-9 || (360.0 - offset) <= 1e-9
    }

    /// Marginal azimuth density at `azimuth`, per degree.
    pub fn azimuth_density(&self, azimuth: f64) -> f64 {
        if !self.contains_azimuth(azimuth) {
            0.0
        } else if self.azimuth_width() == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.azimuth_width()
        }
    }
}

/// Draws `t` i.i.d. positions from the prior, returned in global Cartesian
/// coordinates.
pub fn sample_prior(
    prior: &PositionPrior,
    t: usize,
    ris_center: &CartesianPosition,
    seed: u64,
) -> Result<Vec<CartesianPosition>> {
    prior.validate()?;
    if t == 0 {
        return Err(Error::invalid("need at least one prior sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
    (0..t)
        .map(|_| {
            let az = lerp(prior.azimuth, unit.sample(&mut rng));
            let d = lerp(prior.range, unit.sample(&mut rng));
            let el = lerp(prior.elevation, unit.sample(&mut rng));
            let pp = PolarPosition::new(az, el, d, Frame::RisCentered)?;
            Ok(polar_to_cartesian(&pp, ris_center))
        })
        .collect()
}

/// Equivalent uplink channel `H(p) = diag(h(p)^*) G` (N×M). Its Gram matrix
/// `H H^H` turns the received SNR into the quadratic form `(P/σ²) v^H H H^H v`.
pub fn build_equivalent_channel(
    p: &CartesianPosition,
    g: &ApRisLink,
    sc: &Scenario,
) -> Result<DMatrix<C64>> {
    let h = build_ue_channel(p, sc, &sc.ris_center())?;
    if h.vector.len() != g.matrix.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "UE channel of length {} for a link with {} RIS rows",
            h.vector.len(),
            g.matrix.nrows()
        )));
    }
    let mut out = g.matrix.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= h.vector[i].conj();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamformOptions {
    /// Prior samples `T`.
    pub samples: usize,
    /// Thin to at most this many constraints; `None` keeps all samples.
    pub max_constraints: Option<usize>,
    /// Gaussian randomization draws `K`.
    pub randomizations: usize,
    pub sdp_tol: f64,
    pub sdp_max_iterations: usize,
}

impl Default for BeamformOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            max_constraints: Some(200),
            randomizations: 500,
            sdp_tol: 1e-6,
            sdp_max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamformResult {
    pub config: RisConfiguration,
    /// Relaxed optimum `min_t tr(H̄_t V)`.
    pub relaxed_objective: f64,
    /// `min_t v^H H̄_t v` for the rounded configuration.
    pub rounded_objective: f64,
    pub sdp_iterations: usize,
    /// Positions that entered the constraint set.
    pub samples: Vec<CartesianPosition>,
    pub relaxed: DMatrix<C64>,
}

/// Keeps `max` samples spread evenly in azimuth order.
fn thin_samples(
    mut samples: Vec<CartesianPosition>,
    max: usize,
    ris_center: &CartesianPosition,
) -> Vec<CartesianPosition> {
    if max == 0 || samples.len() <= max {
        return samples;
    }
    let az = |p: &CartesianPosition| (p.y - ris_center.y).atan2(p.x - ris_center.x);
    samples.sort_by(|a, b| az(a).total_cmp(&az(b)));
    let last = samples.len() - 1;
    (0..max)
        .map(|i| {
            let idx = if max == 1 { 0 } else { (i * last + (max - 1) / 2) / (max - 1) };
            samples[idx]
        })
        .collect()
}

/// Builds the max-min problem for a set of positions.
pub fn maxmin_problem(
    positions: &[CartesianPosition],
    g: &ApRisLink,
    sc: &Scenario,
) -> Result<MaxMinSdpProblem> {
    let grams = positions
        .iter()
        .map(|p| Ok(GramMatrix::from_factor(build_equivalent_channel(p, g, sc)?)))
        .collect::<Result<Vec<_>>>()?;
    MaxMinSdpProblem::new(grams)
}

/// Samples the prior, solves the relaxed max-min problem and rounds the
/// result to a unit-modulus configuration.
pub fn optimize_ris(
    prior: &PositionPrior,
    sc: &Scenario,
    g: &ApRisLink,
    opts: &BeamformOptions,
    seed: u64,
) -> Result<BeamformResult> {
    let center = sc.ris_center();
    let drawn = sample_prior(prior, opts.samples, &center, seeds::derive(seed, &[0]))?;
    let samples = match opts.max_constraints {
        Some(max) => thin_samples(drawn, max, &center),
        None => drawn,
    };
    let prob = maxmin_problem(&samples, g, sc)?;
    let sdp_opts = SdpOptions {
        tol: opts.sdp_tol,
        max_iterations: opts.sdp_max_iterations,
    };
    let sol = solve_maxmin_sdp(&prob, &sdp_opts)?;
    let rounded = gaussian_randomization(&sol, &prob, opts.randomizations, seeds::derive(seed, &[1]))?;
    Ok(BeamformResult {
        config: RisConfiguration::new(rounded.v)?,
        relaxed_objective: sol.objective,
        rounded_objective: rounded.objective,
        sdp_iterations: sol.iterations,
        samples,
        relaxed: sol.v.into_matrix(),
    })
}

/// Power delivered to the AP from a unit test source at each azimuth,
/// `‖G^H Φ^H b(θ)‖²`, in the horizontal plane.
pub fn beam_pattern(
    config: &RisConfiguration,
    g: &ApRisLink,
    sc: &Scenario,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::invalid("beam pattern grid is empty"));
    }
    if config.len() != g.matrix.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "configuration of length {} for {} RIS elements",
            config.len(),
            g.matrix.nrows()
        )));
    }
    let gh = g.matrix.adjoint();
    grid.iter()
        .map(|&theta| {
            let b = sc.ris_steering(theta, 0.0)?.into_entries();
            Ok((theta, (&gh * config.v().component_mul(&b)).norm_squared()))
        })
        .collect()
}

/// Average pattern of the Gaussian randomization ensemble for a relaxed
/// solution `V`, `tr(G^H diag(b) V^T diag(b)^H G)`.
pub fn relaxed_beam_pattern(
    relaxed: &DMatrix<C64>,
    g: &ApRisLink,
    sc: &Scenario,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::invalid("beam pattern grid is empty"));
    }
    grid.iter()
        .map(|&theta| {
            let b = sc.ris_steering(theta, 0.0)?.into_entries();
            // E ‖G^H (v ∘ b)‖² with E[v v^H] = V
            let mut m = g.matrix.clone();
            for (i, mut row) in m.row_iter_mut().enumerate() {
                row *= b[i].conj();
            }
            let gram = &m * m.adjoint();
            let val: C64 = gram.iter().zip(relaxed.iter()).map(|(a, v)| a * v).sum();
            Ok((theta, val.re))
        })
        .collect()
}
