//! Line-of-sight AP–RIS and UE–RIS channels, received-signal synthesis and
//! sum SNR.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::beamform::RisConfiguration;
use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::{
    cartesian_to_polar, pla_response, polar_to_cartesian, ula_response, CartesianPosition, Frame,
    PolarPosition, SteeringVector, C64,
};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Physical constants and array geometry of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// AP antenna count.
    pub m: usize,
    pub nx: usize,
    pub ny: usize,
    /// AP–RIS distance (m).
    pub d_g: f64,
    /// AoD azimuth at the RIS (deg); also the azimuth of the RIS seen from the AP.
    pub psi_d_x: f64,
    /// AoD elevation at the RIS (deg).
    pub psi_d_z: f64,
    /// AoA at the AP (deg).
    pub psi_a: f64,
    /// UE transmit power (W).
    pub tx_power: f64,
    /// Noise power per AP antenna (W).
    pub noise_power: f64,
    pub pathloss_exponent: f64,
    /// Element spacing over wavelength.
    pub spacing: f64,
    /// Sampling frequency (Hz).
    pub sample_rate: f64,
    pub speed_of_light: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            m: 4,
            nx: 4,
            ny: 4,
            d_g: 50.0,
            psi_d_x: 225.0,
            psi_d_z: 0.0,
            psi_a: 45.0,
            tx_power: dbm_to_watts(20.0),
            noise_power: dbm_to_watts(-80.0),
            pathloss_exponent: 2.0,
            spacing: 0.5,
            sample_rate: 30.72e6,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

impl Scenario {
    /// RIS element count.
    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("array sizes must be positive"));
        }
        if self.m >= self.n() {
            return Err(Error::invalid(format!(
                "AP antennas ({}) must be fewer than RIS elements ({})",
                self.m,
                self.n()
            )));
        }
        let positive = [
            ("d_g", self.d_g),
            ("tx_power", self.tx_power),
            ("noise_power", self.noise_power),
            ("spacing", self.spacing),
            ("sample_rate", self.sample_rate),
            ("speed_of_light", self.speed_of_light),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("psi_d_x", self.psi_d_x),
            ("psi_d_z", self.psi_d_z),
            ("psi_a", self.psi_a),
            ("pathloss_exponent", self.pathloss_exponent),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// RIS center in the global frame.
    pub fn ris_center(&self) -> CartesianPosition {
        let pp = PolarPosition::new(self.psi_d_x, self.psi_d_z, self.d_g, Frame::Global)
            .expect("validated scenario angles");
        polar_to_cartesian(&pp, &CartesianPosition::ORIGIN)
    }

    /// RIS response toward a direction given in the RIS-centered frame.
    pub fn ris_steering(&self, azimuth_deg: f64, elevation_deg: f64) -> Result<SteeringVector> {
        pla_response(elevation_deg, azimuth_deg, self.nx, self.ny, self.spacing)
    }

    /// Noise-to-signal power ratio `σ²/P` used as MMSE regularizer.
    pub fn noise_to_power(&self) -> f64 {
        self.noise_power / self.tx_power
    }
}

/// Power-law channel gain `d^-β`.
pub fn pathloss(d: f64, beta: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid(format!("pathloss distance {d} must be > 0")));
    }
    Ok(d.powf(-beta))
}

/// RIS→AP link `G = √γ_G b(ψ_D) a(ψ_A)^H`, an N×M rank-one matrix.
#[derive(Debug, Clone)]
pub struct ApRisLink {
    pub matrix: DMatrix<C64>,
    pub gain: f64,
    pub ris_steering: DVector<C64>,
    pub ap_steering: DVector<C64>,
}

pub fn build_ap_ris_link(sc: &Scenario) -> Result<ApRisLink> {
    sc.validate()?;
    let gain = pathloss(sc.d_g, sc.pathloss_exponent)?;
    let b = pla_response(sc.psi_d_z, sc.psi_d_x, sc.nx, sc.ny, sc.spacing)?.into_entries();
    let a = ula_response(sc.psi_a, sc.m, sc.spacing)?.into_entries();
    let matrix = (&b * a.adjoint()) * C64::new(gain.sqrt(), 0.0);
    Ok(ApRisLink {
        matrix,
        gain,
        ris_steering: b,
        ap_steering: a,
    })
}

/// UE→RIS line-of-sight channel `h(p) = √γ b(θ)`.
#[derive(Debug, Clone)]
pub struct UeRisChannel {
    pub vector: DVector<C64>,
    pub gain: f64,
    pub position: CartesianPosition,
    /// Direction of the UE in the RIS-centered frame.
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

pub fn build_ue_channel(
    p: &CartesianPosition,
    sc: &Scenario,
    ris_center: &CartesianPosition,
) -> Result<UeRisChannel> {
    let polar = cartesian_to_polar(p, ris_center, Frame::RisCentered)?;
    if polar.range() == 0.0 {
        return Err(Error::invalid("UE coincides with the RIS center"));
    }
    let gain = pathloss(polar.range(), sc.pathloss_exponent)?;
    let b = sc.ris_steering(polar.azimuth(), polar.elevation())?;
    Ok(UeRisChannel {
        vector: b.into_entries() * C64::new(gain.sqrt(), 0.0),
        gain,
        position: *p,
        azimuth: polar.azimuth(),
        elevation: polar.elevation(),
        distance: polar.range(),
    })
}

/// `M × L` block of received uplink samples.
#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    /// Column `n` is `y(p, n)`.
    pub samples: DMatrix<C64>,
    /// The known (undelayed) transmit sequence.
    pub sequence: DVector<C64>,
    pub config: RisConfiguration,
}

impl ReceivedBlock {
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }
}

/// Noiseless received vector per unit transmit symbol,
/// `√P G^H Φ^H h` with `Φ^H = diag(v)`.
pub fn received_signature(
    h: &UeRisChannel,
    g: &ApRisLink,
    phi: &RisConfiguration,
    sc: &Scenario,
) -> Result<DVector<C64>> {
    let n = g.matrix.nrows();
    if h.vector.len() != n || phi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "RIS size: link {n}, channel {}, configuration {}",
            h.vector.len(),
            phi.len()
        )));
    }
    let reflected = phi.v().component_mul(&h.vector);
    Ok(g.matrix.adjoint() * reflected * C64::new(sc.tx_power.sqrt(), 0.0))
}

/// Synthesizes `L` slots of flat-fading uplink with a time-invariant RIS
/// configuration and i.i.d. `CN(0, σ² I)` noise.
pub fn synthesize_rx(
    h: &UeRisChannel,
    g: &ApRisLink,
    phi: &RisConfiguration,
    s: &[C64],
    sc: &Scenario,
    seed: u64,
) -> Result<ReceivedBlock> {
    synthesize_rx_delayed(h, g, phi, s, 0.0, sc, seed)
}

/// As [`synthesize_rx`], but the sequence reaches the AP after `delay`
/// seconds. The delay is applied as a circular band-limited shift of `s` at
/// the sampling rate.
pub fn synthesize_rx_delayed(
    h: &UeRisChannel,
    g: &ApRisLink,
    phi: &RisConfiguration,
    s: &[C64],
    delay: f64,
    sc: &Scenario,
    seed: u64,
) -> Result<ReceivedBlock> {
    if s.is_empty() {
        return Err(Error::invalid("empty transmit sequence"));
    }
    if s.iter().any(|v| (v.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::invalid("transmit sequence must have unit modulus"));
    }
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(Error::invalid(format!("delay {delay} must be >= 0")));
    }
    let signature = received_signature(h, g, phi, sc)?;
    let arriving = if delay == 0.0 {
        s.to_vec()
    } else {
        dsp::fractional_circular_shift(s, delay * sc.sample_rate)
    };

    let m = signature.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (sc.noise_power / 2.0).sqrt())
        .map_err(|e| Error::invalid(e.to_string()))?;
    let samples = DMatrix::from_fn(m, s.len(), |i, n| signature[i] * arriving[n]);
    // column-major fill keeps the noise stream order independent of signature
    let noise = DMatrix::from_fn(m, s.len(), |_, _| {
        C64::new(normal.sample(&mut rng), normal.sample(&mut rng))
    });
    Ok(ReceivedBlock {
        samples: samples + noise,
        sequence: DVector::from_column_slice(s),
        config: phi.clone(),
    })
}

/// Received sum SNR `P ‖G^H Φ^H h‖² / σ²`.
pub fn snr(h: &UeRisChannel, g: &ApRisLink, phi: &RisConfiguration, sc: &Scenario) -> Result<f64> {
    Ok(received_signature(h, g, phi, sc)?.norm_squared() / sc.noise_power)
}
