//! Coordinate frames, angle conventions and array response vectors.
//!
//! The AP sits at the origin of the global frame. Azimuth is measured
//! counterclockwise from the global +x axis and elevation from the xy-plane.
//! The RIS-centered frame is the global frame translated to the RIS center,
//! with no rotation. Angles cross the public API in degrees.

use std::f64::consts::PI;

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianPosition {
    pub const ORIGIN: CartesianPosition = CartesianPosition {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite position [{x}, {y}, {z}]"
            )));
        }
        Ok(Self { x, y, z })
    }

    pub fn distance(&self, other: &CartesianPosition) -> f64 {
        self.sub(other).norm()
    }

    pub fn sub(&self, other: &CartesianPosition) -> CartesianPosition {
        CartesianPosition {
            x: self.x - other.x,
            y: self.y - other.y,
            z: self.z - other.z,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Global,
    RisCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPosition {
    azimuth: f64,
    elevation: f64,
    range: f64,
    frame: Frame,
}

impl PolarPosition {
    /// Azimuth is wrapped into `[0, 360)`.
    pub fn new(azimuth_deg: f64, elevation_deg: f64, range: f64, frame: Frame) -> Result<Self> {
        if !(azimuth_deg.is_finite() && elevation_deg.is_finite() && range.is_finite()) {
            return Err(Error::invalid("non-finite polar coordinate"));
        }
        if !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(Error::invalid(format!(
                "elevation {elevation_deg} outside [-90, 90]"
            )));
        }
        if range < 0.0 {
            return Err(Error::invalid(format!("negative range {range}")));
        }
        Ok(Self {
            azimuth: wrap_degrees(azimuth_deg),
            elevation: elevation_deg,
            range,
            frame,
        })
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Smallest absolute difference between two azimuths, in degrees.
pub fn angular_distance(a_deg: f64, b_deg: f64) -> f64 {
    let d = wrap_degrees(a_deg - b_deg);
    d.min(360.0 - d)
}

/// Converts a polar position to global Cartesian coordinates. For the
/// RIS-centered frame the result is offset by `ris_center`; for the global
/// frame `ris_center` is ignored.
pub fn polar_to_cartesian(pp: &PolarPosition, ris_center: &CartesianPosition) -> CartesianPosition {
    let origin = match pp.frame {
        Frame::Global => CartesianPosition::ORIGIN,
        Frame::RisCentered => *ris_center,
    };
    let (az, el) = (pp.azimuth.to_radians(), pp.elevation.to_radians());
    CartesianPosition {
        x: origin.x + pp.range * el.cos() * az.cos(),
        y: origin.y + pp.range * el.cos() * az.sin(),
        z: origin.z + pp.range * el.sin(),
    }
}

/// Inverse of [`polar_to_cartesian`]. At zero range the angles are reported
/// as zero.
pub fn cartesian_to_polar(
    p: &CartesianPosition,
    ris_center: &CartesianPosition,
    frame: Frame,
) -> Result<PolarPosition> {
    let rel = match frame {
        Frame::Global => *p,
        Frame::RisCentered => p.sub(ris_center),
    };
    let range = rel.norm();
    if range == 0.0 {
        return PolarPosition::new(0.0, 0.0, 0.0, frame);
    }
    let azimuth = rel.y.atan2(rel.x).to_degrees();
    let elevation = (rel.z / range).clamp(-1.0, 1.0).asin().to_degrees();
    PolarPosition::new(azimuth, elevation, range, frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayGeometry {
    Ula { m: usize },
    Pla { nx: usize, ny: usize },
}

impl ArrayGeometry {
    pub fn len(&self) -> usize {
        match *self {
            ArrayGeometry::Ula { m } => m,
            ArrayGeometry::Pla { nx, ny } => nx * ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Array response vector. Every entry has unit modulus and the first one is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    entries: DVector<C64>,
    geometry: ArrayGeometry,
    spacing: f64,
}

impl SteeringVector {
    pub fn entries(&self) -> &DVector<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DVector<C64> {
        self.entries
    }

    pub fn geometry(&self) -> ArrayGeometry {
        self.geometry
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_spacing(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("spacing ratio {delta} must be > 0")));
    }
    Ok(())
}

fn phase_ramp(len: usize, phase_step: f64) -> impl Iterator<Item = C64> {
    (0..len).map(move |k| C64::from_polar(1.0, phase_step * k as f64))
}

/// ULA response at the AP: entry `k` is `exp(j 2π δ k cos ψ)`.
pub fn ula_response(psi_deg: f64, m: usize, delta: f64) -> Result<SteeringVector> {
    if !psi_deg.is_finite() {
        return Err(Error::invalid("non-finite steering angle"));
    }
    if m == 0 {
        return Err(Error::invalid("ULA needs at least one element"));
    }
    check_spacing(delta)?;
    let step = 2.0 * PI * delta * psi_deg.to_radians().cos();
    Ok(SteeringVector {
        entries: DVector::from_iterator(m, phase_ramp(m, step)),
        geometry: ArrayGeometry::Ula { m },
        spacing: delta,
    })
}

/// PLA response at the RIS, `b_z ⊗ b_x`. The y-axis factor (length `ny`)
/// advances by `2π δ sin(ψ_z) cos(ψ_x)` per element and the x-axis factor
/// (length `nx`) by `2π δ sin(ψ_x) cos(ψ_z)`. Entry `ky * nx + kx` is
/// `b_z[ky] * b_x[kx]`.
pub fn pla_response(
    psi_z_deg: f64,
    psi_x_deg: f64,
    nx: usize,
    ny: usize,
    delta: f64,
) -> Result<SteeringVector> {
    if !(psi_z_deg.is_finite() && psi_x_deg.is_finite()) {
        return Err(Error::invalid("non-finite steering angle"));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("PLA needs at least one element per axis"));
    }
    check_spacing(delta)?;
    let (z, x) = (psi_z_deg.to_radians(), psi_x_deg.to_radians());
    let step_y = 2.0 * PI * delta * z.sin() * x.cos();
    let step_x = 2.0 * PI * delta * x.sin() * z.cos();
    let bz: Vec<C64> = phase_ramp(ny, step_y).collect();
    let bx: Vec<C64> = phase_ramp(nx, step_x).collect();
    let entries = DVector::from_iterator(
        nx * ny,
        bz.iter().flat_map(|&a| bx.iter().map(move |&b| a * b)),
    );
    Ok(SteeringVector {
        entries,
        geometry: ArrayGeometry::Pla { nx, ny },
        spacing: delta,
    })
}
