//! MMSE equalization, MUSIC direction finding and Zadoff-Chu ranging.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::beamform::RisConfiguration;
use crate::channel::{ApRisLink, ReceivedBlock, Scenario};
use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::C64;

/// MMSE filter `W = (Φ G G^H Φ^H + (σ²/P) I)^{-1} Φ G`, N×M.
pub fn mmse_filter(g: &ApRisLink, phi: &RisConfiguration, sc: &Scenario) -> Result<DMatrix<C64>> {
    let n = g.matrix.nrows();
    if phi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "configuration of length {} for {n} RIS elements",
            phi.len()
        )));
    }
    let mut pg = g.matrix.clone();
    for (i, mut row) in pg.row_iter_mut().enumerate() {
        row *= phi.v()[i].conj();
    }
    // (A A^H + r I)^{-1} A = Σ (A v_j) v_j^H / (λ_j + r) over A^H A = Σ λ_j v_j v_j^H,
    // stable for r → 0
    let reg = sc.noise_to_power();
    let gram = pg.adjoint() * &pg;
    let eig = SymmetricEigen::new((&gram + gram.adjoint()) * C64::new(0.5, 0.0));
    let av = &pg * &eig.eigenvectors;
    let s: Vec<f64> = av.column_iter().map(|c| c.norm()).collect();
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::EstimationFailure("AP-RIS link through the RIS is zero".into()));
    }
    let mut w = DMatrix::zeros(n, pg.ncols());
    for (j, &sj) in s.iter().enumerate() {
        if sj > s_max * 1e-12 {
            let vj = eig.eigenvectors.column(j);
            let lam = eig.eigenvalues[j].max(0.0);
            w += av.column(j) * vj.adjoint() * C64::new(1.0 / (lam + reg), 0.0);
        }
    }
    Ok(w)
}

/// `x(n) = (1/√P) W y(n) s(n)*`, one column per slot.
pub fn equalize(y: &ReceivedBlock, w: &DMatrix<C64>, sc: &Scenario) -> Result<DMatrix<C64>> {
    if w.ncols() != y.samples.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "filter with {} columns for {} receive antennas",
            w.ncols(),
            y.samples.nrows()
        )));
    }
    if y.sequence.len() != y.samples.ncols() {
        return Err(Error::DimensionMismatch("sequence length differs from block length".into()));
    }
    let mut x = w * &y.samples;
    let scale = 1.0 / sc.tx_power.sqrt();
    for (n, mut col) in x.column_iter_mut().enumerate() {
        col *= y.sequence[n].conj() * scale;
    }
    Ok(x)
}

/// MUSIC metric over an azimuth grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudospectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Pseudospectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Index of the largest value. Values within a relative `1e-9` of each
    /// other count as equal and the first one wins.
    pub fn peak_index(&self) -> Option<usize> {
        peak_in(&self.values, 0..self.values.len())
    }

    /// Peak over median, a measure of how pronounced the peak is.
    pub fn peak_to_median(&self) -> f64 {
        sharpness(&self.values)
    }

    /// Grid argmax refined by a parabola through the log-values of the peak
    /// and its two neighbours.
    pub fn refined_peak(&self) -> Option<f64> {
        let k = self.peak_index()?;
        Some(refine(&self.grid, &self.values, k, 0..self.values.len()))
    }

    /// Sub-spectrum restricted to `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Pseudospectrum {
        let (grid, values) = self
            .grid
            .iter()
            .zip(&self.values)
            .filter(|(g, _)| **g >= lo - 1e-9 && **g <= hi + 1e-9)
            .map(|(g, v)| (*g, *v))
            .unzip();
        Pseudospectrum { grid, values }
    }
}

fn peak_in(values: &[f64], range: std::ops::Range<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in range {
        match best {
            None => best = Some(k),
            Some(b) if values[k] > values[b] * (1.0 + 1e-9) => best = Some(k),
            _ => {}
        }
    }
    best
}

fn sharpness(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let peak = sorted[sorted.len() - 1];
    if median > 0.0 {
        peak / median
    } else {
        f64::INFINITY
    }
}

fn refine(grid: &[f64], values: &[f64], k: usize, range: std::ops::Range<usize>) -> f64 {
    if k == range.start || k + 1 >= range.end {
        return grid[k];
    }
    let (a, b, c) = (values[k - 1].ln(), values[k].ln(), values[k + 1].ln());
    let denom = a - 2.0 * b + c;
    if !(denom < 0.0) || !denom.is_finite() {
        return grid[k];
    }
    let offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    let step = if offset >= 0.0 {
        grid[k + 1] - grid[k]
    } else {
        grid[k] - grid[k - 1]
    };
    grid[k] + offset * step
}

/// Unit-norm dominant eigenvector of the sample covariance of `x`.
fn signal_subspace(x: &DMatrix<C64>) -> Result<DVector<C64>> {
    if x.ncols() < 2 {
        return Err(Error::invalid("MUSIC needs at least two snapshots"));
    }
    let r = (x * x.adjoint()) / C64::new(x.ncols() as f64, 0.0);
    let r = (&r + r.adjoint()) * C64::new(0.5, 0.0);
    let total: f64 = (0..r.nrows()).map(|i| r[(i, i)].re).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::EstimationFailure("snapshots carry no energy".into()));
    }
    let eig = SymmetricEigen::new(r);
    let top = (0..eig.eigenvalues.len())
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("nonempty");
    Ok(eig.eigenvectors.column(top).into_owned())
}

/// `1 / ‖E_n^H a‖²`, computed as `1 / (‖a‖² - |e_s^H a|²)` for a one-dimensional
/// signal subspace `e_s`.
fn music_metric(es: &DVector<C64>, a: &DVector<C64>) -> f64 {
    let na = a.norm_squared();
    let proj = es.dotc(a).norm_sqr();
    let residual = (na - proj).max(na * 1e-15);
    if residual > 0.0 {
        1.0 / residual
    } else {
        0.0
    }
}

/// Single-source MUSIC with a caller-supplied steering model.
pub fn music_with_steering<F>(
    x: &DMatrix<C64>,
    grid: &[f64],
    mut steering: F,
) -> Result<(Pseudospectrum, f64)>
where
    F: FnMut(f64) -> Result<DVector<C64>>,
{
    if grid.is_empty() {
        return Err(Error::invalid("MUSIC grid is empty"));
    }
    let es = signal_subspace(x)?;
    let values = grid
        .iter()
        .map(|&theta| {
            let a = steering(theta)?;
            if a.len() != es.len() {
                return Err(Error::DimensionMismatch(format!(
                    "steering vector of length {} for {} sensors",
                    a.len(),
                    es.len()
                )));
            }
            Ok(music_metric(&es, &a))
        })
        .collect::<Result<Vec<_>>>()?;
    let spectrum = Pseudospectrum {
        grid: grid.to_vec(),
        values,
    };
    let theta = spectrum.refined_peak().expect("nonempty grid");
    Ok((spectrum, theta))
}

/// Azimuth MUSIC on RIS-domain snapshots (N×L) with the RIS array response
/// in the horizontal plane.
pub fn music_doa(x: &DMatrix<C64>, grid: &[f64], sc: &Scenario) -> Result<(Pseudospectrum, f64)> {
    music_with_steering(x, grid, |theta| Ok(sc.ris_steering(theta, 0.0)?.into_entries()))
}

/// Joint azimuth/elevation MUSIC. Returns values indexed `[azimuth][elevation]`
/// and the grid argmax.
pub fn music_doa_2d(
    x: &DMatrix<C64>,
    azimuths: &[f64],
    elevations: &[f64],
    sc: &Scenario,
) -> Result<(Vec<Vec<f64>>, (f64, f64))> {
    if azimuths.is_empty() || elevations.is_empty() {
        return Err(Error::invalid("MUSIC grid is empty"));
    }
    let es = signal_subspace(x)?;
    let mut values = Vec::with_capacity(azimuths.len());
    let mut best = (f64::NEG_INFINITY, (azimuths[0], elevations[0]));
    for &az in azimuths {
        let mut row = Vec::with_capacity(elevations.len());
        for &el in elevations {
            let v = music_metric(&es, sc.ris_steering(az, el)?.entries());
            if v > best.0 * (1.0 + 1e-9) {
                best = (v, (az, el));
            }
            row.push(v);
        }
        values.push(row);
    }
    Ok((values, best.1))
}

/// Zadoff-Chu sequence `s(n) = exp(-jπ n(n+1)/L)`, `n = 1..L`, `L` odd.
#[derive(Debug, Clone, PartialEq)]
pub struct ZcSequence {
    samples: Vec<C64>,
}

impl ZcSequence {
    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn zc_sequence(l: usize) -> Result<ZcSequence> {
    if l < 3 || l % 2 == 0 {
        return Err(Error::invalid(format!("ZC length must be odd and >= 3, got {l}")));
    }
    let lf = l as f64;
    let samples = (1..=l as u64)
        .map(|n| {
            // reduce n(n+1) mod 2L before scaling to keep the phase exact
            let k = (n * (n + 1)) % (2 * l as u64);
            C64::from_polar(1.0, -PI * k as f64 / lf)
        })
        .collect();
    Ok(ZcSequence { samples })
}

/// Unnormalized periodic autocorrelation `R(m) = Σ_n s(n) s(n-m)*`.
pub fn periodic_autocorrelation(s: &[C64]) -> Vec<C64> {
    dsp::circular_xcorr(s, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaOptions {
    /// Upsampling factor `U`.
    pub upsample: usize,
    /// Minimum accepted peak-to-median ratio of the correlation.
    pub min_peak_to_median: f64,
}

impl Default for ToaOptions {
    fn default() -> Self {
        Self {
            upsample: 32,
            min_peak_to_median: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaEstimate {
    /// Delay in seconds.
    pub tau: f64,
    /// Delay in (fractional) samples at the base rate.
    pub lag: f64,
    /// `τ c - d_G`.
    pub distance: f64,
    pub peak_to_median: f64,
    /// False when the distance came out negative.
    pub valid: bool,
}

/// Delay estimate from the noncoherent sum of per-antenna circular
/// cross-correlations with the known sequence, after band-limited
/// upsampling by `U`.
pub fn toa_estimate(
    y: &ReceivedBlock,
    s: &ZcSequence,
    sc: &Scenario,
    opts: &ToaOptions,
) -> Result<ToaEstimate> {
    if opts.upsample == 0 {
        return Err(Error::invalid("upsampling factor must be >= 1"));
    }
    let l = s.len();
    if y.samples.ncols() != l {
        return Err(Error::DimensionMismatch(format!(
            "block of {} slots for a sequence of length {l}",
            y.samples.ncols()
        )));
    }
    let u = opts.upsample;
    let s_up = dsp::upsample(s.samples(), u);
    let mut acc = vec![0.0; l * u];
    for row in y.samples.row_iter() {
        let r: Vec<C64> = row.iter().copied().collect();
        let corr = dsp::circular_xcorr(&dsp::upsample(&r, u), &s_up);
        for (a, c) in acc.iter_mut().zip(&corr) {
            *a += c.norm();
        }
    }
    let peak = (0..acc.len())
        .max_by(|&a, &b| acc[a].total_cmp(&acc[b]))
        .expect("nonempty");
    let ratio = sharpness(&acc);
    if !(ratio >= opts.min_peak_to_median) {
        return Err(Error::EstimationFailure(format!(
            "correlation peak-to-median ratio {ratio:.2} below {}",
            opts.min_peak_to_median
        )));
    }
    let lag = peak as f64 / u as f64;
    let tau = lag / sc.sample_rate;
    let distance = tau * sc.speed_of_light - sc.d_g;
    Ok(ToaEstimate {
        tau,
        lag,
        distance,
        peak_to_median: ratio,
        valid: distance >= 0.0,
    })
}
