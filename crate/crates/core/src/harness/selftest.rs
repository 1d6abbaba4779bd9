//! Quick invariant checks runnable from the command line.

use serde::Serialize;

use crate::beamform::{optimize_ris, BeamformOptions, PositionPrior, RisConfiguration};
use crate::channel::{build_ap_ris_link, build_ue_channel, snr, synthesize_rx_delayed, Scenario};
use crate::estimate::{periodic_autocorrelation, toa_estimate, zc_sequence, ToaOptions};
use crate::geometry::{polar_to_cartesian, Frame, PolarPosition};
use crate::papir::{subdivide, SearchArea};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn run() -> Vec<Check> {
    let sc = Scenario::default();
    vec![
        check("steering vectors have unit modulus", || {
            let worst = (0..360)
                .map(|a| {
                    sc.ris_steering(a as f64, 10.0).map(|b| {
                        b.entries().iter().map(|e| (e.norm() - 1.0).abs()).fold(0.0, f64::max)
                    })
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
        }),
        check("link Frobenius norm", || {
            let g = build_ap_ris_link(&sc)?;
            let want = g.gain * (sc.n() * sc.m) as f64;
            let got = g.matrix.norm_squared();
            Ok(((got - want).abs() < 1e-12 * want, format!("{got:.6e} vs {want:.6e}")))
        }),
        check("ZC autocorrelation sidelobes", || {
            let mut worst: f64 = 0.0;
            for l in [63, 127, 839] {
                let r = periodic_autocorrelation(zc_sequence(l)?.samples());
                let side = r[1..].iter().map(|v| v.norm()).fold(0.0, f64::max);
                worst = worst.max(side / r[0].norm());
            }
            Ok((worst < 1e-9, format!("max ratio {worst:.2e}")))
        }),
        check("point-prior beam reaches matched SNR", || {
            let g = build_ap_ris_link(&sc)?;
            let prior = PositionPrior::uniform_sector((300.0, 300.0), (70.0, 70.0), 0.0)?;
            let opts = BeamformOptions {
                samples: 20,
                randomizations: 50,
                ..Default::default()
            };
            let bf = optimize_ris(&prior, &sc, &g, &opts, 1)?;
            let p = polar_to_cartesian(
                &PolarPosition::new(300.0, 0.0, 70.0, Frame::RisCentered)?,
                &sc.ris_center(),
            );
            let h = build_ue_channel(&p, &sc, &sc.ris_center())?;
            let n = sc.n() as f64;
            let opt = sc.tx_power * h.gain * g.gain * sc.m as f64 * n * n / sc.noise_power;
            let got = snr(&h, &g, &bf.config, &sc)?;
            Ok((got >= 0.95 * opt, format!("{:.4} of optimum", got / opt)))
        }),
        check("noiseless ranging within half an upsampled step", || {
            let quiet = Scenario {
                noise_power: 1e-300,
                ..sc.clone()
            };
            let g = build_ap_ris_link(&quiet)?;
            let p = polar_to_cartesian(
                &PolarPosition::new(300.0, 0.0, 70.0, Frame::RisCentered)?,
                &quiet.ris_center(),
            );
            let h = build_ue_channel(&p, &quiet, &quiet.ris_center())?;
            let s = zc_sequence(63)?;
            let delay = (70.0 + quiet.d_g) / quiet.speed_of_light;
            let y = synthesize_rx_delayed(&h, &g, &RisConfiguration::ones(quiet.n()), s.samples(), delay, &quiet, 0)?;
            let est = toa_estimate(&y, &s, &quiet, &ToaOptions::default())?;
            let bound = quiet.speed_of_light / (2.0 * 32.0 * quiet.sample_rate) + 1e-3;
            let err = (est.distance - 70.0).abs();
            Ok((err <= bound, format!("error {err:.4} m, bound {bound:.4} m")))
        }),
        check("subdivision with overlap", || {
            let area = SearchArea::new((260.0, 320.0), (20.0, 80.0), 0.0)?;
            let subs = subdivide(&area, 3, 0.2)?;
            let got: Vec<(f64, f64)> = subs.iter().map(|s| s.azimuth).collect();
            let want = [(260.0, 282.0), (278.0, 302.0), (298.0, 320.0)];
            let ok = got
                .iter()
                .zip(want)
                .all(|(a, b)| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            Ok((ok, format!("{got:?}")))
        }),
    ]
}
