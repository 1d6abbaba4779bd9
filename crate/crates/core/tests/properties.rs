use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use papir::beamform::{maxmin_problem, optimize_ris, sample_prior, BeamformOptions, PositionPrior, RisConfiguration};
use papir::channel::{build_ap_ris_link, build_ue_channel, snr, synthesize_rx, synthesize_rx_delayed, Scenario};
use papir::estimate::{music_doa, toa_estimate, zc_sequence, ToaOptions};
use papir::geometry::{angular_distance, cartesian_to_polar, polar_to_cartesian, Frame, PolarPosition, C64};
use papir::harness::{compute_rmse, parse_config, run_campaign};
use papir::papir::{run_papir, subdivide, PapirConfig, SearchArea};
use papir::sdp::{gaussian_randomization, solve_maxmin_sdp, GramMatrix, MaxMinSdpProblem, SdpOptions};

fn ue_channel(sc: &Scenario, az: f64, d: f64) -> papir::channel::UeRisChannel {
    let center = sc.ris_center();
    let p = polar_to_cartesian(&PolarPosition::new(az, 0.0, d, Frame::RisCentered).unwrap(), &center);
    build_ue_channel(&p, sc, &center).unwrap()
}

fn unit_config(n: usize, rng: &mut ChaCha8Rng) -> RisConfiguration {
    RisConfiguration::new(DVector::from_fn(n, |_, _| C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI))).unwrap()
}

fn light() -> BeamformOptions {
    BeamformOptions {
        samples: 60,
        max_constraints: Some(30),
        randomizations: 60,
        ..BeamformOptions::default()
    }
}

fn fast_papir() -> PapirConfig {
    PapirConfig {
        beamform: light(),
        grid_step: 0.1,
        ..PapirConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn snr_ignores_common_phase(az in 260.0..320.0f64, d in 20.0..80.0f64, phase in 0.0..(2.0 * PI), seed in any::<u64>()) {
        let sc = Scenario::default();
        let g = build_ap_ris_link(&sc).unwrap();
        let h = ue_channel(&sc, az, d);
        let cfg = unit_config(sc.n(), &mut ChaCha8Rng::seed_from_u64(seed));
        let rotated = RisConfiguration::new(cfg.v() * C64::from_polar(1.0, phase)).unwrap();
        let a = snr(&h, &g, &cfg, &sc).unwrap();
        let b = snr(&h, &g, &rotated, &sc).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn phase_matched_configuration_dominates(az in 0.0..360.0f64, d in 5.0..100.0f64, seed in any::<u64>()) {
        let sc = Scenario::default();
        let g = build_ap_ris_link(&sc).unwrap();
        let h = ue_channel(&sc, az, d);
        // v_i = e^{j arg(b_D,i h_i*)} aligns every reflected term
        let u = g.ris_steering.component_mul(&h.vector.map(|e| e.conj()));
        let matched = snr(&h, &g, &RisConfiguration::phase_aligned(&u), &sc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let other = snr(&h, &g, &unit_config(sc.n(), &mut rng), &sc).unwrap();
            prop_assert!(other <= matched * (1.0 + 1e-12));
        }
    }

    #[test]
    fn noiseless_block_is_rank_one(az in 260.0..320.0f64, d in 20.0..80.0f64, seed in any::<u64>()) {
        let sc = Scenario { noise_power: 1e-300, ..Scenario::default() };
        let g = build_ap_ris_link(&sc).unwrap();
        let h = ue_channel(&sc, az, d);
        let cfg = unit_config(sc.n(), &mut ChaCha8Rng::seed_from_u64(seed));
        let y = synthesize_rx(&h, &g, &cfg, zc_sequence(31).unwrap().samples(), &sc, seed).unwrap();
        let sv = y.samples.singular_values();
        prop_assert!(sv[1] <= 1e-9 * sv[0]);
    }

    #[test]
    fn sdp_iterates_are_feasible_and_weakly_dual(n in 2usize..6, t in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cons: Vec<GramMatrix> = (0..t)
            .map(|_| GramMatrix::from_factor(DMatrix::from_fn(n, 2, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))))
            .collect();
        let prob = MaxMinSdpProblem::new(cons).unwrap();
        let sol = solve_maxmin_sdp(&prob, &SdpOptions::default()).unwrap();
        prop_assert!(sol.v.diagonal().iter().all(|&d| d <= 1.0 + 1e-9));
        prop_assert!(sol.v.min_eigenvalue() >= -1e-9);
        for &(p, d) in &sol.trace {
            prop_assert!(p <= d * (1.0 + 1e-9) + 1e-12);
        }
        // rounding never beats the relaxation, and more draws never hurt
        let mut last = f64::NEG_INFINITY;
        for k in [1, 4, 16, 64] {
            let r = gaussian_randomization(&sol, &prob, k, seed).unwrap();
            prop_assert!(r.v.iter().all(|e| (e.norm() - 1.0).abs() < 1e-12));
            prop_assert!(r.objective <= sol.dual_objective * (1.0 + 1e-9));
            prop_assert!(r.objective >= last);
            last = r.objective;
        }
    }

    // θ and 540° - θ share a response; keep the mirror 5° outside the grid
    #[test]
    fn music_grid_halving_is_consistent(theta in 285.0..318.0f64, seed in any::<u64>()) {
        let sc = Scenario::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sc.ris_steering(theta, 0.0).unwrap().into_entries();
        let x = DMatrix::from_fn(16, 32, |i, n| {
            b[i] * C64::from_polar(1.0, 0.3 * n as f64) + C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.05
        });
        let coarse: Vec<f64> = (0..=60).map(|k| 260.0 + k as f64).collect();
        let fine: Vec<f64> = (0..=120).map(|k| 260.0 + 0.5 * k as f64).collect();
        let (_, a) = music_doa(&x, &coarse, &sc).unwrap();
        let (_, f) = music_doa(&x, &fine, &sc).unwrap();
        prop_assert!((a - f).abs() <= 1.0 + 1e-9, "{} vs {}", a, f);
    }

    #[test]
    fn noiseless_ranging_within_half_step(d in 20.0..80.0f64, u in prop::sample::select(vec![1usize, 4, 8, 32])) {
        let sc = Scenario { noise_power: 1e-300, ..Scenario::default() };
        let g = build_ap_ris_link(&sc).unwrap();
        let h = ue_channel(&sc, 290.0, d);
        let s = zc_sequence(63).unwrap();
        let delay = (d + sc.d_g) / sc.speed_of_light;
        let y = synthesize_rx_delayed(&h, &g, &RisConfiguration::ones(sc.n()), s.samples(), delay, &sc, 0).unwrap();
        let est = toa_estimate(&y, &s, &sc, &ToaOptions { upsample: u, ..ToaOptions::default() }).unwrap();
        let bound = sc.speed_of_light / (2.0 * u as f64 * sc.sample_rate) + 1e-3;
        prop_assert!((est.distance - d).abs() <= bound);
    }

    #[test]
    fn subdivision_shrinks_the_area(lo in 0.0..300.0f64, width in 1.0..120.0f64, n_a in 3usize..8, overlap in 0.0..0.95f64) {
        let area = SearchArea::new((lo, lo + width), (20.0, 80.0), 0.0).unwrap();
        let subs = subdivide(&area, n_a, overlap).unwrap();
        prop_assert_eq!(subs.len(), n_a);
        prop_assert!((subs[0].azimuth.0 - lo).abs() < 1e-9);
        prop_assert!((subs[n_a - 1].azimuth.1 - (lo + width)).abs() < 1e-9);
        // any N_A - 1 subareas span less than the whole
        for skip in 0..n_a {
            let kept: Vec<_> = subs.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, s)| s.azimuth).collect();
            let span = kept.iter().map(|a| a.1).fold(f64::MIN, f64::max) - kept.iter().map(|a| a.0).fold(f64::MAX, f64::min);
            prop_assert!(span <= area.width() + 1e-9);
            if skip == 0 || skip == n_a - 1 {
                prop_assert!(span < area.width());
            }
        }
    }

    #[test]
    fn rmse_carry_forward_keeps_last_error(errs in prop::collection::vec(prop::collection::vec(0.0..10.0f64, 1..6), 1..6)) {
        let c = compute_rmse(&errs, 16).unwrap();
        let len = errs.iter().map(Vec::len).max().unwrap();
        prop_assert_eq!(c.rmse.len(), len);
        let last = errs.iter().map(|e| e[e.len() - 1].powi(2)).sum::<f64>() / errs.len() as f64;
        prop_assert!((c.rmse[len - 1] - last.sqrt()).abs() <= 1e-12 * last.sqrt().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn rounded_beam_respects_relaxation(lo in 260.0..300.0f64, w in 1.0..20.0f64, seed in any::<u64>()) {
        let sc = Scenario::default();
        let g = build_ap_ris_link(&sc).unwrap();
        let prior = PositionPrior::uniform_sector((lo, lo + w), (20.0, 80.0), 0.0).unwrap();
        let bf = optimize_ris(&prior, &sc, &g, &light(), seed).unwrap();
        prop_assert!(bf.config.is_unit_modulus(1e-12));
        prop_assert!(bf.rounded_objective <= bf.relaxed_objective * (1.0 + 1e-6));
        let prob = maxmin_problem(&bf.samples, &g, &sc).unwrap();
        prop_assert!((prob.objective_at(bf.config.v()) - bf.rounded_objective).abs() <= 1e-9 * bf.rounded_objective);
    }

    #[test]
    fn run_history_is_complete_and_consistent(az in 262.0..318.0f64, d in 22.0..78.0f64, seed in any::<u64>()) {
        let sc = Scenario::default();
        let prior = PositionPrior::uniform_sector((260.0, 320.0), (20.0, 80.0), 0.0).unwrap();
        let ue = polar_to_cartesian(&PolarPosition::new(az, 0.0, d, Frame::RisCentered).unwrap(), &sc.ris_center());
        let cfg = fast_papir();
        let est = run_papir(&sc, &prior, &ue, &cfg, seed).unwrap();
        prop_assert_eq!(est.history.len(), est.iterations);
        let mut width = f64::INFINITY;
        for rec in &est.history {
            prop_assert_eq!(rec.outcomes.len(), cfg.subareas);
            prop_assert!(rec.outcomes.iter().all(|o| o.estimate.is_some() || o.failure.is_some()));
            prop_assert!(rec.area.width() <= width + 1e-9);
            prop_assert!(rec.next_area.width() <= rec.area.width() + 1e-9);
            width = rec.area.width();
        }
        let back = cartesian_to_polar(&est.p_hat, &sc.ris_center(), Frame::RisCentered).unwrap();
        prop_assert!(angular_distance(back.azimuth(), est.theta_hat) <= 1e-9);
        prop_assert!((back.range() - est.d_hat).abs() <= 1e-9 * est.d_hat.max(1.0));
    }
}

#[test]
fn noise_power_matches_budget() {
    let sc = Scenario::default();
    let g = build_ap_ris_link(&sc).unwrap();
    let h = ue_channel(&sc, 300.0, 70.0);
    let s = vec![C64::new(1.0, 0.0); 10_000];
    let y = synthesize_rx(&h, &g, &RisConfiguration::zeros(sc.n()), &s, &sc, 5).unwrap();
    let mean = y.samples.column_iter().map(|c| c.norm_squared()).sum::<f64>() / 10_000.0;
    let want = sc.m as f64 * sc.noise_power;
    assert!((mean - want).abs() <= 0.05 * want, "{mean} vs {want}");
}

#[test]
fn doa_error_shrinks_with_snr() {
    let sc = Scenario::default();
    let grid: Vec<f64> = (0..=1200).map(|k| 260.0 + 0.05 * k as f64).collect();
    let b = sc.ris_steering(293.0, 0.0).unwrap().into_entries();
    let median_error = |noise: f64, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut errs: Vec<f64> = (0..200)
            .map(|_| {
                let x = DMatrix::from_fn(16, 16, |i, n| {
                    b[i] * C64::from_polar(1.0, 0.9 * n as f64)
                        + C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * noise
                });
                (music_doa(&x, &grid, &sc).unwrap().1 - 293.0).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        errs[100]
    };
    let low = median_error(3.0, 1);
    let high = median_error(3.0 / 10f64.sqrt(), 1);
    assert!(high <= low, "median error {high} at +10 dB vs {low}");
}

#[test]
fn refinement_improves_the_median_estimate() {
    let sc = Scenario::default();
    let prior = PositionPrior::uniform_sector((260.0, 320.0), (20.0, 80.0), 0.0).unwrap();
    let ues = sample_prior(&prior, 40, &sc.ris_center(), 17).unwrap();
    let cfg = PapirConfig {
        epsilon: 0.0,
        max_iterations: 4,
        ..fast_papir()
    };
    let mut per_iter: Vec<Vec<f64>> = vec![Vec::new(); cfg.max_iterations];
    for (r, ue) in ues.iter().enumerate() {
        let truth = cartesian_to_polar(ue, &sc.ris_center(), Frame::RisCentered).unwrap().azimuth();
        let est = run_papir(&sc, &prior, ue, &cfg, r as u64).unwrap();
        for rec in &est.history {
            per_iter[rec.iteration - 1].push(angular_distance(rec.theta_hat, truth));
        }
    }
    let medians: Vec<f64> = per_iter
        .into_iter()
        .filter(|v| v.len() == ues.len())
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        })
        .collect();
    assert!(medians.len() >= 2);
    for w in medians.windows(2) {
        assert!(w[1] <= w[0] * 1.05 + 1e-6, "{medians:?}");
    }
}

#[test]
fn campaign_is_reproducible_and_parseable() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let mut cfg = parse_config(None, &["runs=3".into(), "N=[16]".into(), "seed=5".into()]).unwrap();
        cfg.papir = fast_papir();
        cfg.output_dir = d.path().to_path_buf();
        run_campaign(&cfg).unwrap();
    }
    let headers = [
        ("rmse.csv", "iteration,rmse,N"),
        ("raw.csv", "N,run,iteration,theta_hat,d_hat,x,y,z,ue_x,ue_y,ue_z,error,converged"),
        ("pseudospectrum_N16.csv", "angle,value,iteration,subarea"),
        ("beampattern_N16.csv", "angle,gain,iteration"),
    ];
    for (name, header) in headers {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        let mut rdr = csv::Reader::from_reader(a.as_slice());
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","), header);
        let width = header.split(',').count();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.len() == width));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dirs[0].path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
}
