mod common;

use std::f64::consts::PI;

use common::*;
use maotfs::channel::{add_awgn, apply_channel, ChannelConfig};
use maotfs::estimation::*;
use maotfs::linalg::CMatrix;
use maotfs::otfs::{otfs_demodulate, otfs_modulate, random_qpsk_frame, DDFrame};
use maotfs::{seeded_rng, Complex64, Error};
use nalgebra::Cholesky;
use rand::Rng;

fn pilot(m: usize, n: usize) -> PilotConfig {
    PilotConfig::centered(m, n, 4)
}

/// `(1/M) Σ_u exp(±j2π(m−x)u/M)`.
fn kernel_sum(x: f64, len: usize, sign: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| {
            (0..len)
                .map(|u| Complex64::from_polar(1.0, sign * 2.0 * PI * (i as f64 - x) * u as f64 / len as f64))
                .sum::<Complex64>()
                / len as f64
        })
        .collect()
}

#[test]
fn bases_match_sum_oracles_at_random_offsets() {
    let mut rng = seeded_rng(3);
    for _ in 0..5 {
        let x = rng.random_range(-4.0..20.0);
        let d = delay_basis(x, 16);
        let v = doppler_basis(x, 12);
        for (a, b) in d.iter().zip(kernel_sum(x, 16, 1.0)) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in v.iter().zip(kernel_sum(x, 12, -1.0)) {
            assert!((a - b).norm() < 1e-12);
        }
        // Parseval on the sum form: ‖ω‖² = 1/M · Σ_u |·|² = 1 for any offset
        let e: f64 = d.iter().map(|z| z.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-12);
    }
}

#[test]
fn doppler_basis_is_conjugate_of_mirrored_delay_kernel() {
    for &x in &[0.3, 2.71, -1.4] {
        let d = delay_basis(x, 9);
        let v = doppler_basis(x, 9);
        for (a, b) in d.iter().zip(&v) {
            assert!((a.conj() - b).norm() < 1e-12);
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = seeded_rng(17);
    let h = 1e-5;
    for _ in 0..20 {
        let x = rng.random_range(-3.0..10.0);
        let (gt, gn) = basis_gradients(x, x, 16, 12);
        let fd = |f: &dyn Fn(f64) -> Vec<Complex64>| -> Vec<Complex64> {
            f(x + h).iter().zip(f(x - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        for (g, f) in [(gt, fd(&|t| delay_basis(t, 16))), (gn, fd(&|t| doppler_basis(t, 12)))] {
            let num: f64 = g.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(num / den < 1e-4, "offset {x}: {}", num / den);
        }
    }
}

#[test]
fn peak_search_recovers_integer_paths() {
    let (m, n) = (32, 32);
    let cfg = pilot(m, n);
    let ch = realization(vec![
        path(0, 2.0, c(1.0, 0.0)),
        path(2, -3.0, c(0.0, 0.7)),
        path(4, 5.0, c(-0.4, 0.0)),
    ]);
    let y = pilot_only_frame(&ch, &cfg, m, n);
    let peaks = initial_peak_search(&y, 3, &cfg).unwrap();
    let expected = [(16, 18), (18, 13), (20, 21)];
    for (i, e) in expected.iter().enumerate() {
        assert_eq!((peaks.delays[i], peaks.dopplers[i]), *e);
    }
    assert_eq!(peaks.delay_offsets, vec![0, 2, 4]);
    assert_eq!(peaks.doppler_offsets, vec![2, -3, 5]);
}

#[test]
fn single_integer_path_is_recovered_exactly() {
    let (m, n) = (64, 64);
    let cfg = pilot(m, n);
    let ch = realization(vec![path(3, 4.0, c(1.0, 0.0))]);
    let y = pilot_only_frame(&ch, &cfg, m, n);
    let est = sblvi_estimate(&y, 1, &cfg, 200, 1e-6).unwrap();
    assert!((est.h_max[0] - c(1.0, 0.0)).norm() < 1e-6, "{}", est.h_max[0]);
    assert!((est.l_est[0] - (cfg.delay + 3) as f64).abs() < 1e-9);
    assert!((est.k_est[0] - (cfg.doppler + 4) as f64).abs() < 1e-9);
}

#[test]
fn fractional_doppler_pair_reconstructs_below_minus_40_db() {
    let (m, n) = (32, 32);
    let cfg = pilot(m, n);
    let ch = realization(vec![path(1, 3.3, c(0.8, 0.3)), path(3, -1.0, c(-0.2, 0.5))]);
    let y = pilot_only_frame(&ch, &cfg, m, n);
    let est = sblvi_estimate(&y, 2, &cfg, 200, 1e-6).unwrap();
    let truth = true_dd_response(&ch, &cfg, m, n).unwrap();
    let e = nmse_db(&est.h_dd, &truth).unwrap();
    assert!(e < -40.0, "{e}");
    assert!(max_coefficient_error(&ch, &cfg, &est.h_max, &est.l_est, &est.k_est) < 1e-3);
}

#[test]
fn empty_frame_gives_vanishing_coefficients() {
    let cfg = pilot(32, 32);
    let est = sblvi_estimate(&DDFrame::zeros(32, 32).unwrap(), 2, &cfg, 200, 1e-6).unwrap();
    assert!(est.iterations <= 200);
    assert!(est.h_max.iter().all(|h| h.norm() < 1e-3));
}

#[test]
fn too_many_paths_for_window() {
    let cfg = PilotConfig { guard_delay: 0, window_doppler: 0, ..pilot(16, 16) };
    let y = DDFrame::zeros(16, 16).unwrap();
    assert!(matches!(sblvi_estimate(&y, 2, &cfg, 10, 1e-6), Err(Error::InvalidConfig(_))));
}

fn is_spd(m: &nalgebra::DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() < 1e-9 * m.amax().max(1.0) && Cholesky::new(m.clone()).is_some()
}

#[test]
fn posterior_shapes_hold_every_iteration() {
    let (m, n) = (32, 32);
    let cfg = pilot(m, n);
    for seed in 0..5 {
        let mut rng = seeded_rng(seed);
        let ch = random_channel(&mut rng, 3, 4, 3.0);
        let mut sig = otfs_modulate(&embed_pilot(&DDFrame::zeros(m, n).unwrap(), &cfg).unwrap());
        sig = apply_channel(&sig, &ch).unwrap();
        add_awgn(&mut sig, 0.05, &mut rng);
        let y = otfs_demodulate(&sig);
        let mut checked = 0;
        Sblvi::new(SblviConfig::default())
            .estimate_traced(&y, 3, &cfg, |r| {
                let s = r.state;
                let herm = (&s.sigma_h - s.sigma_h.adjoint()).norm() < 1e-9 * s.sigma_h.norm();
                assert!(herm && Cholesky::new(s.sigma_h.clone()).is_some(), "Σ_h at {}", r.iteration);
                assert!(is_spd(&s.sigma_k) && is_spd(&s.sigma_l), "Σ_k/Σ_l at {}", r.iteration);
                assert!(s.a.iter().chain(&s.b).all(|v| *v > 0.0) && s.c > 0.0 && s.d > 0.0);
                checked += 1;
            })
            .unwrap();
        assert!(checked > 0);
    }
}

#[test]
fn median_convergence_ratio_is_nonincreasing_after_iteration_three() {
    let (m, n) = (32, 32);
    let ccfg = ChannelConfig { doppler_bins: n, ..ChannelConfig::default() };
    let cfg = PilotConfig::for_channel(m, n, &ccfg);
    let mut traces: Vec<Vec<f64>> = Vec::new();
    for seed in 0..20 {
        let ch = maotfs::channel::sample_environment(&ChannelConfig { seed, ..ccfg.clone() }).unwrap();
        let y = pilot_only_frame(&ch, &cfg, m, n);
        let mut eps = Vec::new();
        Sblvi::new(SblviConfig::default())
            .estimate_traced(&y, 4, &cfg, |r| eps.push(r.eps))
            .unwrap();
        traces.push(eps);
    }
    let longest = traces.iter().map(Vec::len).max().unwrap();
    // a converged run keeps contributing its final ratio
    let mut medians = Vec::new();
    for it in 0..longest {
        let mut v: Vec<f64> = traces.iter().map(|t| t[it.min(t.len() - 1)]).collect();
        v.sort_by(f64::total_cmp);
        medians.push(0.5 * (v[9] + v[10]));
    }
    for it in 3..medians.len().saturating_sub(1) {
        assert!(medians[it + 1] <= medians[it], "median ε rose at iteration {}: {:?}", it + 2, &medians[it..it + 2]);
    }
}

#[test]
fn noise_precision_grows_on_noiseless_frames() {
    // c/d is bounded by W/d₀, so the window must exceed 10³ cells
    let (m, n) = (64, 64);
    let cfg = PilotConfig { guard_delay: 16, ..PilotConfig::centered(m, n, 16) };
    assert!(cfg.window(m, n).unwrap().len() > 1000);
    let ch = realization(vec![path(2, 1.4, c(0.7, -0.2)), path(5, -2.6, c(0.3, 0.4))]);
    let y = pilot_only_frame(&ch, &cfg, m, n);
    let (_, st) = Sblvi::new(SblviConfig::default()).estimate_traced(&y, 2, &cfg, |_| {}).unwrap();
    assert!(st.noise_precision() > 1e6, "{}", st.noise_precision());
}

#[test]
fn noise_variance_estimate_tracks_truth_at_10_db() {
    let (m, n) = (32, 32);
    let ccfg = ChannelConfig { doppler_bins: n, ..ChannelConfig::default() };
    let cfg = PilotConfig::for_channel(m, n, &ccfg);
    let noise = 0.1;
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let ch = maotfs::channel::sample_environment(&ChannelConfig { seed, ..ccfg.clone() }).unwrap();
        let mut rng = seeded_rng(500 + seed);
        let x = embed_pilot(&random_qpsk_frame(m, n, &mut rng).unwrap(), &cfg).unwrap();
        let mut sig = apply_channel(&otfs_modulate(&x), &ch).unwrap();
        add_awgn(&mut sig, noise, &mut rng);
        let (_, st) = Sblvi::new(SblviConfig::default())
            .estimate_traced(&otfs_demodulate(&sig), 4, &cfg, |_| {})
            .unwrap();
        ratios.push(st.d / st.c / noise);
    }
    ratios.sort_by(f64::total_cmp);
    let med = 0.5 * (ratios[9] + ratios[10]);
    assert!((0.5..=2.0).contains(&med), "median (d/c)/δ² = {med}");
}

#[test]
fn lmmse_recovers_integer_path_when_noiseless() {
    let cfg = pilot(32, 32);
    let ch = realization(vec![path(2, -5.0, c(0.3, -0.9))]);
    let y = pilot_only_frame(&ch, &cfg, 32, 32);
    let est = lmmse_estimate(&y, 1, &cfg, 1e-12).unwrap();
    assert!((est.h_max[0] - c(0.3, -0.9)).norm() < 1e-4);
    let shrunk = lmmse_estimate(&y, 1, &cfg, 1e12).unwrap();
    assert!(shrunk.h_max[0].norm() < 1e-6);
}

#[test]
fn ep_detects_single_integer_path() {
    let cfg = pilot(32, 32);
    let ch = realization(vec![path(1, 3.0, c(0.8, 0.0))]);
    let y = pilot_only_frame(&ch, &cfg, 32, 32);
    let est = ep_threshold_estimate(&y, &cfg, 0.0).unwrap();
    assert_eq!(est.num_paths(), 1);
    assert!((est.h_max[0] - c(0.8, 0.0)).norm() < 1e-10);
}

#[test]
fn ep_false_alarms_on_pure_noise_are_rare() {
    let (m, n) = (32, 32);
    let cfg = pilot(m, n);
    let cells = cfg.window(m, n).unwrap().len();
    let mut detections = 0;
    for seed in 0..50 {
        let mut sig = maotfs::otfs::TimeSignal::zeros(m, n).unwrap();
        add_awgn(&mut sig, 0.2, &mut seeded_rng(seed));
        detections += ep_threshold_estimate(&otfs_demodulate(&sig), &cfg, 0.2).unwrap().num_paths();
    }
    // P(|CN(0,σ²)| > 3σ) = e⁻⁹ ≈ 1.2e−4
    assert!((detections as f64) < 0.01 * (50 * cells) as f64, "{detections}");
}

#[test]
fn nmse_requires_matching_shapes() {
    let a = CMatrix::zeros(2, 2);
    let b = CMatrix::from_element(2, 3, c(1.0, 0.0));
    assert!(matches!(nmse(&a, &b), Err(Error::InvalidDimension(_))));
}
