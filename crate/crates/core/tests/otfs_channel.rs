mod common;

use std::f64::consts::PI;

use common::*;
use maotfs::channel::*;
use maotfs::linalg::CMatrix;
use maotfs::otfs::*;
use maotfs::{seeded_rng, Complex64};
use nalgebra::DVector;
use proptest::prelude::*;

fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn round_trip_is_identity(m in 1usize..12, n in 1usize..12, seed in any::<u64>()) {
        let x = random_qpsk_frame(m, n, &mut seeded_rng(seed)).unwrap();
        let y = otfs_demodulate(&otfs_modulate(&x));
        prop_assert!(relative_error(y.symbols(), x.symbols()) < 1e-12);
    }

    #[test]
    fn modulation_preserves_energy(m in 1usize..10, n in 1usize..10, seed in any::<u64>()) {
        let x = random_qpsk_frame(m, n, &mut seeded_rng(seed)).unwrap();
        let s = otfs_modulate(&x);
        let e: f64 = x.symbols().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((s.energy() - e).abs() < 1e-9 * e);
    }

    #[test]
    fn channel_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let mut rng = seeded_rng(seed);
        let ch = random_channel(&mut rng, 2, 2, 1.5);
        let a = otfs_modulate(&random_qpsk_frame(4, 4, &mut rng).unwrap());
        let b = otfs_modulate(&random_qpsk_frame(4, 4, &mut rng).unwrap());
        let sum = TimeSignal::new(
            a.samples().iter().zip(b.samples()).map(|(x, y)| x * alpha + y).collect(), 4, 4).unwrap();
        let lhs = apply_channel(&sum, &ch).unwrap();
        let ra = apply_channel(&a, &ch).unwrap();
        let rb = apply_channel(&b, &ch).unwrap();
        for ((l, x), y) in lhs.samples().iter().zip(ra.samples()).zip(rb.samples()) {
            prop_assert!((l - (x * alpha + y)).norm() < 1e-12);
        }
    }
}

#[test]
fn modulation_matches_kronecker_product() {
    // vec(X F_Nᴴ) = (F_Nᴴ ⊗ I_M) vec(X) for column-wise vec
    let (m, n) = (3, 5);
    let x = random_qpsk_frame(m, n, &mut seeded_rng(11)).unwrap();
    let f = dft_matrix(n).unwrap().adjoint();
    let big = f.kronecker(&CMatrix::identity(m, m));
    let v = DVector::from_column_slice(x.symbols().as_slice());
    let expected = big * v;
    let s = otfs_modulate(&x);
    for (a, b) in s.samples().iter().zip(expected.iter()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn dft_has_expected_phase() {
    let f = dft_matrix(4).unwrap();
    let expect = Complex64::from_polar(0.5, -2.0 * PI * 2.0 * 3.0 / 4.0);
    assert!((f[(2, 3)] - expect).norm() < 1e-15);
}

#[test]
fn channel_matches_dense_matrix_on_random_signals() {
    for seed in 0..10 {
        let mut rng = seeded_rng(seed);
        let (m, n) = (6, 5);
        let ch = random_channel(&mut rng, 3, 3, 2.0);
        let x = random_qpsk_frame(m, n, &mut rng).unwrap();
        let s = otfs_modulate(&x);
        let r = apply_channel(&s, &ch).unwrap();
        let dense = dense_channel_matrix(&ch, m, n) * DVector::from_column_slice(s.samples());
        for (a, b) in r.samples().iter().zip(dense.iter()) {
            assert!((a - b).norm() < 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn integer_path_shifts_the_delay_doppler_grid() {
    // one integer path moves a DD impulse to (l0+ℓ, k0+κ) scaled by h·e^{j2πκ l0/MN}
    let (m, n) = (16, 8);
    let (l0, k0) = (5, 3);
    let h = c(0.6, -0.2);
    let ch = realization(vec![path(2, 3.0, h)]);
    let mut x = DDFrame::zeros(m, n).unwrap();
    x.symbols_mut()[(l0, k0)] = c(1.0, 0.0);
    let y = otfs_demodulate(&apply_channel(&otfs_modulate(&x), &ch).unwrap());
    let expected = h * Complex64::from_polar(1.0, 2.0 * PI * 3.0 * l0 as f64 / (m * n) as f64);
    for r in 0..m {
        for k in 0..n {
            let want = if (r, k) == (l0 + 2, (k0 + 3) % n) { expected } else { c(0.0, 0.0) };
            assert!((y.get(r, k) - want).norm() < 1e-12, "cell ({r}, {k})");
        }
    }
}

#[test]
fn awgn_has_requested_variance() {
    let mut s = TimeSignal::zeros(64, 64).unwrap();
    add_awgn(&mut s, 0.25, &mut seeded_rng(4));
    let var = s.energy() / s.len() as f64;
    assert!((var - 0.25).abs() < 0.02, "{var}");
}

#[test]
fn sampled_environment_respects_bounds() {
    let cfg = ChannelConfig { num_paths: 6, seed: 9, ..Default::default() };
    let kmax = cfg.max_doppler_index();
    // (70/3.6)·28e9/c = 1816.07 Hz, times 64/15e3
    assert!((kmax - 7.74857).abs() < 1e-4, "{kmax}");
    for seed in 0..20 {
        let ch = sample_environment(&ChannelConfig { seed, ..cfg.clone() }).unwrap();
        assert_eq!(ch.num_paths(), 6);
        for p in &ch.paths {
            assert!(p.delay <= cfg.max_delay);
            assert!(p.doppler.abs() <= kmax);
        }
    }
}

#[test]
fn gain_matches_direct_formula() {
    let mut rng = seeded_rng(21);
    let ch = random_channel(&mut rng, 4, 3, 2.0);
    let lambda = ch.wavelength;
    let (x, y) = (0.3 * lambda, -0.45 * lambda);
    let mut u = c(0.0, 0.0);
    for p in &ch.paths {
        let rho = x * p.elevation.cos() * p.azimuth.sin() + y * p.elevation.sin();
        u += p.coeff * Complex64::from_polar(1.0, -2.0 * PI * rho / lambda);
    }
    assert!((channel_gain(x, y, &ch) - u.norm_sqr()).abs() < 1e-12);
}

#[test]
fn heatmap_maximum_matches_exhaustive_scan() {
    let ch = random_channel(&mut seeded_rng(5), 3, 3, 2.0);
    let grid = AntennaGrid::new(21, ch.wavelength).unwrap();
    let map = gain_heatmap(&ch, &grid);
    let mut best = f64::MIN;
    for i in 0..21 {
        for j in 0..21 {
            let (x, y) = grid.position(i, j);
            best = best.max(channel_gain(x, y, &ch));
        }
    }
    assert_eq!(map.max(), best);
}

#[test]
fn grid_positions_stay_inside_open_square() {
    let grid = AntennaGrid::new(AntennaGrid::DEFAULT_SIDE, 0.0107).unwrap();
    let lam = grid.wavelength;
    assert!(grid.coordinate(0) > -lam && grid.coordinate(100) < lam);
    assert!((grid.spacing() - 2.0 * lam / 101.0).abs() < 1e-18);
    assert_eq!(grid.position(50, 50).0.abs() < 1e-15, true);
}
