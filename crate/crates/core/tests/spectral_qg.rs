use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qgdebias_core::spectral_qg::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Set coefficient `v` at `(kx, ky)` of layer `j` and its conjugate at `-k`.
fn set_mode(grid: GridSpec, coeffs: &mut [Complex64], j: usize, kx: i64, ky: i64, v: Complex64) {
    let n = grid.nx();
    let n2 = grid.len();
    let idx = grid.index_of(ky) * n + grid.index_of(kx);
    let cdx = grid.index_of(-ky) * n + grid.index_of(-kx);
    coeffs[j * n2 + idx] = v;
    coeffs[j * n2 + cdx] = v.conj();
}

fn mode_index(grid: GridSpec, kx: i64, ky: i64) -> usize {
    grid.index_of(ky) * grid.nx() + grid.index_of(kx)
}

fn state_from_psi(model: &QgModel, psi: &[Complex64]) -> SpectralState {
    let mut s = SpectralState::zeros(model.grid());
    model.pv_from_streamfunction(psi, &mut s.qhat);
    s
}

fn random_band_limited_psi(grid: GridSpec, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = vec![Complex64::default(); 2 * grid.len()];
    let cut = grid.dealias_cutoff();
    for j in 0..2 {
        for ky in -cut..=cut {
            for kx in 0..=cut {
                if kx == 0 && ky <= 0 {
                    continue;
                }
                let v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 0.1;
                set_mode(grid, &mut psi, j, kx, ky, v);
            }
        }
    }
    psi
}

#[test]
fn inversion_of_pure_topography_is_zero() {
    let grid = GridSpec::new(24).unwrap();
    let params = QgParams::for_grid(grid);
    let model = QgModel::new(grid, params, &Topography::seeded(&params, 1)).unwrap();
    let n2 = grid.len();
    let mut q = vec![Complex64::default(); 2 * n2];
    q[n2..].copy_from_slice(model.topography_pv());
    let mut psi = vec![c(9.0, 9.0); 2 * n2];
    model.invert_pv(&q, &mut psi).unwrap();
    assert!(psi.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn poisson_inversion_without_coupling() {
    let grid = GridSpec::new(16).unwrap();
    let mut params = QgParams::inviscid(0.0);
    params.kd2 = 0.0;
    let model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let n2 = grid.len();
    let mut q = vec![Complex64::default(); 2 * n2];
    let idx = mode_index(grid, 2, 0);
    q[idx] = c(1.0, 0.0);
    let mut psi = vec![Complex64::default(); 2 * n2];
    model.invert_pv(&q, &mut psi).unwrap();
    assert!((psi[idx] - c(-0.25, 0.0)).norm() < 1e-15);
    assert_eq!(psi[n2 + idx], Complex64::default());
}

#[test]
fn degenerate_mode_is_refused() {
    assert!(matches!(
        invert_mode(0.0, 4.0, c(1.0, 0.0), c(0.0, 0.0)),
        Err(QgError::DegenerateInversion)
    ));
}

#[test]
fn forward_map_then_inversion_is_identity() {
    let grid = GridSpec::new(32).unwrap();
    let params = QgParams::for_grid(grid);
    let model = QgModel::new(grid, params, &Topography::seeded(&params, 3)).unwrap();
    let psi = random_band_limited_psi(grid, 17);
    let s = state_from_psi(&model, &psi);
    let mut back = vec![Complex64::default(); psi.len()];
    model.invert_pv(&s.qhat, &mut back).unwrap();
    let scale = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = psi.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-12 * scale, "{err}");
    assert!(s.hermitian_defect() < 1e-15);
}

#[test]
fn zero_state_has_zero_tendency() {
    let grid = GridSpec::new(16).unwrap();
    let mut model = QgModel::new(grid, QgParams::for_grid(grid), &Topography::flat()).unwrap();
    let s = SpectralState::zeros(grid);
    let mut dq = vec![c(1.0, 1.0); s.qhat.len()];
    model.tendency(0.0, &s.qhat, &mut dq).unwrap();
    assert!(dq.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn lone_mode_only_feels_hyperviscosity() {
    let grid = GridSpec::new(16).unwrap();
    let mut params = QgParams::inviscid(4.0);
    params.nu = 1e-3;
    let mut model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let mut s = SpectralState::zeros(grid);
    set_mode(grid, &mut s.qhat, 0, 2, 1, c(1.0, 0.0));
    let mut dq = vec![Complex64::default(); s.qhat.len()];
    model.tendency(0.0, &s.qhat, &mut dq).unwrap();
    let k2: f64 = 5.0;
    let expect = -params.nu * k2.powi(4);
    let idx = mode_index(grid, 2, 1);
    assert!((dq[idx] - c(expect, 0.0)).norm() < 1e-13 * expect.abs());
    let others = dq
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx && *i != mode_index(grid, -2, -1))
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    assert!(others < 1e-13);
}

/// Oracle: stream functions are sums of cosines, all derivatives are
/// evaluated analytically on a 4x refined grid, and the Jacobian is
/// projected back with a direct double-loop DFT.
#[test]
fn two_mode_tendency_matches_direct_evaluation() {
    let grid = GridSpec::new(16).unwrap();
    let mut params = QgParams::for_grid(grid);
    params.nu = 1e-4;
    let mut model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    // (kx, ky, amplitude layer 1, amplitude layer 2, phase)
    let modes = [(1i64, 2i64, 0.7, -0.3, 0.4), (3, -1, 0.2, 0.5, -1.1)];
    let kd2 = params.kd2;
    let mut psi = vec![Complex64::default(); 2 * grid.len()];
    for &(kx, ky, a1, a2, ph) in &modes {
        // a cos(k·x + φ) = (a/2) e^{iφ} e^{ik·x} + c.c.
        set_mode(grid, &mut psi, 0, kx, ky, Complex64::from_polar(a1 / 2.0, ph));
        set_mode(grid, &mut psi, 1, kx, ky, Complex64::from_polar(a2 / 2.0, ph));
    }
    let s = state_from_psi(&model, &psi);
    let mut dq = vec![Complex64::default(); s.qhat.len()];
    model.tendency(0.0, &s.qhat, &mut dq).unwrap();

    let fine = 4 * grid.nx();
    let h = 2.0 * PI / fine as f64;
    let amp = |j: usize, m: usize| if j == 0 { modes[m].2 } else { modes[m].3 };
    let q_amp = |j: usize, m: usize| {
        let (kx, ky) = (modes[m].0 as f64, modes[m].1 as f64);
        -(kx * kx + ky * ky) * amp(j, m) + 0.5 * kd2 * (amp(1 - j, m) - amp(j, m))
    };
    for j in 0..2 {
        let mut jac = vec![0.0; fine * fine];
        for iy in 0..fine {
            for ix in 0..fine {
                let (x, y) = (ix as f64 * h, iy as f64 * h);
                let (mut px, mut py, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0);
                for m in 0..modes.len() {
                    let (kx, ky, ph) = (modes[m].0 as f64, modes[m].1 as f64, modes[m].4);
                    let s = -(kx * x + ky * y + ph).sin();
                    px += amp(j, m) * kx * s;
                    py += amp(j, m) * ky * s;
                    qx += q_amp(j, m) * kx * s;
                    qy += q_amp(j, m) * ky * s;
                }
                jac[iy * fine + ix] = -py * qx + px * qy;
            }
        }
        let ubar = params.layer_velocity(j);
        for idx in 0..grid.len() {
            let (kx, ky) = grid.mode(idx);
            let mut jh = Complex64::default();
            for iy in 0..fine {
                for ix in 0..fine {
                    let ang = -(kx as f64 * ix as f64 + ky as f64 * iy as f64) * h;
                    jh += jac[iy * fine + ix] * Complex64::from_polar(1.0, ang);
                }
            }
            jh /= (fine * fine) as f64;
            let o = j * grid.len() + idx;
            let k2 = (kx * kx + ky * ky) as f64;
            let i = c(0.0, 1.0);
            let drag = if j == 1 { params.r } else { 0.0 };
            let expect = -jh - i * kx as f64 * (ubar * s.qhat[o] + (params.beta + kd2 * ubar) * psi[o])
                + drag * k2 * psi[o]
                - params.nu * k2.powi(4) * s.qhat[o];
            let cut = grid.dealias_cutoff();
            let expect = if kx.abs() <= cut && ky.abs() <= cut && idx != 0 { expect } else { c(0.0, 0.0) };
            assert!(
                (dq[o] - expect).norm() <= 1e-6 * expect.norm().max(1e-3),
                "layer {j} mode ({kx},{ky}): {} vs {}",
                dq[o],
                expect
            );
        }
    }
}

#[test]
fn dealiased_tendency_matches_doubled_grid() {
    let grid = GridSpec::new(16).unwrap();
    let big = GridSpec::new(32).unwrap();
    let mut params = QgParams::for_grid(grid);
    params.nu = 1e-4;
    let mut small_model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let mut big_model = QgModel::new(big, params, &Topography::flat()).unwrap();
    let psi = random_band_limited_psi(grid, 5);
    let mut psi_big = vec![Complex64::default(); 2 * big.len()];
    for j in 0..2 {
        for idx in 0..grid.len() {
            let (kx, ky) = grid.mode(idx);
            psi_big[j * big.len() + mode_index(big, kx, ky)] = psi[j * grid.len() + idx];
        }
    }
    let s = state_from_psi(&small_model, &psi);
    let sb = state_from_psi(&big_model, &psi_big);
    let mut dq = vec![Complex64::default(); s.qhat.len()];
    let mut dqb = vec![Complex64::default(); sb.qhat.len()];
    small_model.tendency(0.0, &s.qhat, &mut dq).unwrap();
    big_model.tendency(0.0, &sb.qhat, &mut dqb).unwrap();
    let cut = grid.dealias_cutoff();
    for j in 0..2 {
        for idx in 0..grid.len() {
            let (kx, ky) = grid.mode(idx);
            if kx.abs() > cut || ky.abs() > cut {
                continue;
            }
            let a = dq[j * grid.len() + idx];
            let b = dqb[j * big.len() + mode_index(big, kx, ky)];
            assert!((a - b).norm() <= 1e-10, "({kx},{ky}) {a} {b}");
        }
    }
}

fn decay_setup(nu: f64) -> (QgModel, SpectralState, usize, f64) {
    let grid = GridSpec::new(16).unwrap();
    let mut params = QgParams::inviscid(4.0);
    params.nu = nu;
    let model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let mut s = SpectralState::zeros(grid);
    set_mode(grid, &mut s.qhat, 0, 3, 2, c(0.8, -0.3));
    let rate = nu * 13f64.powi(4);
    (model, s, mode_index(grid, 3, 2), rate)
}

#[test]
fn rk4_is_a_no_op_on_the_fixed_point() {
    let grid = GridSpec::new(16).unwrap();
    let mut model = QgModel::new(grid, QgParams::for_grid(grid), &Topography::flat()).unwrap();
    let mut s = SpectralState::zeros(grid);
    Rk4::new(grid).step(&mut model, &mut s, 0.01).unwrap();
    assert!(s.qhat.iter().all(|z| z.norm() == 0.0));
    assert!((s.time - 0.01).abs() < 1e-15);
}

#[test]
fn rk4_reproduces_taylor_amplification() {
    let (mut model, mut s, idx, rate) = decay_setup(1e-5);
    let dt = 0.1;
    let q0 = s.qhat[idx];
    Rk4::new(model.grid()).step(&mut model, &mut s, dt).unwrap();
    let z = -rate * dt;
    let g = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
    assert!((s.qhat[idx] - q0 * g).norm() <= 1e-15 * q0.norm() * 4.0);
}

#[test]
fn rk4_local_error_is_fifth_order() {
    let (model0, s0, idx, rate) = decay_setup(1e-5);
    let q0 = s0.qhat[idx];
    let dts = [0.4, 0.2, 0.1, 0.05];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let mut model = model0.clone();
            let mut s = s0.clone();
            Rk4::new(model.grid()).step(&mut model, &mut s, dt).unwrap();
            (s.qhat[idx] - q0 * (-rate * dt).exp()).norm()
        })
        .collect();
    // least-squares slope of log(err) against log(dt)
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((4.7..=5.3).contains(&slope), "slope {slope}, errs {errs:?}");
}

#[test]
fn cfl_guard_refuses_large_steps() {
    let grid = GridSpec::new(16).unwrap();
    let mut params = QgParams::inviscid(0.0);
    params.u = 10.0;
    let mut model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let mut s = SpectralState::zeros(grid);
    let before = s.clone();
    let err = Rk4::new(grid).step(&mut model, &mut s, 0.1).unwrap_err();
    assert!(matches!(err, QgError::Cfl { .. }), "{err}");
    assert_eq!(s, before);
}

#[test]
fn blow_up_is_reported_with_time() {
    let grid = GridSpec::new(16).unwrap();
    let mut model = QgModel::new(grid, QgParams::for_grid(grid), &Topography::flat()).unwrap();
    let mut s = SpectralState::zeros(grid);
    s.qhat[1] = c(f64::NAN, 0.0);
    s.time = 3.5;
    let err = Rk4::new(grid).step(&mut model, &mut s, 0.01).unwrap_err();
    assert!(matches!(err, QgError::BlowUp { time } if time == 3.5), "{err}");
}

#[test]
fn integrate_counts_and_initial_snapshot() {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::for_grid(grid);
    let mut model = QgModel::new(grid, params, &Topography::seeded(&params, 2)).unwrap();
    let s0 = model.random_state(4, 0.1).unwrap();
    let psi0 = model.streamfunction(&s0).unwrap();
    let mut s = s0.clone();
    let t = integrate(&mut model, &mut s, 0.0, 0.01, 0.05, params).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.snapshot(0), &psi0[..]);
    for (h, se) in [(0.3, 0.05), (0.32, 0.1), (1.0, 0.25)] {
        let mut s = s0.clone();
        let t = integrate(&mut model, &mut s, h, 0.01, se, params).unwrap();
        assert_eq!(t.len(), (h / se + 1e-9).floor() as usize + 1);
    }
    let mut s = s0.clone();
    assert!(matches!(
        integrate(&mut model, &mut s, 1.0, 0.03, 0.05, params).map(|_| ()),
        Err(PartialRun { error: QgError::SamplingMismatch { .. }, .. })
    ));
}

#[test]
fn integrate_tracks_linear_decay() {
    let (mut model, mut s, idx, rate) = decay_setup(1e-4);
    let q0 = s.qhat[idx];
    let params = *model.params();
    let traj = integrate(&mut model, &mut s, 2.0, 0.01, 0.5, params).unwrap();
    let grid = model.grid();
    let mut tr = SpectralTransform::new(grid);
    for i in 0..traj.len() {
        let t = i as f64 * 0.5;
        let psi_hat = tr.to_spectral(traj.layer(i, 0)).unwrap();
        // single mode in one layer: ψ̂1 = a q̂1 with a from the 2x2 inverse
        let (p1, _) = invert_mode(13.0, 4.0, q0, c(0.0, 0.0)).unwrap();
        let expect = p1 * (-rate * t).exp();
        // accumulated RK4 truncation: steps × |z|⁵/120 relative, z = -rate·dt
        let steps = (t / 0.01).round();
        let bound = 2.0 * steps * (rate * 0.01f64).powi(5) / 120.0 + 1e-13;
        assert!((psi_hat[idx] - expect).norm() <= bound * p1.norm(), "t={t}");
    }
}

#[test]
fn energy_of_zero_and_barotropic_mode() {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::inviscid(4.0);
    let model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    assert_eq!(model.energy_enstrophy(&SpectralState::zeros(grid)).unwrap(), (0.0, 0.0));
    let mut psi = vec![Complex64::default(); 2 * grid.len()];
    let cc = c(0.6, -0.8);
    let idx = mode_index(grid, 1, 0);
    psi[idx] = cc;
    psi[grid.len() + idx] = cc;
    let s = state_from_psi(&model, &psi);
    let (e, z) = model.energy_enstrophy(&s).unwrap();
    assert!((e - cc.norm_sqr()).abs() < 1e-15);
    assert!((z - cc.norm_sqr()).abs() < 1e-15);
}

#[test]
fn inviscid_flow_conserves_energy_and_enstrophy() {
    let grid = GridSpec::new(32).unwrap();
    let params = QgParams { beta: 2.0, ..QgParams::inviscid(4.0) };
    let mut model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let mut s = model.random_state(11, 0.5).unwrap();
    let (e0, z0) = model.energy_enstrophy(&s).unwrap();
    let mut rk = Rk4::new(grid);
    for _ in 0..1000 {
        rk.step(&mut model, &mut s, 1e-3).unwrap();
    }
    let (e1, z1) = model.energy_enstrophy(&s).unwrap();
    assert!(((e1 - e0) / e0).abs() <= 1e-6, "energy drift {}", (e1 - e0) / e0);
    assert!(((z1 - z0) / z0).abs() <= 1e-6, "enstrophy drift {}", (z1 - z0) / z0);
    assert!(s.hermitian_defect() < 1e-12);
}

#[test]
fn hermitian_symmetry_survives_forced_dissipative_steps() {
    let grid = GridSpec::new(24).unwrap();
    let params = QgParams::for_grid(grid);
    let mut model = QgModel::new(grid, params, &Topography::seeded(&params, 8)).unwrap();
    let mut s = model.random_state(2, 0.3).unwrap();
    let mut rk = Rk4::new(grid);
    for _ in 0..200 {
        rk.step(&mut model, &mut s, 4e-3).unwrap();
    }
    let scale = s.qhat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(s.hermitian_defect() < 1e-12 * scale);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn transform_round_trip(seed in any::<u64>(), half in 4usize..12) {
        let grid = GridSpec::new(2 * half).unwrap();
        let mut t = SpectralTransform::new(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-10.0..10.0)).collect();
        let back = t.to_physical(&t.clone().to_spectral(&f).unwrap()).unwrap();
        let err = f.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12, "{}", err);
    }
}
