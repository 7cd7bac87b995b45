use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qgdebias_core::nudging::*;
use qgdebias_core::spectral_qg::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random real field from cos/sin modes with |kx|,|ky| <= kmax, evaluated pointwise.
fn band_limited_field(grid: GridSpec, kmax: i64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for ky in -kmax..=kmax {
        for kx in 0..=kmax {
            if kx == 0 && ky < 0 {
                continue;
            }
            terms.push((kx as f64, ky as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
    }
    let n = grid.nx();
    let mut f = vec![0.0; grid.len()];
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (grid.coord(ix), grid.coord(iy));
            f[iy * n + ix] = terms.iter().map(|&(kx, ky, a, b)| a * (kx * x + ky * y).cos() + b * (kx * x + ky * y).sin()).sum();
        }
    }
    f
}

fn white_field(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rms(a: &[f64]) -> f64 {
    (a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn constant_field_projects_to_constant() {
    let fine = GridSpec::new(128).unwrap();
    let coarse = GridSpec::new(24).unwrap();
    let out = project_to_coarse(&vec![2.75; fine.len()], fine, coarse).unwrap();
    assert_eq!(out.len(), coarse.len());
    assert!(out.iter().all(|v| (v - 2.75).abs() < 1e-12));
}

#[test]
fn retained_mode_is_exact() {
    let fine = GridSpec::new(128).unwrap();
    let coarse = GridSpec::new(24).unwrap();
    let f: Vec<f64> = (0..fine.len()).map(|i| (5.0 * fine.coord(i % 128)).sin()).collect();
    let out = project_to_coarse(&f, fine, coarse).unwrap();
    for (i, v) in out.iter().enumerate() {
        assert!((v - (5.0 * coarse.coord(i % 24)).sin()).abs() <= 1e-12);
    }
}

#[test]
fn projection_refuses_refinement() {
    let a = GridSpec::new(16).unwrap();
    let b = GridSpec::new(32).unwrap();
    assert!(matches!(project_to_coarse(&vec![0.0; 256], a, b), Err(NudgeError::CoarserThanSource { .. })));
}

#[test]
fn projection_matches_direct_dft_oracle() {
    let fine = GridSpec::new(64).unwrap();
    let coarse = GridSpec::new(16).unwrap();
    let f = white_field(fine.len(), 3);
    let got = project_to_coarse(&f, fine, coarse).unwrap();

    let (nf, nc) = (64usize, 16usize);
    let kmax = nc as i64 / 2 - 1;
    let mut modes = Vec::new();
    for ky in -kmax..=kmax {
        for kx in -kmax..=kmax {
            let mut s = Complex64::default();
            for iy in 0..nf {
                for ix in 0..nf {
                    let ph = -2.0 * PI * (kx as f64 * ix as f64 + ky as f64 * iy as f64) / nf as f64;
                    s += f[iy * nf + ix] * Complex64::from_polar(1.0, ph);
                }
            }
            modes.push((kx, ky, s / (nf * nf) as f64));
        }
    }
    for iy in 0..nc {
        for ix in 0..nc {
            let mut v = Complex64::default();
            for &(kx, ky, c) in &modes {
                let ph = 2.0 * PI * (kx as f64 * ix as f64 + ky as f64 * iy as f64) / nc as f64;
                v += c * Complex64::from_polar(1.0, ph);
            }
            assert!(v.im.abs() < 1e-12);
            assert!((v.re - got[iy * nc + ix]).abs() <= 1e-12, "({ix},{iy})");
        }
    }
}

#[test]
fn trajectory_projection_projects_every_layer() {
    let fine = GridSpec::new(32).unwrap();
    let coarse = GridSpec::new(16).unwrap();
    let mut t = Trajectory::new(fine, 0.5, 0.01, QgParams::for_grid(fine));
    for s in 0..3 {
        let mut snap = white_field(fine.len(), 10 + s);
        snap.extend(white_field(fine.len(), 20 + s));
        t.push(&snap);
    }
    let p = project_trajectory(&t, coarse).unwrap();
    assert_eq!(p.len(), 3);
    assert_eq!(p.grid, coarse);
    for i in 0..3 {
        for j in 0..2 {
            let direct = project_to_coarse(t.layer(i, j), fine, coarse).unwrap();
            assert_eq!(p.layer(i, j), &direct[..]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn projection_is_idempotent(seed in 0u64..1000, coarse_nx in prop::sample::select(vec![8usize, 12, 16])) {
        let fine = GridSpec::new(32).unwrap();
        let coarse = GridSpec::new(coarse_nx).unwrap();
        let f = white_field(fine.len(), seed);
        let once = project_to_coarse(&f, fine, coarse).unwrap();
        let twice = project_to_coarse(&once, coarse, coarse).unwrap();
        prop_assert!(max_abs_diff(&once, &twice) <= 1e-12);
    }

    #[test]
    fn band_limited_fields_survive_projection(seed in 0u64..1000) {
        let fine = GridSpec::new(32).unwrap();
        let coarse = GridSpec::new(16).unwrap();
        let f = band_limited_field(fine, 7, seed);
        let g = band_limited_field(coarse, 7, seed);
        let p = project_to_coarse(&f, fine, coarse).unwrap();
        prop_assert!(max_abs_diff(&p, &g) <= 1e-11);
    }
}

fn constant_reference(grid: GridSpec, psi: &[f64], sample_every: f64, count: usize) -> Trajectory {
    let mut t = Trajectory::new(grid, sample_every, 0.0, QgParams::inviscid(0.0));
    for _ in 0..count {
        t.push(psi);
    }
    t
}

fn two_layer_band_limited(grid: GridSpec, seed: u64) -> Vec<f64> {
    let kmax = grid.dealias_cutoff() - 1;
    let mut f = band_limited_field(grid, kmax, seed);
    f.extend(band_limited_field(grid, kmax, seed + 1000));
    // the PV gauge pins the mean modes
    for layer in f.chunks_mut(grid.len()) {
        let m = layer.iter().sum::<f64>() / layer.len() as f64;
        layer.iter_mut().for_each(|x| *x -= m);
    }
    f
}

#[test]
fn relaxation_without_dynamics_is_exponential() {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::for_grid(grid);
    let mut model = QgModel::new(grid, params, &Topography::seeded(&params, 2)).unwrap();
    let tau = 2.0;
    let u = two_layer_band_limited(grid, 5);
    let v0 = two_layer_band_limited(grid, 6);
    let reference = constant_reference(grid, &u, tau / 5.0, 26);
    let state0 = model.state_from_streamfunction(&v0, 0.0).unwrap();
    let mut nudged = NudgedModel::new(model, &reference, 0.0, NudgeConfig::new(tau).unwrap())
        .unwrap()
        .without_dynamics();
    let traj = integrate_nudged(&mut nudged, &state0, tau / 100.0, 5.0 * tau).unwrap();
    assert_eq!(traj.len(), 26);
    let d0: Vec<f64> = v0.iter().zip(&u).map(|(a, b)| a - b).collect();
    let n0 = rms(&d0);
    for (i, snap) in traj.snapshots().enumerate() {
        let t = i as f64 * tau / 5.0;
        let d: Vec<f64> = snap.iter().zip(&u).map(|(a, b)| a - b).collect();
        let expect = n0 * (-t / tau).exp();
        assert!((rms(&d) - expect).abs() <= 1e-8 * expect, "t={t}");
        // the whole deviation field decays, not only its norm
        let scaled: Vec<f64> = d0.iter().map(|x| x * (-t / tau).exp()).collect();
        assert!(max_abs_diff(&d, &scaled) <= 1e-8 * n0);
    }
}

#[test]
fn huge_tau_recovers_free_run() {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::for_grid(grid);
    let topo = Topography::seeded(&params, 4);
    let mut model = QgModel::new(grid, params, &topo).unwrap();
    let state0 = model.random_state(8, 0.1).unwrap();
    let reference = constant_reference(grid, &vec![0.0; 2 * grid.len()], 0.5, 21);
    let dt = grid.default_dt();
    let free = integrate(&mut model.clone(), &mut state0.clone(), 10.0, dt, 0.5, params).unwrap();
    let mut nudged = NudgedModel::new(model, &reference, 0.0, NudgeConfig::new(1e12).unwrap()).unwrap();
    let run = integrate_nudged(&mut nudged, &state0, dt, 10.0).unwrap();
    assert_eq!(run.len(), free.len());
    let d = max_abs_diff(&run.data, &free.data);
    assert!(d <= 1e-9, "{d}");
}

#[test]
fn tau_must_resolve_reference_sampling() {
    assert!(matches!(NudgeConfig::new(0.0), Err(NudgeError::InvalidTau(_))));
    assert!(matches!(NudgeConfig::new(f64::NAN), Err(NudgeError::InvalidTau(_))));
    let cfg = NudgeConfig::new(1.0).unwrap();
    assert!(cfg.check_reference(0.2).is_ok());
    assert!(matches!(cfg.check_reference(0.25), Err(NudgeError::UnderResolvedReference { .. })));
}

#[test]
fn reference_must_cover_horizon() {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::for_grid(grid);
    let mut model = QgModel::new(grid, params, &Topography::flat()).unwrap();
    let state0 = model.random_state(1, 0.1).unwrap();
    let reference = constant_reference(grid, &vec![0.0; 2 * grid.len()], 0.5, 3);
    let mut nudged = NudgedModel::new(model, &reference, 0.0, NudgeConfig::new(10.0).unwrap()).unwrap();
    let err = integrate_nudged(&mut nudged, &state0, 0.004, 2.0).unwrap_err();
    assert!(matches!(err.error, QgError::ReferenceExhausted { .. }));
    assert_eq!(err.trajectory.len(), 3);
}

/// sup_t rms(v_tau - u) at the reference sample times over the slow scales
/// |k| <= 3 (an 8² truncation); hyperviscosity makes the smallest retained
/// scales relax at rate 1/tau + O(nu k^8), which is not linear in tau.
fn sup_deviation(tau: f64, reference: &Trajectory, model: &QgModel, state0: &SpectralState, dt: f64) -> f64 {
    let horizon = (reference.len() - 1) as f64 * reference.sample_every;
    let mut nudged = NudgedModel::new(model.clone(), reference, 0.0, NudgeConfig::new(tau).unwrap()).unwrap();
    let run = integrate_nudged(&mut nudged, state0, dt, horizon).unwrap();
    let slow = GridSpec::new(8).unwrap();
    run.snapshots()
        .zip(reference.snapshots())
        .map(|(a, b)| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let n2 = reference.grid.len();
            let lo: Vec<f64> = d
                .chunks(n2)
                .flat_map(|layer| project_to_coarse(layer, reference.grid, slow).unwrap())
                .collect();
            rms(&lo)
        })
        .fold(0.0, f64::max)
}

#[test]
fn deviation_scales_with_tau() {
    let fine = GridSpec::new(32).unwrap();
    let coarse = GridSpec::new(16).unwrap();
    let fp = QgParams::for_grid(fine);
    let topo = Topography::seeded(&fp, 3);
    let mut fine_model = QgModel::new(fine, fp, &topo).unwrap();
    let mut s = fine_model.random_state(2, 0.3).unwrap();
    advance(&mut fine_model, &mut s, 20.0, 0.002).unwrap();
    let fine_run = integrate(&mut fine_model, &mut s, 10.0, 0.002, 0.01, fp).unwrap();
    let reference = project_trajectory(&fine_run, coarse).unwrap();

    let cp = QgParams::for_grid(coarse);
    let mut coarse_model = QgModel::new(coarse, cp, &topo).unwrap();
    let state0 = coarse_model.state_from_streamfunction(reference.snapshot(0), 0.0).unwrap();
    let d1 = sup_deviation(0.1, &reference, &coarse_model, &state0, 0.002);
    let d2 = sup_deviation(0.05, &reference, &coarse_model, &state0, 0.002);
    let ratio = d1 / d2;
    assert!((1.6..=2.6).contains(&ratio), "ratio {ratio}, d(0.1)={d1}, d(0.05)={d2}");
    // bound C·tau with C the largest coarse tendency along the reference (ψ units)
    assert!(d1 <= 0.1 * 10.0 * rms(&reference.data) && d1 > 0.0);
}

fn scaled(t: &Trajectory, a: f64) -> Trajectory {
    let mut s = t.clone();
    s.data.iter_mut().for_each(|v| *v *= a);
    s
}

fn small_run(seed: u64, len: usize) -> Trajectory {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::for_grid(grid);
    let mut model = QgModel::new(grid, params, &Topography::seeded(&params, seed)).unwrap();
    let mut s = model.random_state(seed, 0.5).unwrap();
    integrate(&mut model, &mut s, (len - 1) as f64 * 0.5, 0.004, 0.5, params).unwrap()
}

#[test]
fn identical_runs_have_unit_ratio() {
    let v = small_run(1, 6);
    let r = spectral_ratio(&v, &v).unwrap();
    assert!(r.a.iter().all(|&a| (a - 1.0).abs() < 1e-12));
}

#[test]
fn halved_run_has_ratio_two() {
    let v = small_run(2, 6);
    let r = spectral_ratio(&v, &scaled(&v, 0.5)).unwrap();
    let grid = v.grid;
    let n2 = grid.len();
    let mut energetic = 0;
    for j in 0..2 {
        for idx in 0..n2 {
            let e: f64 = (0..v.len())
                .map(|i| {
                    let hat = SpectralTransform::new(grid).to_spectral(v.layer(i, j)).unwrap();
                    hat[idx].norm_sqr()
                })
                .sum();
            if e > 1e-20 {
                energetic += 1;
                assert!((r.a[j * n2 + idx] - 2.0).abs() < 1e-10, "mode {idx} layer {j}");
            }
        }
    }
    assert!(energetic > 100);
}

#[test]
fn dead_modes_keep_unit_ratio() {
    let grid = GridSpec::new(8).unwrap();
    let mut v = Trajectory::new(grid, 0.5, 0.01, QgParams::for_grid(grid));
    // only kx = 1 carries energy
    let snap: Vec<f64> = (0..2 * grid.len()).map(|i| (grid.coord(i % 8)).cos()).collect();
    v.push(&snap);
    v.push(&snap);
    let r = spectral_ratio(&v, &scaled(&v, 0.25)).unwrap();
    for j in 0..2 {
        for idx in 0..grid.len() {
            let (kx, ky) = grid.mode(idx);
            let expect = if kx.abs() == 1 && ky == 0 { 4.0 } else { 1.0 };
            assert!((r.a[j * grid.len() + idx] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn ratio_rejects_mismatched_shapes() {
    let a = small_run(1, 3);
    let b = small_run(1, 4);
    assert!(matches!(spectral_ratio(&a, &b), Err(NudgeError::ShapeMismatch(_))));
    let r = SpectralRatio::identity(GridSpec::new(8).unwrap());
    assert!(matches!(apply_spectral_correction(&a, &r), Err(NudgeError::ShapeMismatch(_))));
}

#[test]
fn unit_and_constant_corrections() {
    let v = small_run(3, 4);
    let one = apply_spectral_correction(&v, &SpectralRatio::identity(v.grid)).unwrap();
    assert!(max_abs_diff(&one.data, &v.data) <= 1e-13);
    let two = SpectralRatio { grid: v.grid, a: vec![2.0; 2 * v.grid.len()] };
    let doubled = apply_spectral_correction(&v, &two).unwrap();
    assert!(max_abs_diff(&doubled.data, &scaled(&v, 2.0).data) <= 1e-13);
}

/// Per-layer, per-mode Σ_t |x̂_k|², recomputed with a fresh transform.
fn spectrum(t: &Trajectory) -> Vec<f64> {
    let n2 = t.grid.len();
    let mut tf = SpectralTransform::new(t.grid);
    let mut acc = vec![0.0; 2 * n2];
    for i in 0..t.len() {
        for j in 0..2 {
            for (k, c) in tf.to_spectral(t.layer(i, j)).unwrap().iter().enumerate() {
                acc[j * n2 + k] += c.norm_sqr();
            }
        }
    }
    acc
}

#[test]
fn corrected_spectrum_matches_free_run() {
    let grid = GridSpec::new(16).unwrap();
    let params = QgParams::for_grid(grid);
    let topo = Topography::seeded(&params, 5);
    let mut model = QgModel::new(grid, params, &topo).unwrap();
    let mut s = model.random_state(1, 0.4).unwrap();
    let free = integrate(&mut model, &mut s, 20.0, 0.004, 0.5, params).unwrap();
    let mut other = model.random_state(2, 0.4).unwrap();
    let reference = integrate(&mut model, &mut other, 20.0, 0.004, 0.5, params).unwrap();
    let state0 = model.state_from_streamfunction(reference.snapshot(0), 0.0).unwrap();
    let mut nudged = NudgedModel::new(model, &reference, 0.0, NudgeConfig::new(5.0).unwrap()).unwrap();
    let v_tau = integrate_nudged(&mut nudged, &state0, 0.004, 20.0).unwrap();
    let ratio = spectral_ratio(&free, &v_tau).unwrap();
    let corrected = apply_spectral_correction(&v_tau, &ratio).unwrap();
    let target = spectrum(&free);
    let got = spectrum(&corrected);
    let peak = target.iter().copied().fold(0.0, f64::max);
    for (a, b) in target.iter().zip(&got) {
        if *a > 1e-12 * peak {
            assert!((a - b).abs() <= 1e-10 * a, "{a} vs {b}");
        }
    }
}

#[test]
fn ratio_csv_round_trips() {
    let v = small_run(4, 4);
    let r = spectral_ratio(&v, &scaled(&v, 0.7)).unwrap();
    let back = SpectralRatio::from_csv(v.grid, &r.to_csv()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.checksum(), r.checksum());
    assert!(SpectralRatio::from_csv(v.grid, "layer,kx,ky,a\n1,0,0,1\n").is_err());
}

#[test]
fn band_limited_inputs_pass_through_unchanged() {
    let coarse = GridSpec::new(16).unwrap();
    let fine = GridSpec::new(32).unwrap();
    let mut f = Trajectory::new(fine, 0.5, 0.004, QgParams::for_grid(fine));
    let mut expect = Trajectory::new(coarse, 0.5, 0.004, QgParams::for_grid(coarse));
    for s in 0..4 {
        let mut a = band_limited_field(fine, 6, s);
        a.extend(band_limited_field(fine, 6, s + 50));
        f.push(&a);
        let mut b = band_limited_field(coarse, 6, s);
        b.extend(band_limited_field(coarse, 6, s + 50));
        expect.push(&b);
    }
    let v = small_run(6, 4);
    let set = build_training_set(&f, &v, &v, 10.0).unwrap();
    assert!(max_abs_diff(&set.u.data, &expect.data) <= 1e-11);
    assert!(max_abs_diff(&set.v_tau_corrected.data, &v.data) <= 1e-13);
    assert_eq!(set.v, v);
    assert!(set.u.same_shape(&set.v) && set.u.same_shape(&set.v_tau_corrected));
    assert_eq!(set.horizon(), 1.5);
}

#[test]
fn norm_stats_reject_constant_layer() {
    let grid = GridSpec::new(8).unwrap();
    let mut t = Trajectory::new(grid, 0.5, 0.01, QgParams::for_grid(grid));
    let mut snap = vec![3.0; grid.len()];
    snap.extend((0..grid.len()).map(|i| i as f64));
    t.push(&snap);
    t.push(&snap);
    let err = NormStats::from_trajectory(&t).unwrap_err();
    assert!(matches!(err, NudgeError::ZeroVariance { layer: 1 }));

    let mut ok = t.clone();
    ok.snapshot_mut(1)[0] = 5.0;
    let n = NormStats::from_trajectory(&ok).unwrap();
    let vals: Vec<f64> = (0..2).flat_map(|i| ok.layer(i, 0).to_vec()).collect();
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = (vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
    assert!((n.mean[0] - m).abs() < 1e-15 && (n.std[0] - sd).abs() < 1e-15);

    let mut x = ok.snapshot(0).to_vec();
    n.normalize(&mut x);
    n.denormalize(&mut x);
    assert!(max_abs_diff(&x, ok.snapshot(0)) < 1e-13);
}

#[test]
fn inconsistent_sampling_is_rejected() {
    let v = small_run(1, 3);
    let mut other = v.clone();
    other.sample_every = 0.25;
    assert!(matches!(build_training_set(&other, &v, &v, 1.0), Err(NudgeError::ShapeMismatch(_))));
}

#[test]
fn training_set_round_trips_through_disk() {
    let fine = small_run(7, 5);
    let v = small_run(8, 5);
    let w = scaled(&small_run(9, 5), 0.8);
    let set = build_training_set(&fine, &v, &w, 10.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    set.save(dir.path()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["metadata.txt", "u.qgtj", "v.qgtj", "v_tau_corrected.qgtj"]);
    let back = TrainingSet::load(dir.path()).unwrap();
    assert_eq!(back, set);
    let meta = std::fs::read_to_string(dir.path().join(METADATA_FILE)).unwrap();
    assert!(meta.contains("tau = 10"));
    assert!(meta.contains(&format!("ratio_sha256 = {}", spectral_ratio(&v, &w).unwrap().checksum())));
}
