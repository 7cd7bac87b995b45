use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::NudgeError;
use crate::par;
use crate::spectral_qg::{GridSpec, SpectralTransform, Trajectory, LAYERS};

/// Relative floor on the nudged energy below which a mode keeps `a_k = 1`.
pub const RATIO_FLOOR: f64 = 1e-14;

const CHUNK: usize = 32;

/// Per-layer, per-mode amplitude ratios `a_k`, layout `(layer, ky, kx)` in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRatio {
    pub grid: GridSpec,
    pub a: Vec<f64>,
}

impl SpectralRatio {
    pub fn identity(grid: GridSpec) -> Self {
        Self { grid, a: vec![1.0; LAYERS * grid.len()] }
    }

    /// SHA-256 over the little-endian bytes of `a`.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.a {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// CSV rows `layer,kx,ky,a` with round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let n2 = self.grid.len();
        let mut s = String::from("layer,kx,ky,a\n");
        for j in 0..LAYERS {
            for idx in 0..n2 {
                let (kx, ky) = self.grid.mode(idx);
                let _ = writeln!(s, "{},{},{},{}", j + 1, kx, ky, self.a[j * n2 + idx]);
            }
        }
        s
    }

    pub fn from_csv(grid: GridSpec, text: &str) -> Result<Self, NudgeError> {
        let n2 = grid.len();
        let mut a = vec![f64::NAN; LAYERS * n2];
        let bad = |line: &str| NudgeError::Metadata(format!("bad ratio row {line:?}"));
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            let layer: usize = f[0].trim().parse().map_err(|_| bad(line))?;
            let kx: i64 = f[1].trim().parse().map_err(|_| bad(line))?;
            let ky: i64 = f[2].trim().parse().map_err(|_| bad(line))?;
            let v: f64 = f[3].trim().parse().map_err(|_| bad(line))?;
            let half = grid.nx() as i64 / 2;
            if !(1..=LAYERS).contains(&layer) || !(-half..half).contains(&kx) || !(-half..half).contains(&ky) {
                return Err(bad(line));
            }
            a[(layer - 1) * n2 + grid.index_of(ky) * grid.nx() + grid.index_of(kx)] = v;
        }
        if a.iter().any(|v| v.is_nan()) {
            return Err(NudgeError::Metadata("ratio table is incomplete".into()));
        }
        Ok(Self { grid, a })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), NudgeError> {
        crate::spectral_qg::write_atomic(path, self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn read_csv(grid: GridSpec, path: &Path) -> Result<Self, NudgeError> {
        Self::from_csv(grid, &std::fs::read_to_string(path)?)
    }
}

fn check_shapes(a: &Trajectory, b: &Trajectory) -> Result<(), NudgeError> {
    if !a.same_shape(b) {
        return Err(NudgeError::ShapeMismatch(format!(
            "{}×{}² vs {}×{}²",
            a.len(),
            a.grid.nx(),
            b.len(),
            b.grid.nx()
        )));
    }
    Ok(())
}

/// Time-summed `|v̂_k|²` per layer and mode.
fn power_sums(traj: &Trajectory) -> Result<Vec<f64>, NudgeError> {
    let n = traj.len();
    let n2 = traj.grid.len();
    let tf = SpectralTransform::new(traj.grid);
    // fixed chunking, partials added in order: independent of thread count
    let partials = par::map_range(n.div_ceil(CHUNK), |b| -> Result<Vec<f64>, NudgeError> {
        let mut tf = tf.clone();
        let mut acc = vec![0.0; LAYERS * n2];
        for i in b * CHUNK..((b + 1) * CHUNK).min(n) {
            for j in 0..LAYERS {
                let hat = tf.to_spectral(traj.layer(i, j))?;
                for (s, c) in acc[j * n2..(j + 1) * n2].iter_mut().zip(&hat) {
                    *s += c.norm_sqr();
                }
            }
        }
        Ok(acc)
    });
    let mut total = vec![0.0; LAYERS * n2];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p?) {
            *t += v;
        }
    }
    Ok(total)
}

/// `a_k = sqrt(Σ_t |v̂_k|² / Σ_t |v̂_τ,k|²)`, per layer. Modes whose nudged
/// energy is below `RATIO_FLOOR·max` get 1.
pub fn spectral_ratio(v: &Trajectory, v_tau: &Trajectory) -> Result<SpectralRatio, NudgeError> {
    check_shapes(v, v_tau)?;
    if v.is_empty() {
        return Err(NudgeError::ShapeMismatch("empty trajectories".into()));
    }
    let grid = v.grid;
    let n2 = grid.len();
    let num = power_sums(v)?;
    let den = power_sums(v_tau)?;
    let max_num = num.iter().copied().fold(0.0, f64::max);
    let floor = RATIO_FLOOR * max_num;
    let mut a = vec![1.0; LAYERS * n2];
    for j in 0..LAYERS {
        for idx in 0..n2 {
            // average with the conjugate mode so a_k = a_{-k} exactly
            let cj = grid.conjugate_index(idx);
            let nu = 0.5 * (num[j * n2 + idx] + num[j * n2 + cj]);
            let de = 0.5 * (den[j * n2 + idx] + den[j * n2 + cj]);
            if de > floor && de > 0.0 {
                a[j * n2 + idx] = (nu / de).sqrt();
            }
        }
    }
    Ok(SpectralRatio { grid, a })
}

/// `v'_τ = IDFT(a_k · v̂_τ,k)` for every snapshot.
pub fn apply_spectral_correction(v_tau: &Trajectory, ratio: &SpectralRatio) -> Result<Trajectory, NudgeError> {
    if ratio.grid != v_tau.grid || ratio.a.len() != LAYERS * v_tau.grid.len() {
        return Err(NudgeError::ShapeMismatch("ratio grid differs from trajectory grid".into()));
    }
    let n = v_tau.len();
    let n2 = v_tau.grid.len();
    let tf = SpectralTransform::new(v_tau.grid);
    let blocks = par::map_range(n.div_ceil(CHUNK), |b| -> Result<Vec<f64>, NudgeError> {
        let mut tf = tf.clone();
        let mut out = Vec::with_capacity(CHUNK * LAYERS * n2);
        for i in b * CHUNK..((b + 1) * CHUNK).min(n) {
            for j in 0..LAYERS {
                let mut hat = tf.to_spectral(v_tau.layer(i, j))?;
                for (c, s) in hat.iter_mut().zip(&ratio.a[j * n2..(j + 1) * n2]) {
                    *c *= *s;
                }
                out.extend(tf.to_physical(&hat)?);
            }
        }
        Ok(out)
    });
    let mut out = Trajectory::new(v_tau.grid, v_tau.sample_every, v_tau.dt, v_tau.params);
    out.data.reserve(v_tau.data.len());
    for b in blocks {
        out.data.extend(b?);
    }
    Ok(out)
}
