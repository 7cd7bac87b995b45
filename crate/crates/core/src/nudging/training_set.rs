use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{apply_spectral_correction, project_trajectory, spectral_ratio, NudgeError, SpectralRatio};
use crate::spectral_qg::write_atomic;
use crate::spectral_qg::{read_trajectory, write_trajectory, Trajectory, LAYERS};

pub const METADATA_FILE: &str = "metadata.txt";
const FORMAT_TAG: &str = "qgdebias-training-set 1";
const FILES: [&str; 3] = ["u.qgtj", "v.qgtj", "v_tau_corrected.qgtj"];

/// Per-layer mean and standard deviation over all grid points and times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: [f64; LAYERS],
    pub std: [f64; LAYERS],
}

impl NormStats {
    pub fn identity() -> Self {
        Self { mean: [0.0; LAYERS], std: [1.0; LAYERS] }
    }

    /// Population statistics of `traj`; errors when a layer has zero spread.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self, NudgeError> {
        let mut mean = [0.0; LAYERS];
        let mut std = [0.0; LAYERS];
        let n2 = traj.grid.len();
        let count = (traj.len() * n2) as f64;
        if count == 0.0 {
            return Err(NudgeError::ShapeMismatch("empty trajectory".into()));
        }
        for j in 0..LAYERS {
            let mut s = 0.0;
            for i in 0..traj.len() {
                s += traj.layer(i, j).iter().sum::<f64>();
            }
            let m = s / count;
            let mut ss = 0.0;
            for i in 0..traj.len() {
                ss += traj.layer(i, j).iter().map(|x| (x - m) * (x - m)).sum::<f64>();
            }
            let sd = (ss / count).sqrt();
            if !(sd > 0.0) {
                return Err(NudgeError::ZeroVariance { layer: j + 1 });
            }
            mean[j] = m;
            std[j] = sd;
        }
        Ok(Self { mean, std })
    }

    /// Standardize one snapshot `(layer, y, x)` in place.
    pub fn normalize(&self, snapshot: &mut [f64]) {
        let n2 = snapshot.len() / LAYERS;
        for (j, layer) in snapshot.chunks_mut(n2).enumerate() {
            let inv = 1.0 / self.std[j];
            layer.iter_mut().for_each(|x| *x = (*x - self.mean[j]) * inv);
        }
    }

    /// Inverse of [`normalize`](Self::normalize).
    pub fn denormalize(&self, snapshot: &mut [f64]) {
        let n2 = snapshot.len() / LAYERS;
        for (j, layer) in snapshot.chunks_mut(n2).enumerate() {
            layer.iter_mut().for_each(|x| *x = *x * self.std[j] + self.mean[j]);
        }
    }
}

/// Aligned reference `u`, free coarse `v` and spectrally corrected nudged
/// `v_tau_corrected`, all on the coarse grid with identical snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub u: Trajectory,
    pub v: Trajectory,
    pub v_tau_corrected: Trajectory,
    pub norm: NormStats,
    pub tau: f64,
    pub ratio_checksum: String,
}

fn same_sampling(a: &Trajectory, b: &Trajectory) -> bool {
    (a.sample_every - b.sample_every).abs() <= 1e-12 * a.sample_every.abs().max(1.0)
}

impl TrainingSet {
    /// Bundle already-aligned sequences; norm stats come from `u`.
    pub fn assemble(
        u: Trajectory,
        v: Trajectory,
        v_tau_corrected: Trajectory,
        tau: f64,
        ratio: &SpectralRatio,
    ) -> Result<Self, NudgeError> {
        for (name, t) in [("v", &v), ("v_tau_corrected", &v_tau_corrected)] {
            if !u.same_shape(t) {
                return Err(NudgeError::ShapeMismatch(format!(
                    "u has {} snapshots on {}², {name} has {} on {}²",
                    u.len(),
                    u.grid.nx(),
                    t.len(),
                    t.grid.nx()
                )));
            }
            if !same_sampling(&u, t) {
                return Err(NudgeError::ShapeMismatch(format!("{name} sampled every {}", t.sample_every)));
            }
        }
        let norm = NormStats::from_trajectory(&u)?;
        Ok(Self { u, v, v_tau_corrected, norm, tau, ratio_checksum: ratio.checksum() })
    }

    pub fn sample_every(&self) -> f64 {
        self.u.sample_every
    }

    pub fn horizon(&self) -> f64 {
        self.u.len().saturating_sub(1) as f64 * self.u.sample_every
    }

    pub fn metadata(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = {FORMAT_TAG}");
        let _ = writeln!(s, "nx = {}", self.u.grid.nx());
        let _ = writeln!(s, "snapshots = {}", self.u.len());
        let _ = writeln!(s, "sample_every = {}", self.sample_every());
        let _ = writeln!(s, "horizon = {}", self.horizon());
        let _ = writeln!(s, "tau = {}", self.tau);
        for j in 0..LAYERS {
            let _ = writeln!(s, "mean_{} = {}", j + 1, self.norm.mean[j]);
            let _ = writeln!(s, "std_{} = {}", j + 1, self.norm.std[j]);
        }
        let _ = writeln!(s, "ratio_layout = per-layer");
        let _ = writeln!(s, "ratio_sha256 = {}", self.ratio_checksum);
        s
    }

    /// Write the three sequences and `metadata.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), NudgeError> {
        std::fs::create_dir_all(dir)?;
        for (name, t) in FILES.iter().zip([&self.u, &self.v, &self.v_tau_corrected]) {
            write_trajectory(dir.join(name), t)?;
        }
        write_atomic(dir.join(METADATA_FILE), self.metadata().as_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, NudgeError> {
        let text = std::fs::read_to_string(dir.join(METADATA_FILE))?;
        let meta = parse_metadata(&text)?;
        let get = |k: &str| meta.get(k).ok_or_else(|| NudgeError::Metadata(format!("missing key {k}")));
        let num = |k: &str| -> Result<f64, NudgeError> {
            get(k)?.parse().map_err(|_| NudgeError::Metadata(format!("bad value for {k}")))
        };
        if get("format")? != FORMAT_TAG {
            return Err(NudgeError::Metadata("unknown format tag".into()));
        }
        let u = read_trajectory(dir.join(FILES[0]))?;
        let v = read_trajectory(dir.join(FILES[1]))?;
        let w = read_trajectory(dir.join(FILES[2]))?;
        let mut norm = NormStats::identity();
        for j in 0..LAYERS {
            norm.mean[j] = num(&format!("mean_{}", j + 1))?;
            norm.std[j] = num(&format!("std_{}", j + 1))?;
        }
        let set = Self {
            u,
            v,
            v_tau_corrected: w,
            norm,
            tau: num("tau")?,
            ratio_checksum: get("ratio_sha256")?.clone(),
        };
        if !set.u.same_shape(&set.v) || !set.u.same_shape(&set.v_tau_corrected) {
            return Err(NudgeError::ShapeMismatch("stored sequences differ in shape".into()));
        }
        if num("snapshots")? as usize != set.u.len() {
            return Err(NudgeError::Metadata("snapshot count disagrees with files".into()));
        }
        Ok(set)
    }
}

fn parse_metadata(text: &str) -> Result<BTreeMap<String, String>, NudgeError> {
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NudgeError::Metadata(format!("bad line {line:?}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Project the fine run, spectrally correct the nudged run against the free
/// run and bundle the three sequences.
pub fn build_training_set(
    fine: &Trajectory,
    v: &Trajectory,
    v_tau: &Trajectory,
    tau: f64,
) -> Result<TrainingSet, NudgeError> {
    if !same_sampling(fine, v) || !same_sampling(v, v_tau) {
        return Err(NudgeError::ShapeMismatch("inconsistent sampling intervals".into()));
    }
    if fine.len() != v.len() {
        return Err(NudgeError::ShapeMismatch(format!("fine has {} snapshots, coarse {}", fine.len(), v.len())));
    }
    let u = project_trajectory(fine, v.grid)?;
    let ratio = spectral_ratio(v, v_tau)?;
    let corrected = apply_spectral_correction(v_tau, &ratio)?;
    TrainingSet::assemble(u, v.clone(), corrected, tau, &ratio)
}
