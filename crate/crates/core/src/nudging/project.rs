use num_complex::Complex64;

use super::NudgeError;
use crate::par;
use crate::spectral_qg::{GridSpec, SpectralTransform, Trajectory, LAYERS};

/// Reusable fine→coarse spectral truncation.
#[derive(Debug, Clone)]
pub struct Projector {
    fine: SpectralTransform,
    coarse: SpectralTransform,
    /// (fine index, coarse index) of every retained mode.
    modes: Vec<(usize, usize)>,
}

impl Projector {
    pub fn new(fine: GridSpec, coarse: GridSpec) -> Result<Self, NudgeError> {
        if coarse.nx() > fine.nx() {
            return Err(NudgeError::CoarserThanSource { fine: fine.nx(), coarse: coarse.nx() });
        }
        // Nyquist row and column of the coarse grid are dropped.
        let kmax = coarse.nx() as i64 / 2 - 1;
        let mut modes = Vec::new();
        for ky in -kmax..=kmax {
            for kx in -kmax..=kmax {
                let f = fine.index_of(ky) * fine.nx() + fine.index_of(kx);
                let c = coarse.index_of(ky) * coarse.nx() + coarse.index_of(kx);
                modes.push((f, c));
            }
        }
        Ok(Self { fine: SpectralTransform::new(fine), coarse: SpectralTransform::new(coarse), modes })
    }

    pub fn fine_grid(&self) -> GridSpec {
        self.fine.grid()
    }

    pub fn coarse_grid(&self) -> GridSpec {
        self.coarse.grid()
    }

    /// Project one physical field.
    pub fn project(&mut self, field: &[f64]) -> Result<Vec<f64>, NudgeError> {
        let fhat = self.fine.to_spectral(field)?;
        let mut chat = vec![Complex64::default(); self.coarse.grid().len()];
        for &(f, c) in &self.modes {
            chat[c] = fhat[f];
        }
        Ok(self.coarse.to_physical(&chat)?)
    }
}

/// Spectral truncation of one field from `fine` onto `coarse`.
pub fn project_to_coarse(field: &[f64], fine: GridSpec, coarse: GridSpec) -> Result<Vec<f64>, NudgeError> {
    Projector::new(fine, coarse)?.project(field)
}

/// Project every layer of every snapshot. Sampling metadata is kept; the
/// solver parameters are those of the source run.
pub fn project_trajectory(traj: &Trajectory, coarse: GridSpec) -> Result<Trajectory, NudgeError> {
    let proj = Projector::new(traj.grid, coarse)?;
    let n = traj.len();
    let chunk = 32;
    let blocks = par::map_range(n.div_ceil(chunk), |b| -> Result<Vec<f64>, NudgeError> {
        let mut p = proj.clone();
        let mut out = Vec::with_capacity(chunk * LAYERS * coarse.len());
        for i in b * chunk..((b + 1) * chunk).min(n) {
            for j in 0..LAYERS {
                out.extend(p.project(traj.layer(i, j))?);
            }
        }
        Ok(out)
    });
    let mut result = Trajectory::new(coarse, traj.sample_every, traj.dt, traj.params);
    result.data.reserve(n * LAYERS * coarse.len());
    for b in blocks {
        result.data.extend(b?);
    }
    Ok(result)
}
