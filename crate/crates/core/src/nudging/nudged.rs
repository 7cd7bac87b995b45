use num_complex::Complex64;

use super::NudgeError;
use crate::spectral_qg::{integrate, GridSpec, PartialRun, QgError, QgModel, Rhs, SpectralState, Trajectory};

/// Relaxation time scale toward the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NudgeConfig {
    pub tau: f64,
}

impl NudgeConfig {
    pub fn new(tau: f64) -> Result<Self, NudgeError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(NudgeError::InvalidTau(tau));
        }
        Ok(Self { tau })
    }

    /// The reference must resolve the forcing: sampling interval ≤ tau/5.
    pub fn check_reference(&self, sample_every: f64) -> Result<(), NudgeError> {
        let limit = self.tau / 5.0;
        if sample_every > limit * (1.0 + 1e-12) {
            return Err(NudgeError::UnderResolvedReference { sample_every, limit });
        }
        Ok(())
    }
}

/// Coarse model plus the relaxation `-(q - q_u(t))/tau`, with `q_u` the PV of
/// the linearly interpolated reference stream function.
#[derive(Debug, Clone)]
pub struct NudgedModel {
    model: QgModel,
    ref_pv: Vec<Complex64>,
    n_ref: usize,
    t0: f64,
    sample_every: f64,
    inv_tau: f64,
    dynamics: bool,
}

impl NudgedModel {
    /// `reference` holds coarse physical stream functions with snapshot 0 at
    /// time `t0`.
    pub fn new(mut model: QgModel, reference: &Trajectory, t0: f64, config: NudgeConfig) -> Result<Self, NudgeError> {
        if reference.grid != model.grid() {
            return Err(NudgeError::ShapeMismatch(format!(
                "reference grid {} vs model grid {}",
                reference.grid.nx(),
                model.grid().nx()
            )));
        }
        if reference.is_empty() {
            return Err(NudgeError::ShapeMismatch("empty reference".into()));
        }
        config.check_reference(reference.sample_every)?;
        let mut ref_pv = Vec::with_capacity(reference.data.len());
        for snap in reference.snapshots() {
            ref_pv.extend(model.state_from_streamfunction(snap, 0.0)?.qhat);
        }
        Ok(Self {
            model,
            ref_pv,
            n_ref: reference.len(),
            t0,
            sample_every: reference.sample_every,
            inv_tau: 1.0 / config.tau,
            dynamics: true,
        })
    }

    /// Drop the model tendency, leaving pure relaxation.
    pub fn without_dynamics(mut self) -> Self {
        self.dynamics = false;
        self
    }

    pub fn model(&self) -> &QgModel {
        &self.model
    }

    /// Interpolation weights `(i, w)`: `q_u = (1-w)·ref[i] + w·ref[i+1]`.
    fn bracket(&self, t: f64) -> Result<(usize, f64), QgError> {
        let s = (t - self.t0) / self.sample_every;
        let last = (self.n_ref - 1) as f64;
        let tol = 1e-9;
        if !(s >= -tol && s <= last + tol) {
            return Err(QgError::ReferenceExhausted { time: t });
        }
        let s = s.clamp(0.0, last);
        let i = (s.floor() as usize).min(self.n_ref.saturating_sub(2));
        Ok((i, s - i as f64))
    }
}

impl Rhs for NudgedModel {
    fn grid(&self) -> GridSpec {
        self.model.grid()
    }

    fn eval(&mut self, t: f64, q: &[Complex64], dq: &mut [Complex64]) -> Result<f64, QgError> {
        let (i, w) = self.bracket(t)?;
        let speed = if self.dynamics {
            self.model.tendency(t, q, dq)?
        } else {
            dq.fill(Complex64::default());
            0.0
        };
        let n = q.len();
        let a = &self.ref_pv[i * n..(i + 1) * n];
        let b = if self.n_ref > 1 { &self.ref_pv[(i + 1) * n..(i + 2) * n] } else { a };
        for m in 0..n {
            let qu = a[m] + w * (b[m] - a[m]);
            dq[m] -= (q[m] - qu) * self.inv_tau;
        }
        Ok(speed)
    }

    fn streamfunction(&mut self, state: &SpectralState) -> Result<Vec<f64>, QgError> {
        self.model.streamfunction(state)
    }
}

/// Run the nudged system from `state0` over `horizon`, sampling at the
/// reference interval.
pub fn integrate_nudged(
    nudged: &mut NudgedModel,
    state0: &SpectralState,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory, PartialRun> {
    let mut state = state0.clone();
    let se = nudged.sample_every;
    let params = *nudged.model.params();
    integrate(nudged, &mut state, horizon, dt, se, params)
}
