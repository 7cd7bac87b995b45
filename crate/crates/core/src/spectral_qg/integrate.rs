use std::f64::consts::PI;

use num_complex::Complex64;

use super::model::LAYERS;
use super::{GridSpec, QgError, QgModel, QgParams, SpectralState};

/// Largest admissible `dt·max|u|·nx/(2π)`.
pub const CFL_LIMIT: f64 = 0.5;

/// Anything that can be stepped by [`Rk4`].
pub trait Rhs {
    fn grid(&self) -> GridSpec;

    /// Write `dq̂/dt` at time `t` into `dq`; return the largest advecting
    /// speed used for the CFL guard (0 when not applicable).
    fn eval(&mut self, t: f64, q: &[Complex64], dq: &mut [Complex64]) -> Result<f64, QgError>;

    /// Physical stream functions of a state, used for sampling.
    fn streamfunction(&mut self, state: &SpectralState) -> Result<Vec<f64>, QgError>;
}

impl Rhs for QgModel {
    fn grid(&self) -> GridSpec {
        QgModel::grid(self)
    }

    fn eval(&mut self, t: f64, q: &[Complex64], dq: &mut [Complex64]) -> Result<f64, QgError> {
        self.tendency(t, q, dq)
    }

    fn streamfunction(&mut self, state: &SpectralState) -> Result<Vec<f64>, QgError> {
        QgModel::streamfunction(self, state)
    }
}

/// Classical four-stage Runge-Kutta stepper with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
}

impl Rk4 {
    pub fn new(grid: GridSpec) -> Self {
        let n = LAYERS * grid.len();
        let z = vec![Complex64::default(); n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z,
        }
    }

    /// Advance `state` by `dt`. The step is refused, leaving `state`
    /// untouched, when the stage-1 velocity violates the CFL guard.
    pub fn step<R: Rhs + ?Sized>(&mut self, rhs: &mut R, state: &mut SpectralState, dt: f64) -> Result<(), QgError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QgError::InvalidStep(dt));
        }
        let t = state.time;
        let nx = rhs.grid().nx() as f64;
        let speed = rhs.eval(t, &state.qhat, &mut self.k1)?;
        let cfl = dt * speed * nx / (2.0 * PI);
        if cfl > CFL_LIMIT {
            return Err(QgError::Cfl { time: t, dt, cfl });
        }
        axpy_into(&mut self.stage, &state.qhat, 0.5 * dt, &self.k1);
        rhs.eval(t + 0.5 * dt, &self.stage, &mut self.k2)?;
        axpy_into(&mut self.stage, &state.qhat, 0.5 * dt, &self.k2);
        rhs.eval(t + 0.5 * dt, &self.stage, &mut self.k3)?;
        axpy_into(&mut self.stage, &state.qhat, dt, &self.k3);
        rhs.eval(t + dt, &self.stage, &mut self.k4)?;
        let w = dt / 6.0;
        for i in 0..state.qhat.len() {
            state.qhat[i] += w * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
        state.time = t + dt;
        debug_assert!(state.hermitian_defect() < 1e-8 * (1.0 + max_norm(&state.qhat)));
        Ok(())
    }
}

fn axpy_into(out: &mut [Complex64], x: &[Complex64], a: f64, y: &[Complex64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Stream-function snapshots `(snapshot, layer, y, x)` sampled every
/// `sample_every` time units.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub sample_every: f64,
    pub dt: f64,
    pub params: QgParams,
    pub data: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: GridSpec, sample_every: f64, dt: f64, params: QgParams) -> Self {
        Self { grid, sample_every, dt, params, data: Vec::new() }
    }

    /// Values per snapshot (both layers).
    #[inline]
    pub fn snapshot_len(&self) -> usize {
        LAYERS * self.grid.len()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.snapshot_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn snapshot(&self, i: usize) -> &[f64] {
        let n = self.snapshot_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn snapshot_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.snapshot_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn push(&mut self, snapshot: &[f64]) {
        assert_eq!(snapshot.len(), self.snapshot_len());
        self.data.extend_from_slice(snapshot);
    }

    pub fn snapshots(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.snapshot_len())
    }

    /// One layer of snapshot `i`, row-major `(y, x)`.
    pub fn layer(&self, i: usize, j: usize) -> &[f64] {
        let n2 = self.grid.len();
        &self.snapshot(i)[j * n2..(j + 1) * n2]
    }

    /// Contiguous range of snapshots as a new trajectory.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let n = self.snapshot_len();
        Self {
            data: self.data[range.start * n..range.end * n].to_vec(),
            ..self.clone()
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.len() == other.len()
    }
}

/// A run that stopped early; `trajectory` holds the samples taken so far.
#[derive(Debug)]
pub struct PartialRun {
    pub trajectory: Trajectory,
    pub error: QgError,
}

impl std::fmt::Display for PartialRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} snapshots", self.error, self.trajectory.len())
    }
}

impl std::error::Error for PartialRun {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Number of RK4 steps between samples; errors unless `sample_every` is an
/// integer multiple of `dt`.
pub fn steps_per_sample(sample_every: f64, dt: f64) -> Result<usize, QgError> {
    let ratio = sample_every / dt;
    let steps = ratio.round();
    if !(dt > 0.0) || !(sample_every > 0.0) || steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(QgError::SamplingMismatch { sample_every, dt });
    }
    Ok(steps as usize)
}

/// `floor(horizon / sample_every) + 1`, robust to round-off in the ratio.
pub fn snapshot_count(horizon: f64, sample_every: f64) -> usize {
    (horizon / sample_every + 1e-9).floor() as usize + 1
}

/// Step `state` forward, handing each sampled stream function to `sink`
/// (snapshot index, values). Samples are taken at `t0 + i·sample_every`.
pub fn integrate_with<R, F>(
    rhs: &mut R,
    state: &mut SpectralState,
    horizon: f64,
    dt: f64,
    sample_every: f64,
    mut sink: F,
) -> Result<usize, QgError>
where
    R: Rhs + ?Sized,
    F: FnMut(usize, &[f64]) -> Result<(), QgError>,
{
    let per_sample = steps_per_sample(sample_every, dt)?;
    let count = snapshot_count(horizon, sample_every);
    let mut rk = Rk4::new(rhs.grid());
    let t0 = state.time;
    for i in 0..count {
        if i > 0 {
            for s in 0..per_sample {
                rk.step(rhs, state, dt)?;
                // keep time exact at sample points
                if s + 1 == per_sample {
                    state.time = t0 + i as f64 * sample_every;
                }
            }
        }
        let psi = rhs.streamfunction(state)?;
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(QgError::BlowUp { time: state.time });
        }
        sink(i, &psi)?;
    }
    Ok(count)
}

/// In-memory variant of [`integrate_with`].
pub fn integrate<R: Rhs + ?Sized>(
    rhs: &mut R,
    state: &mut SpectralState,
    horizon: f64,
    dt: f64,
    sample_every: f64,
    params: QgParams,
) -> Result<Trajectory, PartialRun> {
    let mut traj = Trajectory::new(rhs.grid(), sample_every, dt, params);
    let res = integrate_with(rhs, state, horizon, dt, sample_every, |_, psi| {
        traj.push(psi);
        Ok(())
    });
    match res {
        Ok(_) => Ok(traj),
        Err(error) => Err(PartialRun { trajectory: traj, error }),
    }
}

/// Advance without sampling (spin-up).
pub fn advance<R: Rhs + ?Sized>(rhs: &mut R, state: &mut SpectralState, duration: f64, dt: f64) -> Result<(), QgError> {
    let steps = (duration / dt).round() as usize;
    let mut rk = Rk4::new(rhs.grid());
    for _ in 0..steps {
        rk.step(rhs, state, dt)?;
    }
    Ok(())
}
