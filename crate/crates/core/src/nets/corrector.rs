use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::forward::{step, StepOut};
use super::io::Model;
use super::NetError;
use crate::spectral_qg::Trajectory;

/// Applies one trained network to a snapshot stream, carrying the hidden
/// state from one snapshot to the next. Memory does not depend on how many
/// snapshots pass through.
#[derive(Debug, Clone)]
pub struct Corrector<'a> {
    model: &'a Model,
    rng: ChaCha8Rng,
    h: Vec<f64>,
    c: Vec<f64>,
    next_h: Vec<f64>,
    next_c: Vec<f64>,
    e: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    mu: Vec<f64>,
    s_pre: Vec<f64>,
    sigma: Vec<f64>,
    z: Vec<f64>,
    eps: Vec<f64>,
    x: Vec<f64>,
    steps: u64,
}

impl<'a> Corrector<'a> {
    pub fn new(model: &'a Model, seed: u64) -> Self {
        let cfg = &model.params.config;
        let (hd, ld) = (cfg.hidden_dim, cfg.latent_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(super::train::STREAM_NOISE);
        Self {
            model,
            rng,
            h: vec![0.0; hd],
            c: vec![0.0; hd],
            next_h: vec![0.0; hd],
            next_c: vec![0.0; hd],
            e: vec![0.0; hd],
            gates: vec![0.0; 4 * hd],
            tanh_c: vec![0.0; hd],
            mu: vec![0.0; ld],
            s_pre: vec![0.0; ld],
            sigma: vec![0.0; ld],
            z: vec![0.0; ld],
            eps: vec![0.0; ld],
            x: vec![0.0; cfg.input_dim],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Correct one physical-unit snapshot into `out`.
    pub fn step(&mut self, snapshot: &[f64], out: &mut [f64]) -> Result<(), NetError> {
        let cfg = &self.model.params.config;
        let n = cfg.input_dim;
        if snapshot.len() != n || out.len() != n {
            return Err(NetError::Shape { expected: n, found: snapshot.len().max(out.len()) });
        }
        self.x.copy_from_slice(snapshot);
        self.model.norm.normalize(&mut self.x);
        if cfg.arch.is_probabilistic() {
            for v in &mut self.eps {
                *v = StandardNormal.sample(&mut self.rng);
            }
        }
        let w = self.model.params.weights();
        step(
            cfg.arch,
            &w,
            &self.x,
            &self.eps,
            &self.h,
            &self.c,
            StepOut {
                e: &mut self.e,
                gates: &mut self.gates,
                c: &mut self.next_c,
                tanh_c: &mut self.tanh_c,
                h: &mut self.next_h,
                mu: &mut self.mu,
                s_pre: &mut self.s_pre,
                sigma: &mut self.sigma,
                z: &mut self.z,
                y: out,
            },
        );
        std::mem::swap(&mut self.h, &mut self.next_h);
        std::mem::swap(&mut self.c, &mut self.next_c);
        self.model.norm.denormalize(out);
        self.steps += 1;
        Ok(())
    }
}

/// Correct a whole in-memory trajectory with one member.
pub fn correct_trajectory(model: &Model, traj: &Trajectory, seed: u64) -> Result<Trajectory, NetError> {
    let n = model.params.config.input_dim;
    if traj.snapshot_len() != n {
        return Err(NetError::Shape { expected: n, found: traj.snapshot_len() });
    }
    let mut out = traj.clone();
    let mut corrector = Corrector::new(model, seed);
    for (src, dst) in traj.snapshots().zip(out.data.chunks_mut(n)) {
        corrector.step(src, dst)?;
    }
    Ok(out)
}

/// Mean of one observable across members.
pub fn ensemble_mean(values: &[f64]) -> Result<f64, NetError> {
    if values.is_empty() {
        return Err(NetError::EnsembleTooSmall { needed: 1, found: 0 });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Unbiased variance of one observable across members.
pub fn ensemble_variance(values: &[f64]) -> Result<f64, NetError> {
    if values.len() < 2 {
        return Err(NetError::EnsembleTooSmall { needed: 2, found: values.len() });
    }
    let m = ensemble_mean(values)?;
    Ok(values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64)
}

/// Pointwise mean of equally long member curves.
pub fn ensemble_mean_curve(curves: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
    let first = curves.first().ok_or(NetError::EnsembleTooSmall { needed: 1, found: 0 })?;
    let mut acc = vec![0.0; first.len()];
    for c in curves {
        if c.len() != acc.len() {
            return Err(NetError::Shape { expected: acc.len(), found: c.len() });
        }
        acc.iter_mut().zip(c).for_each(|(a, v)| *a += v);
    }
    let k = curves.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}
