use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::backward;
use super::forward::{draw_noise, forward, LossParts};
use super::{NetConfig, NetError, NetParams};
use crate::nudging::TrainingSet;

/// RNG streams derived from one member seed.
pub(crate) const STREAM_SHUFFLE: u64 = 1;
pub(crate) const STREAM_NOISE: u64 = 2;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            theta[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Mean loss terms over the windows of one epoch (1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mse: f64,
    pub mass: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetParams,
    pub history: Vec<EpochLoss>,
}

/// Contiguous `[start, end)` windows; a trailing piece shorter than 2 joins
/// the previous window.
pub(crate) fn windows(steps: usize, window: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..steps).step_by(window).map(|s| (s, (s + window).min(steps))).collect();
    if out.len() > 1 && out.last().is_some_and(|&(s, e)| e - s < 2) {
        let (_, end) = out.pop().unwrap();
        out.last_mut().unwrap().1 = end;
    }
    out
}

/// Train on aligned `inputs → targets` (`T × input_dim`, already
/// standardized). `on_epoch` sees the parameters after every epoch.
pub fn train_sequences<F>(config: NetConfig, inputs: &[f64], targets: &[f64], mut on_epoch: F) -> Result<TrainOutcome, NetError>
where
    F: FnMut(usize, &NetParams),
{
    config.validate()?;
    let n = config.input_dim;
    if inputs.len() != targets.len() || inputs.is_empty() || inputs.len() % n != 0 {
        return Err(NetError::Shape { expected: inputs.len(), found: targets.len() });
    }
    let steps = inputs.len() / n;
    let mut params = NetParams::init(config)?;
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle.set_stream(STREAM_SHUFFLE);
    let mut noise = ChaCha8Rng::seed_from_u64(config.seed);
    noise.set_stream(STREAM_NOISE);
    let mut order = windows(steps, config.window);
    let mut grad = vec![0.0; params.len()];
    let mut history = Vec::with_capacity(config.epochs);
    let lat = if config.arch.is_probabilistic() { config.latent_dim } else { 0 };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut acc = LossParts::default();
        for &(s, e) in &order {
            let eps = draw_noise(&mut noise, (e - s) * lat);
            let tape = forward(&params, &inputs[s * n..e * n], &eps)?;
            let parts = backward(&params, &tape, &targets[s * n..e * n], &mut grad)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(NetError::Diverged { epoch, history });
            }
            adam.step(&mut params.theta, &grad);
            acc.mse += parts.mse;
            acc.mass += parts.mass;
            acc.kl += parts.kl;
            acc.total += parts.total;
        }
        let k = order.len() as f64;
        history.push(EpochLoss { epoch, mse: acc.mse / k, mass: acc.mass / k, kl: acc.kl / k, total: acc.total / k });
        on_epoch(epoch, &params);
    }
    Ok(TrainOutcome { params, history })
}

/// Standardize a trajectory with the training-set statistics.
pub(crate) fn standardized(set: &TrainingSet, traj: &crate::spectral_qg::Trajectory) -> Vec<f64> {
    let mut data = traj.data.clone();
    for snap in data.chunks_mut(traj.snapshot_len()) {
        set.norm.normalize(snap);
    }
    data
}

/// Learn the map from the corrected nudged run to the reference, both
/// standardized by the reference statistics.
pub fn train(config: NetConfig, set: &TrainingSet) -> Result<TrainOutcome, NetError> {
    train_with(config, set, |_, _| {})
}

/// [`train`] with a callback after every epoch (checkpointing).
pub fn train_with<F>(config: NetConfig, set: &TrainingSet, on_epoch: F) -> Result<TrainOutcome, NetError>
where
    F: FnMut(usize, &NetParams),
{
    let n = set.u.snapshot_len();
    if config.input_dim != n {
        return Err(NetError::Shape { expected: n, found: config.input_dim });
    }
    let x = standardized(set, &set.v_tau_corrected);
    let y = standardized(set, &set.u);
    train_sequences(config, &x, &y, on_epoch)
}
