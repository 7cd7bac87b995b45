use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{affine, matvec_add, sigmoid};
use super::params::Weights;
use super::{Architecture, NetError, NetParams};

/// Latent means, scales and samples, each `T × latent_dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats {
    pub latent_dim: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
}

impl LatentStats {
    pub fn steps(&self) -> usize {
        self.mu.len() / self.latent_dim
    }
}

/// Saved activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    pub arch: Architecture,
    pub steps: usize,
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]` per step.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    /// Pre-softplus scale activations.
    pub s_pre: Vec<f64>,
    pub eps: Vec<f64>,
    pub latent: Option<LatentStats>,
    pub y: Vec<f64>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `z = mu + sigma ⊙ eps`, unchecked.
pub fn reparameterize(mu: &[f64], sigma: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter().zip(sigma).zip(eps).map(|((m, s), e)| m + s * e).collect()
}

/// Draw `eps ~ N(0, I)` and return `mu + sigma ⊙ eps`.
pub fn sample_latent<R: Rng + ?Sized>(mu: &[f64], sigma: &[f64], rng: &mut R) -> Result<Vec<f64>, NetError> {
    if mu.len() != sigma.len() {
        return Err(NetError::Shape { expected: mu.len(), found: sigma.len() });
    }
    if let Some(&s) = sigma.iter().find(|s| !(**s > 0.0)) {
        return Err(NetError::NonPositiveSigma(s));
    }
    let eps = draw_noise(rng, mu.len());
    Ok(reparameterize(mu, sigma, &eps))
}

/// `count` standard normal draws.
pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `½ Σ_i (μ² + σ² − 1 − ln σ²)` summed over latent dimensions and averaged
/// over the `mu.len() / latent_dim` time steps.
pub fn kl_to_standard_normal(mu: &[f64], sigma: &[f64], latent_dim: usize) -> Result<f64, NetError> {
    if mu.len() != sigma.len() || latent_dim == 0 || mu.len() % latent_dim != 0 {
        return Err(NetError::Shape { expected: mu.len(), found: sigma.len() });
    }
    if let Some(&s) = sigma.iter().find(|s| !(**s > 0.0)) {
        return Err(NetError::NonPositiveSigma(s));
    }
    let steps = (mu.len() / latent_dim).max(1) as f64;
    let s: f64 = mu
        .iter()
        .zip(sigma)
        .map(|(m, s)| 0.5 * (m * m + s * s - 1.0 - 2.0 * s.ln()))
        .sum();
    Ok(s / steps)
}

/// Loss terms of one sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub mse: f64,
    pub mass: f64,
    pub kl: f64,
    pub total: f64,
}

/// `(1/T) Σ_t ‖ŷ_t − u_t‖² + (1/T) Σ_t Σ_layers |mean(ŷ_t)| + λ·KL`, where
/// each snapshot of `dim` values is split into `layers` equal blocks.
pub fn loss(
    pred: &[f64],
    target: &[f64],
    dim: usize,
    layers: usize,
    latent: Option<&LatentStats>,
    lambda_kl: f64,
) -> Result<LossParts, NetError> {
    if pred.len() != target.len() {
        return Err(NetError::Shape { expected: pred.len(), found: target.len() });
    }
    if dim == 0 || layers == 0 || dim % layers != 0 || pred.len() % dim != 0 {
        return Err(NetError::Shape { expected: dim, found: pred.len() });
    }
    let steps = (pred.len() / dim) as f64;
    let mse = pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / steps;
    let block = dim / layers;
    let mass = pred
        .chunks(block)
        .map(|c| (c.iter().sum::<f64>() / block as f64).abs())
        .sum::<f64>()
        / steps;
    let kl = match latent {
        Some(l) => kl_to_standard_normal(&l.mu, &l.sigma, l.latent_dim)?,
        None => 0.0,
    };
    Ok(LossParts { mse, mass, kl, total: mse + mass + lambda_kl * kl })
}

/// One LSTM update. `z` enters the gates through `z_in` when present.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_cell(
    w: &Weights<'_>,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    z: Option<&[f64]>,
    gates: &mut [f64],
    c: &mut [f64],
    tanh_c: &mut [f64],
    h: &mut [f64],
) {
    let hd = h.len();
    affine(w.wx, w.lstm_b, x, gates);
    matvec_add(w.wh, h_prev, gates);
    if let Some(z) = z {
        matvec_add(w.z_in, z, gates);
    }
    for k in 0..hd {
        let i = sigmoid(gates[k]);
        let f = sigmoid(gates[hd + k]);
        let g = gates[2 * hd + k].tanh();
        let o = sigmoid(gates[3 * hd + k]);
        gates[k] = i;
        gates[hd + k] = f;
        gates[2 * hd + k] = g;
        gates[3 * hd + k] = o;
        c[k] = f * c_prev[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }
}

/// Standard LSTM step (input, forget, output gates sigmoid; candidate tanh)
/// on a hidden-sized input, without latent injection.
pub fn lstm_step(params: &NetParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
    let hd = params.config.hidden_dim;
    for v in [x, h_prev, c_prev] {
        if v.len() != hd {
            return Err(NetError::Shape { expected: hd, found: v.len() });
        }
    }
    let w = params.weights();
    let mut gates = vec![0.0; 4 * hd];
    let (mut c, mut tc, mut h) = (vec![0.0; hd], vec![0.0; hd], vec![0.0; hd]);
    lstm_cell(&w, x, h_prev, c_prev, None, &mut gates, &mut c, &mut tc, &mut h);
    Ok((h, c))
}

/// Per-step outputs written by [`step`].
pub(crate) struct StepOut<'a> {
    pub e: &'a mut [f64],
    pub gates: &'a mut [f64],
    pub c: &'a mut [f64],
    pub tanh_c: &'a mut [f64],
    pub h: &'a mut [f64],
    pub mu: &'a mut [f64],
    pub s_pre: &'a mut [f64],
    pub sigma: &'a mut [f64],
    pub z: &'a mut [f64],
    pub y: &'a mut [f64],
}

/// Advance one snapshot: encoder, latent, LSTM, decoder.
pub(crate) fn step(
    arch: Architecture,
    w: &Weights<'_>,
    x: &[f64],
    eps: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    out: StepOut<'_>,
) {
    affine(w.enc_w, w.enc_b, x, out.e);
    out.e.iter_mut().for_each(|v| *v = v.tanh());
    let latent = |src: &[f64], mu: &mut [f64], s_pre: &mut [f64], sigma: &mut [f64], z: &mut [f64]| {
        affine(w.mu_w, w.mu_b, src, mu);
        affine(w.sig_w, w.sig_b, src, s_pre);
        for k in 0..mu.len() {
            sigma[k] = softplus(s_pre[k]);
            z[k] = mu[k] + sigma[k] * eps[k];
        }
    };
    match arch {
        Architecture::Rnn => {
            lstm_cell(w, out.e, h_prev, c_prev, None, out.gates, out.c, out.tanh_c, out.h);
            affine(w.dec1_w, w.dec1_b, out.h, out.y);
        }
        Architecture::VaeRnn => {
            lstm_cell(w, out.e, h_prev, c_prev, None, out.gates, out.c, out.tanh_c, out.h);
            latent(out.h, out.mu, out.s_pre, out.sigma, out.z);
            affine(w.dec1_w, w.dec1_b, out.z, out.y);
        }
        Architecture::Storn | Architecture::Vrnn => {
            latent(out.e, out.mu, out.s_pre, out.sigma, out.z);
            lstm_cell(w, out.e, h_prev, c_prev, Some(out.z), out.gates, out.c, out.tanh_c, out.h);
            affine(w.dec1_w, w.dec1_b, out.h, out.y);
            if arch == Architecture::Vrnn {
                matvec_add(w.dec2_w, out.z, out.y);
            }
        }
    }
}

/// Run a whole sequence (`T × input_dim`, row-major) from zero state with the
/// given noise (`T × latent_dim`; ignored by the RNN) and record a tape.
pub fn forward(params: &NetParams, inputs: &[f64], eps: &[f64]) -> Result<Tape, NetError> {
    let cfg = &params.config;
    let (n, hd, ld) = (cfg.input_dim, cfg.hidden_dim, cfg.latent_dim);
    if inputs.is_empty() || inputs.len() % n != 0 {
        return Err(NetError::Shape { expected: n, found: inputs.len() });
    }
    let steps = inputs.len() / n;
    let prob = cfg.arch.is_probabilistic();
    let lt = if prob { steps * ld } else { 0 };
    if prob && eps.len() != lt {
        return Err(NetError::Shape { expected: lt, found: eps.len() });
    }
    let w = params.weights();
    let mut tape = Tape {
        arch: cfg.arch,
        steps,
        x: inputs.to_vec(),
        e: vec![0.0; steps * hd],
        gates: vec![0.0; steps * 4 * hd],
        c: vec![0.0; steps * hd],
        tanh_c: vec![0.0; steps * hd],
        h: vec![0.0; steps * hd],
        s_pre: vec![0.0; lt],
        eps: if prob { eps.to_vec() } else { Vec::new() },
        latent: None,
        y: vec![0.0; steps * n],
    };
    let mut mu = vec![0.0; lt];
    let mut sigma = vec![0.0; lt];
    let mut z = vec![0.0; lt];
    let zero = vec![0.0; hd];
    for t in 0..steps {
        let (h_done, h_rest) = tape.h.split_at_mut(t * hd);
        let (c_done, c_rest) = tape.c.split_at_mut(t * hd);
        let h_prev = if t == 0 { &zero[..] } else { &h_done[(t - 1) * hd..] };
        let c_prev = if t == 0 { &zero[..] } else { &c_done[(t - 1) * hd..] };
        let (mu_t, s_t, sig_t, z_t, eps_t): (&mut [f64], &mut [f64], &mut [f64], &mut [f64], &[f64]) = if prob {
            let r = t * ld..(t + 1) * ld;
            (
                &mut mu[r.clone()],
                &mut tape.s_pre[r.clone()],
                &mut sigma[r.clone()],
                &mut z[r.clone()],
                &tape.eps[r],
            )
        } else {
            (&mut [], &mut [], &mut [], &mut [], &[])
        };
        step(
            cfg.arch,
            &w,
            &inputs[t * n..(t + 1) * n],
            eps_t,
            h_prev,
            c_prev,
            StepOut {
                e: &mut tape.e[t * hd..(t + 1) * hd],
                gates: &mut tape.gates[t * 4 * hd..(t + 1) * 4 * hd],
                c: &mut c_rest[..hd],
                tanh_c: &mut tape.tanh_c[t * hd..(t + 1) * hd],
                h: &mut h_rest[..hd],
                mu: mu_t,
                s_pre: s_t,
                sigma: sig_t,
                z: z_t,
                y: &mut tape.y[t * n..(t + 1) * n],
            },
        );
    }
    if prob {
        tape.latent = Some(LatentStats { latent_dim: ld, mu, sigma, z });
    }
    Ok(tape)
}

fn expect_arch(params: &NetParams, arch: Architecture) -> Result<(), NetError> {
    if params.config.arch != arch {
        return Err(NetError::WrongArchitecture { expected: arch, found: params.config.arch });
    }
    Ok(())
}

fn forward_sampled<R: Rng + ?Sized>(
    params: &NetParams,
    arch: Architecture,
    inputs: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, LatentStats), NetError> {
    expect_arch(params, arch)?;
    let steps = inputs.len() / params.config.input_dim.max(1);
    let eps = draw_noise(rng, steps * params.config.latent_dim);
    let tape = forward(params, inputs, &eps)?;
    Ok((tape.y, tape.latent.expect("probabilistic tape carries latent stats")))
}

/// Deterministic LSTM network: `ŷ_t = decoder1(h_t)`.
pub fn forward_rnn(params: &NetParams, inputs: &[f64]) -> Result<Vec<f64>, NetError> {
    expect_arch(params, Architecture::Rnn)?;
    Ok(forward(params, inputs, &[])?.y)
}

/// Latent sampled from `h_t`, decoded from `z_t`.
pub fn forward_vae_rnn<R: Rng + ?Sized>(params: &NetParams, inputs: &[f64], rng: &mut R) -> Result<(Vec<f64>, LatentStats), NetError> {
    forward_sampled(params, Architecture::VaeRnn, inputs, rng)
}

/// Latent sampled from `e_t` and injected into the LSTM gates.
pub fn forward_storn<R: Rng + ?Sized>(params: &NetParams, inputs: &[f64], rng: &mut R) -> Result<(Vec<f64>, LatentStats), NetError> {
    forward_sampled(params, Architecture::Storn, inputs, rng)
}

/// As STORN, with `z_t` also feeding the decoder through `decoder2`.
pub fn forward_vrnn<R: Rng + ?Sized>(params: &NetParams, inputs: &[f64], rng: &mut R) -> Result<(Vec<f64>, LatentStats), NetError> {
    forward_sampled(params, Architecture::Vrnn, inputs, rng)
}
