use super::forward::{forward, loss, LossParts, Tape};
use super::linalg::{axpy, matvec_t_add, outer_add, sigmoid};
use super::params::{views_mut, Weights, WeightsMut};
use super::{Architecture, NetError, NetParams};

/// Reverse pass over `tape`: overwrites `grad` with the gradient of the full
/// loss against `target` and returns the loss terms.
pub fn backward(params: &NetParams, tape: &Tape, target: &[f64], grad: &mut [f64]) -> Result<LossParts, NetError> {
    let cfg = &params.config;
    let (n, hd, ld) = (cfg.input_dim, cfg.hidden_dim, cfg.latent_dim);
    if grad.len() != params.len() {
        return Err(NetError::Shape { expected: params.len(), found: grad.len() });
    }
    if tape.arch != cfg.arch || tape.y.len() != tape.steps * n {
        return Err(NetError::WrongArchitecture { expected: cfg.arch, found: tape.arch });
    }
    let parts = loss(&tape.y, target, n, cfg.layers, tape.latent.as_ref(), cfg.lambda_kl)?;
    grad.fill(0.0);
    let w = params.weights();
    let mut g = views_mut(&params.layout, grad);

    let steps = tape.steps;
    let inv_t = 1.0 / steps as f64;
    let block = n / cfg.layers;
    let kl_scale = cfg.lambda_kl * inv_t;

    let mut dy = vec![0.0; n];
    let mut dh = vec![0.0; hd];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut de = vec![0.0; hd];
    let mut dz = vec![0.0; ld];
    let mut da = vec![0.0; 4 * hd];
    let zero = vec![0.0; hd];

    for t in (0..steps).rev() {
        let y = &tape.y[t * n..(t + 1) * n];
        let u = &target[t * n..(t + 1) * n];
        for (k, blk) in y.chunks(block).enumerate() {
            let mean = blk.iter().sum::<f64>() / block as f64;
            let dm = sign(mean) * inv_t / block as f64;
            for j in 0..block {
                let i = k * block + j;
                dy[i] = 2.0 * (y[i] - u[i]) * inv_t + dm;
            }
        }
        let h_t = &tape.h[t * hd..(t + 1) * hd];
        let e_t = &tape.e[t * hd..(t + 1) * hd];
        let z_t = tape.latent.as_ref().map(|l| &l.z[t * ld..(t + 1) * ld]);
        dh.copy_from_slice(&dh_next);
        de.fill(0.0);
        dz.fill(0.0);

        match cfg.arch {
            Architecture::VaeRnn => {
                let z = z_t.unwrap();
                outer_add(&dy, z, g.dec1_w);
                axpy(1.0, &dy, g.dec1_b);
                matvec_t_add(w.dec1_w, &dy, &mut dz);
                latent_backward(&w, &mut g, tape, t, ld, h_t, &dz, kl_scale, &mut dh);
            }
            _ => {
                outer_add(&dy, h_t, g.dec1_w);
                axpy(1.0, &dy, g.dec1_b);
                matvec_t_add(w.dec1_w, &dy, &mut dh);
                if cfg.arch == Architecture::Vrnn {
                    let z = z_t.unwrap();
                    outer_add(&dy, z, g.dec2_w);
                    matvec_t_add(w.dec2_w, &dy, &mut dz);
                }
            }
        }

        // LSTM cell
        let gates = &tape.gates[t * 4 * hd..(t + 1) * 4 * hd];
        let tanh_c = &tape.tanh_c[t * hd..(t + 1) * hd];
        let (h_prev, c_prev) = if t == 0 {
            (&zero[..], &zero[..])
        } else {
            (&tape.h[(t - 1) * hd..t * hd], &tape.c[(t - 1) * hd..t * hd])
        };
        for k in 0..hd {
            let (i, f, gg, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            let tc = tanh_c[k];
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dc * gg * i * (1.0 - i);
            da[hd + k] = dc * c_prev[k] * f * (1.0 - f);
            da[2 * hd + k] = dc * i * (1.0 - gg * gg);
            da[3 * hd + k] = dh[k] * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        outer_add(&da, e_t, g.wx);
        outer_add(&da, h_prev, g.wh);
        axpy(1.0, &da, g.lstm_b);
        matvec_t_add(w.wx, &da, &mut de);
        dh_next.fill(0.0);
        matvec_t_add(w.wh, &da, &mut dh_next);
        if cfg.arch.latent_upstream() {
            let z = z_t.unwrap();
            outer_add(&da, z, g.z_in);
            matvec_t_add(w.z_in, &da, &mut dz);
            latent_backward(&w, &mut g, tape, t, ld, e_t, &dz, kl_scale, &mut de);
        }

        // encoder
        for k in 0..hd {
            de[k] *= 1.0 - e_t[k] * e_t[k];
        }
        outer_add(&de, &tape.x[t * n..(t + 1) * n], g.enc_w);
        axpy(1.0, &de, g.enc_b);
    }
    Ok(parts)
}

/// Latent heads at step `t`: given `dz`, accumulate head gradients and add
/// the gradient with respect to the head input `src` into `dsrc`.
#[allow(clippy::too_many_arguments)]
fn latent_backward(
    w: &Weights<'_>,
    g: &mut WeightsMut<'_>,
    tape: &Tape,
    t: usize,
    ld: usize,
    src: &[f64],
    dz: &[f64],
    kl_scale: f64,
    dsrc: &mut [f64],
) {
    let lat = tape.latent.as_ref().unwrap();
    let r = t * ld..(t + 1) * ld;
    let (mu, sigma, eps, s_pre) = (&lat.mu[r.clone()], &lat.sigma[r.clone()], &tape.eps[r.clone()], &tape.s_pre[r]);
    let mut dmu = vec![0.0; ld];
    let mut ds = vec![0.0; ld];
    for k in 0..ld {
        dmu[k] = dz[k] + kl_scale * mu[k];
        let dsigma = dz[k] * eps[k] + kl_scale * (sigma[k] - 1.0 / sigma[k]);
        ds[k] = dsigma * sigmoid(s_pre[k]);
    }
    outer_add(&dmu, src, g.mu_w);
    axpy(1.0, &dmu, g.mu_b);
    outer_add(&ds, src, g.sig_w);
    axpy(1.0, &ds, g.sig_b);
    matvec_t_add(w.mu_w, &dmu, dsrc);
    matvec_t_add(w.sig_w, &ds, dsrc);
}

/// Forward with fixed noise, then backward. Returns the loss terms and the
/// gradient in layout order.
pub fn loss_and_grad(params: &NetParams, inputs: &[f64], target: &[f64], eps: &[f64]) -> Result<(LossParts, Vec<f64>), NetError> {
    let tape = forward(params, inputs, eps)?;
    let mut grad = vec![0.0; params.len()];
    let parts = backward(params, &tape, target, &mut grad)?;
    Ok((parts, grad))
}

/// Subgradient of `|x|` with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
