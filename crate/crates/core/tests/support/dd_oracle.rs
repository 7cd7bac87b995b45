//! Central finite differences of the full training loss, evaluated in
//! double-double arithmetic by a separate implementation of the four
//! networks. The extra precision keeps cancellation noise far below the
//! gradients being checked even at a step of 1e-6.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use qgdebias_core::nets::{Architecture, NetParams};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

    pub fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    fn norm(a: f64, b: f64) -> Self {
        let (hi, lo) = quick_two_sum(a, b);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn exp(self) -> Self {
        if self.hi > 700.0 {
            return Dd::from(f64::INFINITY);
        }
        if self.hi < -700.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - Dd::LN2 * Dd::from(k)).ldexp(-10);
        // Taylor series on |r| < 2^-10 · ln2 / 2
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=14 {
            term = term * r / Dd::from(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    pub fn ln(self) -> Self {
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn tanh(self) -> Self {
        if self.hi.abs() > 40.0 {
            return Dd::from(self.hi.signum());
        }
        let t = (self + self).exp();
        (t - Dd::ONE) / (t + Dd::ONE)
    }

    pub fn sigmoid(self) -> Self {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }

    pub fn softplus(self) -> Self {
        if self.hi > 0.0 {
            self + (Dd::ONE + (-self).exp()).ln()
        } else {
            (Dd::ONE + self.exp()).ln()
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::norm(s1, s2 + t2)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::norm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (a, b) = quick_two_sum(q1, q2);
        Dd { hi: a, lo: b } + Dd::from(q3)
    }
}

fn dense(w: &[Dd], b: Option<&[Dd]>, x: &[Dd], rows: usize) -> Vec<Dd> {
    let cols = x.len();
    (0..rows)
        .map(|r| {
            let mut acc = b.map_or(Dd::ZERO, |b| b[r]);
            for c in 0..cols {
                acc = acc + w[r * cols + c] * x[c];
            }
            acc
        })
        .collect()
}

/// Full loss at `theta` (f64 parameters plus an optional exact offset on
/// one entry) for inputs `x`, targets `u` and frozen noise `eps`.
pub fn loss_dd(params: &NetParams, offset: Option<(usize, f64)>, x: &[f64], u: &[f64], eps: &[f64]) -> Dd {
    let cfg = params.config;
    let (n, hd, ld) = (cfg.input_dim, cfg.hidden_dim, cfg.latent_dim);
    let mut theta: Vec<Dd> = params.theta.iter().map(|&v| Dd::from(v)).collect();
    if let Some((i, h)) = offset {
        theta[i] = theta[i] + Dd::from(h);
    }
    let blk = |name: &str| -> &[Dd] {
        match params.layout.get(name) {
            Some(b) => &theta[b.range()],
            None => &[],
        }
    };
    let arch = cfg.arch;
    let steps = x.len() / n;
    let mut h = vec![Dd::ZERO; hd];
    let mut c = vec![Dd::ZERO; hd];
    let mut mse = Dd::ZERO;
    let mut mass = Dd::ZERO;
    let mut kl = Dd::ZERO;
    let block = n / cfg.layers;
    for t in 0..steps {
        let xt: Vec<Dd> = x[t * n..(t + 1) * n].iter().map(|&v| Dd::from(v)).collect();
        let e: Vec<Dd> = dense(blk("encoder.w"), Some(blk("encoder.b")), &xt, hd).into_iter().map(Dd::tanh).collect();
        let latent = |src: &[Dd]| -> (Vec<Dd>, Vec<Dd>, Vec<Dd>) {
            let mu = dense(blk("latent_mu.w"), Some(blk("latent_mu.b")), src, ld);
            let sig: Vec<Dd> = dense(blk("latent_sigma.w"), Some(blk("latent_sigma.b")), src, ld)
                .into_iter()
                .map(Dd::softplus)
                .collect();
            let z = (0..ld).map(|k| mu[k] + sig[k] * Dd::from(eps[t * ld + k])).collect();
            (mu, sig, z)
        };
        let mut lstm = |inp: &[Dd], z: Option<&[Dd]>| {
            let mut g = dense(blk("lstm.wx"), Some(blk("lstm.b")), inp, 4 * hd);
            let r = dense(blk("lstm.wh"), None, &h, 4 * hd);
            for k in 0..4 * hd {
                g[k] = g[k] + r[k];
            }
            if let Some(z) = z {
                let a = dense(blk("z_in.w"), None, z, 4 * hd);
                for k in 0..4 * hd {
                    g[k] = g[k] + a[k];
                }
            }
            for k in 0..hd {
                let i = g[k].sigmoid();
                let f = g[hd + k].sigmoid();
                let gg = g[2 * hd + k].tanh();
                let o = g[3 * hd + k].sigmoid();
                c[k] = f * c[k] + i * gg;
                h[k] = o * c[k].tanh();
            }
        };
        let (y, stats) = match arch {
            Architecture::Rnn => {
                lstm(&e, None);
                (dense(blk("decoder1.w"), Some(blk("decoder1.b")), &h, n), None)
            }
            Architecture::VaeRnn => {
                lstm(&e, None);
                let (mu, sig, z) = latent(&h);
                (dense(blk("decoder1.w"), Some(blk("decoder1.b")), &z, n), Some((mu, sig)))
            }
            Architecture::Storn | Architecture::Vrnn => {
                let (mu, sig, z) = latent(&e);
                lstm(&e, Some(&z));
                let mut y = dense(blk("decoder1.w"), Some(blk("decoder1.b")), &h, n);
                if arch == Architecture::Vrnn {
                    let v2 = dense(blk("decoder2.w"), None, &z, n);
                    for k in 0..n {
                        y[k] = y[k] + v2[k];
                    }
                }
                (y, Some((mu, sig)))
            }
        };
        for k in 0..n {
            let d = y[k] - Dd::from(u[t * n + k]);
            mse = mse + d * d;
        }
        for b in y.chunks(block) {
            let mut s = Dd::ZERO;
            for v in b {
                s = s + *v;
            }
            mass = mass + (s / Dd::from(block as f64)).abs();
        }
        if let Some((mu, sig)) = stats {
            for k in 0..ld {
                let term = mu[k] * mu[k] + sig[k] * sig[k] - Dd::ONE - Dd::from(2.0) * sig[k].ln();
                kl = kl + Dd::from(0.5) * term;
            }
        }
    }
    let tt = Dd::from(steps as f64);
    mse / tt + mass / tt + Dd::from(cfg.lambda_kl) * kl / tt
}

/// `(L(θ + h e_i) − L(θ − h e_i)) / 2h` for every parameter.
pub fn central_differences(params: &NetParams, x: &[f64], u: &[f64], eps: &[f64], h: f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let plus = loss_dd(params, Some((i, h)), x, u, eps);
            let minus = loss_dd(params, Some((i, -h)), x, u, eps);
            ((plus - minus) / Dd::from(2.0 * h)).to_f64()
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|)` and where it occurs; pairs that are both
/// exactly zero count as agreeing.
pub fn max_relative_error(analytic: &[f64], reference: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (a, b)) in analytic.iter().zip(reference).enumerate() {
        let scale = a.abs().max(b.abs());
        let rel = if scale == 0.0 { 0.0 } else { (a - b).abs() / scale };
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    worst
}
