use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, NetConfig, NetError};

/// One named dense block: `rows × cols` weights (cols = 1 for biases).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Parameter blocks in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub total: usize,
}

impl Layout {
    pub fn new(arch: Architecture, n: usize, h: usize, l: usize) -> Self {
        let mut shapes: Vec<(&'static str, usize, usize)> = vec![
            ("encoder.w", h, n),
            ("encoder.b", h, 1),
            ("lstm.wx", 4 * h, h),
            ("lstm.wh", 4 * h, h),
            ("lstm.b", 4 * h, 1),
        ];
        if arch.is_probabilistic() {
            // both latent sources (h_t or e_t) have hidden_dim entries
            shapes.extend([("latent_mu.w", l, h), ("latent_mu.b", l, 1), ("latent_sigma.w", l, h), ("latent_sigma.b", l, 1)]);
        }
        if arch.latent_upstream() {
            shapes.push(("z_in.w", 4 * h, l));
        }
        let dec_in = if arch == Architecture::VaeRnn { l } else { h };
        shapes.extend([("decoder1.w", n, dec_in), ("decoder1.b", n, 1)]);
        if arch == Architecture::Vrnn {
            shapes.push(("decoder2.w", n, l));
        }
        let mut offset = 0;
        let blocks = shapes
            .into_iter()
            .map(|(name, rows, cols)| {
                let b = Block { name, offset, rows, cols };
                offset += rows * cols;
                b
            })
            .collect();
        Self { blocks, total: offset }
    }

    pub fn get(&self, name: &str) -> Option<Block> {
        self.blocks.iter().copied().find(|b| b.name == name)
    }
}

/// Exact number of trainable scalars for a configuration.
pub fn count_params(cfg: &NetConfig) -> usize {
    Layout::new(cfg.arch, cfg.input_dim, cfg.hidden_dim, cfg.latent_dim).total
}

/// All trainable weights of one network, flattened in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub config: NetConfig,
    pub layout: Layout,
    pub theta: Vec<f64>,
}

/// Borrowed views of every block.
pub(crate) struct Weights<'a> {
    pub enc_w: &'a [f64],
    pub enc_b: &'a [f64],
    pub wx: &'a [f64],
    pub wh: &'a [f64],
    pub lstm_b: &'a [f64],
    pub mu_w: &'a [f64],
    pub mu_b: &'a [f64],
    pub sig_w: &'a [f64],
    pub sig_b: &'a [f64],
    pub z_in: &'a [f64],
    pub dec1_w: &'a [f64],
    pub dec1_b: &'a [f64],
    pub dec2_w: &'a [f64],
}

/// Mutable views with the same block names, used for gradients.
pub(crate) struct WeightsMut<'a> {
    pub enc_w: &'a mut [f64],
    pub enc_b: &'a mut [f64],
    pub wx: &'a mut [f64],
    pub wh: &'a mut [f64],
    pub lstm_b: &'a mut [f64],
    pub mu_w: &'a mut [f64],
    pub mu_b: &'a mut [f64],
    pub sig_w: &'a mut [f64],
    pub sig_b: &'a mut [f64],
    pub z_in: &'a mut [f64],
    pub dec1_w: &'a mut [f64],
    pub dec1_b: &'a mut [f64],
    pub dec2_w: &'a mut [f64],
}

fn block_len(layout: &Layout, name: &str) -> usize {
    layout.get(name).map_or(0, |b| b.len())
}

/// Names in layout order; absent blocks get empty slices.
const ORDER: [&str; 13] = [
    "encoder.w",
    "encoder.b",
    "lstm.wx",
    "lstm.wh",
    "lstm.b",
    "latent_mu.w",
    "latent_mu.b",
    "latent_sigma.w",
    "latent_sigma.b",
    "z_in.w",
    "decoder1.w",
    "decoder1.b",
    "decoder2.w",
];

pub(crate) fn views<'a>(layout: &Layout, theta: &'a [f64]) -> Weights<'a> {
    let mut rest = theta;
    let mut take = |name: &str| {
        let (a, b) = rest.split_at(block_len(layout, name));
        rest = b;
        a
    };
    let mut v: [&[f64]; 13] = [&[]; 13];
    for (slot, name) in v.iter_mut().zip(ORDER) {
        *slot = take(name);
    }
    Weights {
        enc_w: v[0],
        enc_b: v[1],
        wx: v[2],
        wh: v[3],
        lstm_b: v[4],
        mu_w: v[5],
        mu_b: v[6],
        sig_w: v[7],
        sig_b: v[8],
        z_in: v[9],
        dec1_w: v[10],
        dec1_b: v[11],
        dec2_w: v[12],
    }
}

pub(crate) fn views_mut<'a>(layout: &Layout, theta: &'a mut [f64]) -> WeightsMut<'a> {
    let mut rest = theta;
    let mut parts: Vec<&'a mut [f64]> = Vec::with_capacity(13);
    for name in ORDER {
        let (a, b) = std::mem::take(&mut rest).split_at_mut(block_len(layout, name));
        parts.push(a);
        rest = b;
    }
    let mut it = parts.into_iter();
    let mut next = || it.next().unwrap();
    WeightsMut {
        enc_w: next(),
        enc_b: next(),
        wx: next(),
        wh: next(),
        lstm_b: next(),
        mu_w: next(),
        mu_b: next(),
        sig_w: next(),
        sig_b: next(),
        z_in: next(),
        dec1_w: next(),
        dec1_b: next(),
        dec2_w: next(),
    }
}

impl NetParams {
    pub fn zeros(config: NetConfig) -> Result<Self, NetError> {
        config.validate()?;
        let layout = Layout::new(config.arch, config.input_dim, config.hidden_dim, config.latent_dim);
        let theta = vec![0.0; layout.total];
        Ok(Self { config, layout, theta })
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation from `config.seed`.
    pub fn init(config: NetConfig) -> Result<Self, NetError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(0);
        let h = config.hidden_dim as f64;
        for b in p.layout.blocks.clone() {
            let fan_in = match b.name {
                "encoder.w" | "encoder.b" => config.input_dim as f64,
                "z_in.w" | "decoder2.w" => config.latent_dim as f64,
                "decoder1.w" | "decoder1.b" if config.arch == Architecture::VaeRnn => config.latent_dim as f64,
                _ => h,
            };
            let bound = 1.0 / fan_in.sqrt();
            for v in &mut p.theta[b.range()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.get(name).map(|b| &self.theta[b.range()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let b = self.layout.get(name)?;
        Some(&mut self.theta[b.range()])
    }

    pub(crate) fn weights(&self) -> Weights<'_> {
        views(&self.layout, &self.theta)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.theta.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}
