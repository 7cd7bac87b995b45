//! Model files and loss histories.
//!
//! Model layout, little-endian:
//!
//! ```text
//! magic       4 bytes "QGNN"
//! version     u32
//! arch        u32     0 rnn, 1 vaernn, 2 storn, 3 vrnn
//! input_dim   u32
//! hidden_dim  u32
//! latent_dim  u32
//! layers      u32
//! lambda_kl   f64
//! seed        u64
//! norm        4 × f64 mean_1, mean_2, std_1, std_2
//! n_params    u64
//! theta       n_params × f64, blocks in declaration order
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::train::EpochLoss;
use super::{Architecture, NetConfig, NetError, NetParams};
use crate::nudging::NormStats;
use crate::spectral_qg::write_atomic;

pub const MAGIC: &[u8; 4] = b"QGNN";
pub const VERSION: u32 = 1;

/// Trained parameters with the standardization they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: NetParams,
    pub norm: NormStats,
}

impl Model {
    pub fn new(params: NetParams, norm: NormStats) -> Self {
        Self { params, norm }
    }

    pub fn arch(&self) -> Architecture {
        self.params.config.arch
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = &self.params.config;
        let mut b = Vec::with_capacity(72 + 8 * self.params.len());
        b.extend_from_slice(MAGIC);
        for v in [VERSION, cfg.arch.tag(), cfg.input_dim as u32, cfg.hidden_dim as u32, cfg.latent_dim as u32, cfg.layers as u32] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&cfg.lambda_kl.to_le_bytes());
        b.extend_from_slice(&cfg.seed.to_le_bytes());
        for v in [self.norm.mean[0], self.norm.mean[1], self.norm.std[0], self.norm.std[1]] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        b.extend_from_slice(&self.params.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, NetError> {
        let bad = |m: &str| NetError::Format(m.to_string());
        if b.len() < 84 || &b[..4] != MAGIC {
            return Err(bad("bad magic or truncated header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        if u32_at(4) != VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let arch = Architecture::from_tag(u32_at(8) as u32).ok_or_else(|| bad("unknown architecture tag"))?;
        let mut cfg = NetConfig::new(arch, u32_at(12));
        cfg.hidden_dim = u32_at(16);
        cfg.latent_dim = u32_at(20);
        cfg.layers = u32_at(24);
        cfg.lambda_kl = f64_at(28);
        cfg.seed = u64::from_le_bytes(b[36..44].try_into().unwrap());
        let norm = NormStats { mean: [f64_at(44), f64_at(52)], std: [f64_at(60), f64_at(68)] };
        let count = u64::from_le_bytes(b[76..84].try_into().unwrap()) as usize;
        let mut params = NetParams::zeros(cfg).map_err(|e| NetError::Format(e.to_string()))?;
        if count != params.len() || b.len() != 84 + 8 * count {
            return Err(bad("parameter count does not match dimensions"));
        }
        for (t, c) in params.theta.iter_mut().zip(b[84..].chunks_exact(8)) {
            *t = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(Self { params, norm })
    }
}

pub fn write_model(path: impl AsRef<Path>, model: &Model) -> Result<(), NetError> {
    Ok(write_atomic(path, &model.to_bytes())?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<Model, NetError> {
    Model::from_bytes(&std::fs::read(path)?)
}

pub fn write_loss_history(path: impl AsRef<Path>, history: &[EpochLoss]) -> Result<(), NetError> {
    let mut s = String::from("epoch,mse,mass,kl,total\n");
    for h in history {
        let _ = writeln!(s, "{},{:e},{:e},{:e},{:e}", h.epoch, h.mse, h.mass, h.kl, h.total);
    }
    Ok(write_atomic(path, s.as_bytes())?)
}

pub fn read_loss_history(path: impl AsRef<Path>) -> Result<Vec<EpochLoss>, NetError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("epoch,mse,mass,kl,total") {
        return Err(NetError::Format("loss history header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| f.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| NetError::Format(format!("bad row {l:?}")));
            Ok(EpochLoss {
                epoch: f[0].parse().map_err(|_| NetError::Format(format!("bad row {l:?}")))?,
                mse: num(1)?,
                mass: num(2)?,
                kl: num(3)?,
                total: num(4)?,
            })
        })
        .collect()
}
