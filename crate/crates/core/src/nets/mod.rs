//! LSTM-based correction operators.
//!
//! Four architectures share one encoder → LSTM → decoder backbone and differ
//! in how a Gaussian latent variable enters:
//!
//! | arch    | latent source | latent feeds        |
//! |---------|---------------|---------------------|
//! | RNN     | none          | none                |
//! | VAE-RNN | `h_t`         | decoder (on `z_t`)  |
//! | STORN   | `e_t`         | LSTM gates          |
//! | VRNN    | `e_t`         | LSTM gates, decoder |
//!
//! Gradients come from a hand-written backward pass over the recorded
//! forward [`Tape`]; training uses Adam on truncated windows.

mod backward;
mod corrector;
mod forward;
mod io;
mod linalg;
mod params;
mod train;

pub use backward::{backward, loss_and_grad};
pub use corrector::{correct_trajectory, ensemble_mean, ensemble_mean_curve, ensemble_variance, Corrector};
pub use forward::{
    draw_noise, forward, forward_rnn, forward_storn, forward_vae_rnn, forward_vrnn, kl_to_standard_normal, loss,
    lstm_step, reparameterize, sample_latent, softplus, LatentStats, LossParts, Tape,
};
pub use io::{read_loss_history, read_model, write_loss_history, write_model, Model};
pub use params::{count_params, Block, Layout, NetParams};
pub use train::{train, train_sequences, train_with, Adam, EpochLoss, TrainOutcome};

use std::fmt;
use std::str::FromStr;

/// Which latent pathway the network carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Architecture {
    #[serde(rename = "rnn")]
    Rnn,
    #[serde(rename = "vaernn")]
    VaeRnn,
    #[serde(rename = "storn")]
    Storn,
    #[serde(rename = "vrnn")]
    Vrnn,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Self::Rnn, Self::VaeRnn, Self::Storn, Self::Vrnn];

    pub fn is_probabilistic(self) -> bool {
        self != Self::Rnn
    }

    /// Latent heads read the encoded input rather than the hidden state.
    pub fn latent_upstream(self) -> bool {
        matches!(self, Self::Storn | Self::Vrnn)
    }

    pub fn tag(self) -> u32 {
        match self {
            Self::Rnn => 0,
            Self::VaeRnn => 1,
            Self::Storn => 2,
            Self::Vrnn => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rnn => "rnn",
            Self::VaeRnn => "vaernn",
            Self::Storn => "storn",
            Self::Vrnn => "vrnn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Rnn => "RNN",
            Self::VaeRnn => "VAE-RNN",
            Self::Storn => "STORN",
            Self::Vrnn => "VRNN",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rnn" => Ok(Self::Rnn),
            "vaernn" => Ok(Self::VaeRnn),
            "storn" => Ok(Self::Storn),
            "vrnn" => Ok(Self::Vrnn),
            _ => Err(NetError::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

/// Shape and training hyper-parameters of one network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub arch: Architecture,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Spatial blocks in one input vector, each penalised for a nonzero mean.
    pub layers: usize,
    pub lambda_kl: f64,
    pub epochs: usize,
    pub window: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Only the fixed standard-normal prior exists; setting this is an error.
    pub learned_prior: bool,
}

impl NetConfig {
    pub fn new(arch: Architecture, input_dim: usize) -> Self {
        Self {
            arch,
            input_dim,
            hidden_dim: 60,
            latent_dim: 60,
            layers: 2,
            lambda_kl: 1e-4,
            epochs: 500,
            window: 100,
            learning_rate: 1e-3,
            seed: 0,
            learned_prior: false,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.learned_prior {
            return Err(NetError::Config("learned latent priors are not supported".into()));
        }
        if self.input_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(NetError::Config("dimensions must be positive".into()));
        }
        if self.layers == 0 || self.input_dim % self.layers != 0 {
            return Err(NetError::Config(format!(
                "input_dim {} is not divisible into {} layers",
                self.input_dim, self.layers
            )));
        }
        if !(self.lambda_kl >= 0.0 && self.lambda_kl.is_finite()) {
            return Err(NetError::Config(format!("lambda_kl = {}", self.lambda_kl)));
        }
        if self.window < 2 {
            return Err(NetError::Config("window must be at least 2".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("latent scale must be positive, found {0}")]
    NonPositiveSigma(f64),
    #[error("{expected} network required, got {found}")]
    WrongArchitecture { expected: Architecture, found: Architecture },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, history: Vec<EpochLoss> },
    #[error("ensemble needs at least {needed} members, found {found}")]
    EnsembleTooSmall { needed: usize, found: usize },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
