//! Experiment configuration (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use qgdebias_core::nets::{Architecture, NetConfig};
use qgdebias_core::spectral_qg::{steps_per_sample, GridSpec, QgParams, Topography, TOPOGRAPHY_CENTERS};
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stage seed is derived from it and a role string.
    #[serde(with = "seed_repr")]
    pub seed: u64,
    /// Where artifacts go. Not part of the stored config, so the same
    /// experiment hashes identically wherever it runs.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub grid: GridConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub topography: TopographyConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub nudge: NudgeSection,
    #[serde(default)]
    pub nets: NetsConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub fine_nx: usize,
    pub coarse_nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub r: f64,
    pub beta: f64,
    pub kd2: f64,
    pub u: f64,
    pub f0: f64,
    pub h2: f64,
    /// Hyperviscosity per grid; `10/(nx/3)^8` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_fine: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_coarse: Option<f64>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { r: 0.1, beta: 2.0, kd2: 4.0, u: 0.2, f0: 1.0, h2: 1.0, nu_fine: None, nu_coarse: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopographyConfig {
    /// `0.4·kd2·h2/f0` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    pub sigma2: f64,
    /// Seven `[x, y]` pairs; drawn from the master seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<[f64; 2]>>,
}

impl Default for TopographyConfig {
    fn default() -> Self {
        Self { amplitude: None, sigma2: 0.5, centers: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// Solver steps; the grid default (1e-3 fine, 4e-3 coarse) when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_fine: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_coarse: Option<f64>,
    pub spin_up: f64,
    pub train_horizon: f64,
    pub test_horizon: f64,
    pub sample_every: f64,
    /// Per-mode amplitude of the initial noise in modes `|k| <= 4`.
    pub init_amplitude: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt_fine: None,
            dt_coarse: None,
            spin_up: 500.0,
            train_horizon: 1000.0,
            test_horizon: 2000.0,
            sample_every: 0.5,
            init_amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NudgeSection {
    pub tau: f64,
}

impl Default for NudgeSection {
    fn default() -> Self {
        Self { tau: 10.0 }
    }
}

/// Per-architecture overrides of the shared network settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetsConfig {
    pub architectures: Vec<Architecture>,
    pub ensemble: usize,
    pub hidden: usize,
    pub latent: usize,
    pub lambda_kl: f64,
    pub epochs: usize,
    pub window: usize,
    pub learning_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rnn: Option<NetOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vaernn: Option<NetOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storn: Option<NetOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vrnn: Option<NetOverride>,
}

impl Default for NetsConfig {
    fn default() -> Self {
        Self {
            architectures: Architecture::ALL.to_vec(),
            ensemble: 6,
            hidden: 60,
            latent: 60,
            lambda_kl: 1e-4,
            epochs: 500,
            window: 100,
            learning_rate: 1e-3,
            rnn: None,
            vaernn: None,
            storn: None,
            vrnn: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub bins: usize,
    /// Exceedance thresholds in units of the reference standard deviation.
    pub exceedance_sigmas: Vec<f64>,
    /// Averaging window of the zonal energy, time units.
    pub gamma_window: f64,
    /// Excursion thresholds as multiples of the reference mean of gamma.
    pub excursion_levels: Vec<f64>,
    /// Zonal wavenumbers whose autocorrelation is reported.
    pub modes: Vec<usize>,
    /// Largest correlation lag, time units.
    pub max_lag: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            bins: 200,
            exceedance_sigmas: vec![1.0, 2.0, 3.0],
            gamma_window: 10.0,
            excursion_levels: vec![1.5, 2.0, 3.0],
            modes: vec![1, 2, 3],
            max_lag: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub ensemble_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { ensemble_sizes: vec![1, 2, 4, 6], epochs: vec![100, 250, 500] }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical text of the stored config; its sha256 identifies the run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn out_dir(&self) -> Result<&Path, PipelineError> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| PipelineError::Usage("no output directory: set out_dir or pass --out".into()))
    }

    pub fn fine_grid(&self) -> GridSpec {
        GridSpec::new(self.grid.fine_nx).expect("validated")
    }

    pub fn coarse_grid(&self) -> GridSpec {
        GridSpec::new(self.grid.coarse_nx).expect("validated")
    }

    fn params_for(&self, grid: GridSpec, nu: Option<f64>) -> QgParams {
        let p = &self.physics;
        QgParams {
            r: p.r,
            beta: p.beta,
            kd2: p.kd2,
            nu: nu.unwrap_or_else(|| grid.default_hyperviscosity()),
            u: p.u,
            f0: p.f0,
            h2: p.h2,
        }
    }

    pub fn fine_params(&self) -> QgParams {
        self.params_for(self.fine_grid(), self.physics.nu_fine)
    }

    pub fn coarse_params(&self) -> QgParams {
        self.params_for(self.coarse_grid(), self.physics.nu_coarse)
    }

    pub fn dt_fine(&self) -> f64 {
        self.time.dt_fine.unwrap_or_else(|| self.fine_grid().default_dt())
    }

    pub fn dt_coarse(&self) -> f64 {
        self.time.dt_coarse.unwrap_or_else(|| self.coarse_grid().default_dt())
    }

    /// Shared by both grids so the coarse run sees the same mountains.
    pub fn topography(&self) -> Topography {
        let params = self.fine_params();
        let mut topo = Topography::seeded(&params, derive_seed(self.seed, "topography"));
        topo.sigma2 = self.topography.sigma2;
        if let Some(a) = self.topography.amplitude {
            topo.amplitude = a;
        }
        if let Some(c) = &self.topography.centers {
            topo.centers.copy_from_slice(c);
        }
        topo
    }

    pub fn net_config(&self, arch: Architecture) -> NetConfig {
        let n = &self.nets;
        let o = match arch {
            Architecture::Rnn => n.rnn,
            Architecture::VaeRnn => n.vaernn,
            Architecture::Storn => n.storn,
            Architecture::Vrnn => n.vrnn,
        }
        .unwrap_or_default();
        let mut cfg = NetConfig::new(arch, 2 * self.grid.coarse_nx * self.grid.coarse_nx);
        cfg.hidden_dim = o.hidden.unwrap_or(n.hidden);
        cfg.latent_dim = o.latent.unwrap_or(n.latent);
        cfg.lambda_kl = o.lambda_kl.unwrap_or(n.lambda_kl);
        cfg.epochs = o.epochs.unwrap_or(n.epochs);
        cfg.window = o.window.unwrap_or(n.window);
        cfg.learning_rate = o.learning_rate.unwrap_or(n.learning_rate);
        cfg
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let fine = GridSpec::new(self.grid.fine_nx).map_err(|e| PipelineError::Config(e.to_string()))?;
        let coarse = GridSpec::new(self.grid.coarse_nx).map_err(|e| PipelineError::Config(e.to_string()))?;
        if coarse.nx() >= fine.nx() {
            return bad(format!("coarse_nx {} must be below fine_nx {}", coarse.nx(), fine.nx()));
        }
        for p in [self.fine_params(), self.coarse_params()] {
            p.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if let Some(c) = &self.topography.centers {
            if c.len() != TOPOGRAPHY_CENTERS {
                return bad(format!("topography needs {TOPOGRAPHY_CENTERS} centers, found {}", c.len()));
            }
        }
        self.topography().validate().map_err(|e| PipelineError::Config(e.to_string()))?;

        let t = &self.time;
        if !(t.spin_up >= 0.0 && t.spin_up.is_finite()) {
            return bad(format!("spin_up = {}", t.spin_up));
        }
        if !(t.train_horizon > 0.0 && t.train_horizon.is_finite()) {
            return bad(format!("train_horizon = {} must be positive", t.train_horizon));
        }
        if !(t.test_horizon >= 0.0 && t.test_horizon.is_finite()) {
            return bad(format!("test_horizon = {}", t.test_horizon));
        }
        if !(t.init_amplitude >= 0.0 && t.init_amplitude.is_finite()) {
            return bad(format!("init_amplitude = {}", t.init_amplitude));
        }
        for dt in [self.dt_fine(), self.dt_coarse()] {
            steps_per_sample(t.sample_every, dt).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        for h in [t.train_horizon, t.test_horizon] {
            let k = h / t.sample_every;
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                return bad(format!("horizon {h} is not a multiple of sample_every {}", t.sample_every));
            }
        }
        if !(self.nudge.tau > 0.0 && self.nudge.tau.is_finite()) {
            return bad(format!("tau = {}", self.nudge.tau));
        }

        let n = &self.nets;
        if n.ensemble == 0 {
            return bad("ensemble size must be at least 1".into());
        }
        if n.architectures.is_empty() {
            return bad("no architectures selected".into());
        }
        for arch in &n.architectures {
            let cfg = self.net_config(*arch);
            cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
            if cfg.epochs == 0 {
                return bad(format!("{arch}: epochs must be positive"));
            }
        }

        let r = &self.report;
        if r.bins == 0 {
            return bad("report.bins must be positive".into());
        }
        if r.exceedance_sigmas.iter().any(|c| !(*c >= 0.0)) || r.excursion_levels.iter().any(|c| !(*c > 0.0)) {
            return bad("thresholds must be non-negative (excursion levels positive)".into());
        }
        if !(r.gamma_window > 0.0 && r.max_lag >= 0.0) {
            return bad("gamma_window must be positive and max_lag non-negative".into());
        }
        if r.modes.iter().any(|k| *k == 0 || 2 * k >= coarse.nx()) {
            return bad(format!("report modes must lie in 1..{}", coarse.nx() / 2));
        }

        let s = &self.sweep;
        for (name, v) in [("ensemble_sizes", &s.ensemble_sizes), ("epochs", &s.epochs)] {
            if v.is_empty() || v.contains(&0) || v.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("sweep.{name} must be strictly increasing positive integers"));
            }
        }
        Ok(())
    }
}

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as strings.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(i) => u64::try_from(i).map_err(|_| de::Error::custom("seed must be non-negative")),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("bad seed {t:?}"))),
        }
    }
}
