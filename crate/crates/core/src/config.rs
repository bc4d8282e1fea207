//! Run configuration loaded from TOML. Unknown keys are rejected; only
//! `data.k` and `data.n` are required.
//!
//! ```toml
//! seed = 1
//! threads = 1
//!
//! [data]
//! k = 16
//! n = 8
//! count = 10000
//! sigma2 = 1.0
//! gamma = 10.0
//!
//! [problem]            # variant = "eve_sinr_min" | "green_power"
//! [projector]          # barrier solver tolerances
//! [train]              # mode = "l2o" | "penalty", learn_rate, epochs, hidden, ...
//! [penalty]            # penalty_weight
//! [solver]             # max_outer, tol, trust_radius, shrink, grow, prox_weight
//! [sweep]              # axis, values, algorithms, eval_count, train_fraction
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{IterSolverConfig, PenaltyConfig};
use crate::error::{Error, Result};
use crate::harness::{default_values, Algorithm, Axis, SweepBase};
use crate::problem::ProblemSpec;
use crate::projection::ProjectorConfig;
use crate::trainer::{GradientRule, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub k: usize,
    pub n: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_count() -> usize {
    10_000
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    #[default]
    L2o,
    Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub mode: TrainMode,
    pub learn_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_beta: f64,
    pub eps: f64,
    pub hidden: Vec<usize>,
    pub gradient_rule: GradientRule,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            mode: TrainMode::L2o,
            learn_rate: t.learn_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            clip_beta: t.clip_beta,
            eps: t.eps,
            hidden: t.hidden,
            gradient_rule: t.gradient_rule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_outer: usize,
    pub tol: f64,
    pub trust_radius: f64,
    pub shrink: f64,
    pub grow: f64,
    pub prox_weight: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = IterSolverConfig::default();
        Self {
            max_outer: s.max_outer,
            tol: s.tol,
            trust_radius: s.trust_radius,
            shrink: s.shrink,
            grow: s.grow,
            prox_weight: s.prox_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: Axis,
    /// Defaults to the axis' standard grid.
    pub values: Option<Vec<f64>>,
    pub algorithms: Vec<Algorithm>,
    pub eval_count: usize,
    pub train_fraction: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: Axis::K,
            values: None,
            algorithms: vec![Algorithm::L2o, Algorithm::Penalty, Algorithm::Sca, Algorithm::TrustRegion],
            eval_count: 1000,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; all logical cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    pub data: DataSection,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub projector: ProjectorConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.k == 0 || self.data.n == 0 {
            return Err(Error::invalid("data.k", "K and N must be at least 1"));
        }
        if self.data.count == 0 {
            return Err(Error::invalid("data.count", "must be at least 1"));
        }
        if !(self.data.sigma2 > 0.0) || !self.data.sigma2.is_finite() {
            return Err(Error::invalid("data.sigma2", "must be positive"));
        }
        if !(self.data.gamma > 0.0) || !self.data.gamma.is_finite() {
            return Err(Error::invalid("data.gamma", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        if self.sweep.eval_count == 0 {
            return Err(Error::invalid("sweep.eval_count", "must be at least 1"));
        }
        if matches!(&self.sweep.values, Some(v) if v.is_empty()) {
            return Err(Error::invalid("sweep.values", "must not be empty"));
        }
        self.train_config().validate()?;
        self.penalty.validate()?;
        self.solver_config().validate()?;
        self.sweep_base().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learn_rate: self.train.learn_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            clip_beta: self.train.clip_beta,
            eps: self.train.eps,
            seed: self.seed,
            hidden: self.train.hidden.clone(),
            gradient_rule: self.train.gradient_rule,
            problem: self.problem,
            projector: self.projector,
        }
    }

    pub fn solver_config(&self) -> IterSolverConfig {
        IterSolverConfig {
            max_outer: self.solver.max_outer,
            tol: self.solver.tol,
            trust_radius: self.solver.trust_radius,
            shrink: self.solver.shrink,
            grow: self.solver.grow,
            prox_weight: self.solver.prox_weight,
            projector: self.projector,
        }
    }

    pub fn sweep_base(&self) -> SweepBase {
        SweepBase {
            n_antennas: self.data.k,
            n_users: self.data.n,
            sigma2: self.data.sigma2,
            gamma: self.data.gamma,
            train_fraction: self.sweep.train_fraction,
            train: self.train_config(),
            penalty: self.penalty,
            solver: self.solver_config(),
        }
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        self.sweep
            .values
            .clone()
            .unwrap_or_else(|| default_values(self.sweep.axis))
    }
}
