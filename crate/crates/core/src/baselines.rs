//! Comparison methods: penalty-loss training and two iterative solvers.
//!
//! Both iterative solvers fix the phase anchors of their (feasible) starting
//! point and stay inside that convex cone, so every iterate is feasible and
//! the objective sequence is monotone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::norm;
use crate::problem::{grad_objective, objective, Beamformer, ChannelSet, ProblemSpec};
use crate::projection::{is_feasible, phase_anchors, project_anchored, ProjectorConfig, REPORT_TOL};
use crate::trainer::{BeamformingTask, TrainConfig, TrainOutcome, Upstream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    /// Weight of the squared constraint violation.
    pub penalty_weight: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            penalty_weight: 10.0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_weight > 0.0) || !self.penalty_weight.is_finite() {
            return Err(Error::invalid("penalty_weight", "must be positive"));
        }
        Ok(())
    }
}

/// Trains the same network on `f(x) + weight * sum_i max(0, -margin_i(x))^2`
/// without projecting. The weight is not validated so that zero can be used
/// to train on the bare objective.
pub fn penalty_train(
    dataset: &[ChannelSet],
    train: &TrainConfig,
    penalty: &PenaltyConfig,
) -> Result<TrainOutcome> {
    if !(penalty.penalty_weight >= 0.0) {
        return Err(Error::invalid("penalty_weight", "must be non-negative"));
    }
    let first = dataset
        .first()
        .ok_or_else(|| Error::invalid("dataset", "must not be empty"))?;
    let init = train.init_params(first.features().len(), first.var_dim())?;
    let tasks = BeamformingTask::batch(dataset, &train.problem, &train.projector);
    crate::trainer::train_programs(
        &tasks,
        init,
        train,
        Upstream::Penalty {
            weight: penalty.penalty_weight,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterSolverConfig {
    pub max_outer: usize,
    /// Stop once an accepted step lowers the objective by less than
    /// `tol * max(|f|, 1)`, or the gradient norm falls below `tol`.
    pub tol: f64,
    /// Initial trust radius (Frobenius length of a step).
    pub trust_radius: f64,
    pub shrink: f64,
    pub grow: f64,
    /// Initial proximal weight of the convex surrogate.
    pub prox_weight: f64,
    pub projector: ProjectorConfig,
}

impl Default for IterSolverConfig {
    fn default() -> Self {
        Self {
            max_outer: 100,
            tol: 1e-6,
            trust_radius: 1.0,
            shrink: 0.5,
            grow: 2.0,
            prox_weight: 2.0,
            projector: ProjectorConfig::default(),
        }
    }
}

impl IterSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if !(self.trust_radius > 0.0) {
            return Err(Error::invalid("trust_radius", "must be positive"));
        }
        if !(self.grow > 1.0) || !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid("shrink", "need 0 < shrink < 1 < grow"));
        }
        if !(self.prox_weight > 0.0) {
            return Err(Error::invalid("prox_weight", "must be positive"));
        }
        self.projector.validate()
    }
}

/// Final point plus the objective and worst SOC margin of every accepted iterate
/// (the starting point first).
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w: Beamformer,
    pub objectives: Vec<f64>,
    pub min_margins: Vec<f64>,
    pub iterations: usize,
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        *self.objectives.last().expect("starting point is recorded")
    }

    fn start(w: Beamformer, ch: &ChannelSet, spec: &ProblemSpec) -> Self {
        let mut out = Self {
            objectives: Vec::new(),
            min_margins: Vec::new(),
            iterations: 0,
            w: w.clone(),
        };
        out.record(w, ch, spec);
        out
    }

    fn record(&mut self, w: Beamformer, ch: &ChannelSet, spec: &ProblemSpec) {
        self.objectives.push(objective(&w, ch, spec));
        self.min_margins
            .push(crate::problem::soc_residuals(&w, ch).min_margin());
        self.w = w;
    }
}

fn check_start(ch: &ChannelSet, init: &Beamformer, cfg: &IterSolverConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    init.check_shape(ch)?;
    if !is_feasible(init, ch, REPORT_TOL) {
        return Err(Error::InfeasibleRegion);
    }
    Ok(phase_anchors(init, ch))
}

fn shifted(w: &Beamformer, dir: &[f64], step: f64) -> Beamformer {
    let flat = w.flatten().iter().zip(dir).map(|(a, d)| a - step * d).collect();
    Beamformer::from_flat(w.n_antennas(), w.n_users(), flat).expect("same shape")
}

/// Successive convex approximation: each iterate minimizes the linearized
/// objective plus `rho/2 ||W - W_k||^2` over the anchored cone, which is the
/// projection of `W_k - grad f(W_k) / rho`. `rho` doubles until the true
/// objective does not increase.
pub fn sca_solve(
    ch: &ChannelSet,
    spec: &ProblemSpec,
    init: &Beamformer,
    cfg: &IterSolverConfig,
) -> Result<SolveResult> {
    let anchors = check_start(ch, init, cfg)?;
    let mut out = SolveResult::start(init.clone(), ch, spec);
    let mut rho = cfg.prox_weight;
    for _ in 0..cfg.max_outer {
        let f = out.objective();
        let grad = grad_objective(&out.w, ch, spec);
        if norm(&grad) <= cfg.tol {
            break;
        }
        let mut accepted = None;
        for _ in 0..40 {
            let target = shifted(&out.w, &grad, 1.0 / rho);
            let cand = project_anchored(&target, ch, &anchors, None, &cfg.projector)?.y;
            let f_cand = objective(&cand, ch, spec);
            if f_cand <= f {
                accepted = Some((cand, f_cand));
                break;
            }
            rho *= 2.0;
        }
        let Some((cand, f_cand)) = accepted else { break };
        out.iterations += 1;
        out.record(cand, ch, spec);
        if f - f_cand < cfg.tol * f.abs().max(1.0) {
            break;
        }
    }
    Ok(out)
}

/// Projected gradient descent whose step has Frobenius length equal to the
/// trust radius; the radius grows after an accepted (decreasing) step and
/// shrinks otherwise.
pub fn trust_region_solve(
    ch: &ChannelSet,
    spec: &ProblemSpec,
    init: &Beamformer,
    cfg: &IterSolverConfig,
) -> Result<SolveResult> {
    let anchors = check_start(ch, init, cfg)?;
    let mut out = SolveResult::start(init.clone(), ch, spec);
    let mut radius = cfg.trust_radius;
    let mut grad = grad_objective(&out.w, ch, spec);
    for _ in 0..cfg.max_outer {
        let g_norm = norm(&grad);
        if g_norm <= cfg.tol || radius < 1e-8 {
            break;
        }
        let f = out.objective();
        let target = shifted(&out.w, &grad, radius / g_norm);
        let cand = project_anchored(&target, ch, &anchors, None, &cfg.projector)?.y;
        let f_cand = objective(&cand, ch, spec);
        if f_cand < f {
            out.iterations += 1;
            grad = grad_objective(&cand, ch, spec);
            out.record(cand, ch, spec);
            radius *= cfg.grow;
        } else {
            radius *= cfg.shrink;
        }
    }
    Ok(out)
}
