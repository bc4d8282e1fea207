//! Unsupervised training through the projection and feasibility-preserving inference.
//!
//! A raw output `x` that is already feasible is trained on `grad f(x)`. An
//! infeasible one is projected to `y`; the elementwise ratio
//! `t = y / (x + eps)` is held constant and the upstream gradient becomes
//! `t * grad f(t * x)`, i.e. the chain rule through `z = t * x`.

mod program;

use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::nn::{adam_step, backward_accumulate, clip, forward, AdamState, MlpParams, Tape};
use crate::numeric::{hadamard_div, norm, Rng};
use crate::problem::{Beamformer, ChannelSet, ProblemSpec};
use crate::projection::ProjectorConfig;

pub use program::{BeamformingTask, ConstrainedProgram, Projected};

/// Magnitude cap for scaling factors whose denominator `x + eps` vanishes.
pub const SCALE_CAP: f64 = 1e12;

/// How an infeasible output's projection feeds back into the parameter gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientRule {
    /// `t * grad f(t * x)` with `t = y / (x + eps)`.
    #[default]
    Scaled,
    /// `grad f(y)`, ignoring the scaling factor.
    AtProjection,
    /// `J^T grad f(y)` with `J` the Jacobian of the projection map, from
    /// implicit differentiation of the projection's optimality condition.
    Implicit,
}

/// Source of the per-instance upstream vector `dL/dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upstream {
    Projection(GradientRule),
    /// `f(x) + weight * sum_i max(0, -margin_i(x))^2`, no projection.
    Penalty { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learn_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_beta: f64,
    /// Perturbation in the denominator of the scaling factor.
    pub eps: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub gradient_rule: GradientRule,
    pub problem: ProblemSpec,
    pub projector: ProjectorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learn_rate: 0.01,
            batch_size: 64,
            epochs: 50,
            clip_beta: 1.0,
            eps: 1e-6,
            seed: 0,
            hidden: vec![512, 512, 512],
            gradient_rule: GradientRule::Scaled,
            problem: ProblemSpec::default(),
            projector: ProjectorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learn_rate > 0.0) || !self.learn_rate.is_finite() {
            return Err(Error::invalid("learn_rate", "must be positive"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps", "must be positive"));
        }
        if !(self.clip_beta > 0.0) {
            return Err(Error::invalid("clip_beta", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden", "layer widths must be positive"));
        }
        self.problem.validate()?;
        self.projector.validate()
    }

    /// Layer widths for a network mapping `input` features to `output` reals.
    pub fn layer_dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(&self.hidden);
        dims.push(output);
        dims
    }

    /// Seeded initialization for a network mapping `input` to `output`.
    pub fn init_params(&self, input: usize, output: usize) -> Result<MlpParams> {
        MlpParams::xavier(&self.layer_dims(input, output), &mut Rng::with_stream(self.seed, 1))
    }
}

/// 64-bit digest of a configuration's canonical JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> u64 {
    let json = serde_json::to_vec(config).expect("configs serialize to JSON");
    let digest = Sha256::digest(&json);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Per-step training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub step: u64,
    pub epoch: usize,
    /// Mean objective at the point the update was computed for: the
    /// projection under [`Upstream::Projection`], the raw output otherwise.
    pub mean_objective: f64,
    pub raw_feasibility_rate: f64,
    pub mean_projection_distance: f64,
    pub grad_norm_pre_clip: f64,
    pub grad_norm_post_clip: f64,
    pub skipped: usize,
}

/// Averaged batch gradient before clipping, with batch statistics.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub grads: Vec<f64>,
    pub mean_objective: f64,
    pub raw_feasibility_rate: f64,
    pub mean_projection_distance: f64,
    pub used: usize,
    pub skipped: usize,
}

struct InstancePass {
    tape: Tape,
    upstream: Vec<f64>,
    objective: f64,
    raw_feasible: bool,
    distance: f64,
}

/// `t = y / (x + eps)` with entries capped where the denominator vanishes.
pub fn scaling_factor(y: &[f64], x: &[f64], eps: f64) -> Result<Vec<f64>> {
    let mut t = hadamard_div(y, x, eps)?;
    for (tm, xm) in t.iter_mut().zip(x) {
        if (xm + eps).abs() < 1.0 / SCALE_CAP {
            *tm = if tm.is_nan() { 0.0 } else { tm.clamp(-SCALE_CAP, SCALE_CAP) };
        }
    }
    Ok(t)
}

fn instance_pass<P: ConstrainedProgram>(
    params: &MlpParams,
    program: &P,
    rule: Upstream,
    eps: f64,
) -> Result<InstancePass> {
    let (x, tape) = forward(params, &program.features())?;
    check_len(program.var_dim(), x.len())?;
    let raw_feasible = program.is_feasible(&x);
    let mut pass = InstancePass {
        tape,
        upstream: Vec::new(),
        objective: 0.0,
        raw_feasible,
        distance: 0.0,
    };
    match rule {
        Upstream::Penalty { weight } => {
            pass.objective = program.objective(&x);
            pass.upstream = program.gradient(&x);
            for (margin, grad) in program.margins_with_grad(&x) {
                if margin < 0.0 {
                    // d/dx weight * margin^2 on the violated side
                    let coef = 2.0 * weight * margin;
                    for (u, g) in pass.upstream.iter_mut().zip(&grad) {
                        *u += coef * g;
                    }
                }
            }
        }
        Upstream::Projection(_) if raw_feasible => {
            pass.objective = program.objective(&x);
            pass.upstream = program.gradient(&x);
        }
        Upstream::Projection(GradientRule::Implicit) => {
            let (projected, pulled) = program.project_pullback(&x, &|y| program.gradient(y))?;
            pass.objective = program.objective(&projected.y);
            pass.distance = projected.distance;
            pass.upstream = pulled;
        }
        Upstream::Projection(mode) => {
            let projected = program.project(&x)?;
            pass.objective = program.objective(&projected.y);
            pass.distance = projected.distance;
            pass.upstream = match mode {
                GradientRule::AtProjection | GradientRule::Implicit => program.gradient(&projected.y),
                GradientRule::Scaled => {
                    let t = scaling_factor(&projected.y, &x, eps)?;
                    let z: Vec<f64> = t.iter().zip(&x).map(|(a, b)| a * b).collect();
                    program
                        .gradient(&z)
                        .iter()
                        .zip(&t)
                        .map(|(g, a)| g * a)
                        .collect()
                }
            };
        }
    }
    Ok(pass)
}

/// Mean parameter gradient over the instances of `batch` that did not fail.
pub fn batch_gradient<P: ConstrainedProgram>(
    params: &MlpParams,
    batch: &[P],
    rule: Upstream,
    eps: f64,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "must not be empty"));
    }
    let passes: Vec<Result<InstancePass>> = batch
        .par_iter()
        .map(|p| instance_pass(params, p, rule, eps))
        .collect();
    let mut grads = vec![0.0; params.len()];
    let (mut used, mut skipped, mut feasible) = (0usize, 0usize, 0usize);
    let (mut obj_sum, mut dist_sum) = (0.0, 0.0);
    let mut ok = Vec::with_capacity(passes.len());
    for (idx, pass) in passes.into_iter().enumerate() {
        match pass {
            Ok(p) => ok.push(p),
            Err(e @ (Error::DimensionMismatch { .. } | Error::Format { .. })) => return Err(e),
            Err(e) => {
                warn!("skipping instance {idx} of batch: {e}");
                skipped += 1;
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::Training(format!("all {skipped} instances of the batch failed")));
    }
    let scale = 1.0 / ok.len() as f64;
    for p in &ok {
        backward_accumulate(params, &p.tape, &p.upstream, scale, &mut grads)?;
        used += 1;
        feasible += usize::from(p.raw_feasible);
        obj_sum += p.objective;
        dist_sum += p.distance;
    }
    Ok(BatchGradient {
        grads,
        mean_objective: obj_sum / used as f64,
        raw_feasibility_rate: feasible as f64 / used as f64,
        mean_projection_distance: dist_sum / used as f64,
        used,
        skipped,
    })
}

/// One clipped Adam update on `batch`.
pub fn train_step<P: ConstrainedProgram>(
    params: &mut MlpParams,
    adam: &mut AdamState,
    batch: &[P],
    cfg: &TrainConfig,
    rule: Upstream,
) -> Result<TrainMetrics> {
    let BatchGradient {
        mut grads,
        mean_objective,
        raw_feasibility_rate,
        mean_projection_distance,
        skipped,
        ..
    } = batch_gradient(params, batch, rule, cfg.eps)?;
    let grad_norm_pre_clip = norm(&grads);
    clip(&mut grads, cfg.clip_beta);
    let grad_norm_post_clip = norm(&grads);
    adam_step(params, adam, &grads, cfg.learn_rate)?;
    if !params.is_finite() {
        return Err(Error::Training(format!("non-finite parameters after step {}", adam.step)));
    }
    Ok(TrainMetrics {
        step: adam.step,
        epoch: 0,
        mean_objective,
        raw_feasibility_rate,
        mean_projection_distance,
        grad_norm_pre_clip,
        grad_norm_post_clip,
        skipped,
    })
}

/// Final network and optimizer state plus the per-step history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub adam: AdamState,
    pub history: Vec<TrainMetrics>,
}

/// Runs `cfg.epochs` passes over `programs` in shuffled mini-batches,
/// starting from `init`.
pub fn train_programs<P: ConstrainedProgram>(
    programs: &[P],
    init: MlpParams,
    cfg: &TrainConfig,
    rule: Upstream,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if programs.is_empty() {
        return Err(Error::invalid("dataset", "must not be empty"));
    }
    let mut params = init;
    let mut adam = AdamState::for_params(&params);
    let mut history = Vec::new();
    let mut rng = Rng::with_stream(cfg.seed, 2);
    let mut order: Vec<usize> = (0..programs.len()).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&P> = chunk.iter().map(|&i| &programs[i]).collect();
            let mut metrics = train_step(&mut params, &mut adam, &batch, cfg, rule)?;
            metrics.epoch = epoch;
            history.push(metrics);
        }
    }
    Ok(TrainOutcome {
        params,
        adam,
        history,
    })
}

impl<P: ConstrainedProgram> ConstrainedProgram for &P {
    fn features(&self) -> Vec<f64> {
        (**self).features()
    }
    fn var_dim(&self) -> usize {
        (**self).var_dim()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        (**self).objective(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn is_feasible(&self, x: &[f64]) -> bool {
        (**self).is_feasible(x)
    }
    fn project(&self, x: &[f64]) -> Result<Projected> {
        (**self).project(x)
    }
    fn project_pullback(
        &self,
        x: &[f64],
        upstream: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Projected, Vec<f64>)> {
        (**self).project_pullback(x, upstream)
    }
    fn margins_with_grad(&self, x: &[f64]) -> Vec<(f64, Vec<f64>)> {
        (**self).margins_with_grad(x)
    }
}

/// Trains a fresh network on beamforming instances with the projection rule.
pub fn train(dataset: &[ChannelSet], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::invalid("dataset", "must not be empty"))?;
    let init = cfg.init_params(first.features().len(), first.var_dim())?;
    let tasks = BeamformingTask::batch(dataset, &cfg.problem, &cfg.projector);
    train_programs(&tasks, init, cfg, Upstream::Projection(cfg.gradient_rule))
}

/// Network prediction for `ch`, projected when infeasible. The flag reports
/// whether the projection fired.
pub fn infer(
    params: &MlpParams,
    ch: &ChannelSet,
    projector: &ProjectorConfig,
) -> Result<(Beamformer, bool)> {
    let problem = ProblemSpec::default();
    let task = BeamformingTask::new(ch, &problem, projector);
    let (x, _) = forward(params, &task.features())?;
    check_len(task.var_dim(), x.len())?;
    if task.is_feasible(&x) {
        return Ok((Beamformer::from_flat(ch.n_antennas(), ch.n_users(), x)?, false));
    }
    let projected = task.project(&x)?;
    Ok((
        Beamformer::from_flat(ch.n_antennas(), ch.n_users(), projected.y)?,
        true,
    ))
}

/// Outcome of running inference on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEval {
    pub raw_objective: f64,
    pub raw_feasible: bool,
    /// `None` when the projection failed.
    pub objective: Option<f64>,
    pub output: Option<Vec<f64>>,
    pub projected: bool,
    pub wall_time_s: f64,
}

/// Inference plus objective bookkeeping on every program.
pub fn evaluate<P: ConstrainedProgram>(params: &MlpParams, programs: &[P]) -> Result<Vec<InstanceEval>> {
    programs
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let (x, _) = forward(params, &p.features())?;
            check_len(p.var_dim(), x.len())?;
            let raw_feasible = p.is_feasible(&x);
            let raw_objective = p.objective(&x);
            let final_point = if raw_feasible {
                Some(x)
            } else {
                match p.project(&x) {
                    Ok(pr) => Some(pr.y),
                    Err(e) => {
                        warn!("inference projection failed: {e}");
                        None
                    }
                }
            };
            let objective = final_point.as_ref().map(|y| p.objective(y));
            Ok(InstanceEval {
                raw_objective,
                raw_feasible,
                objective,
                output: final_point,
                projected: !raw_feasible,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
