use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{penalty_train, sca_solve, trust_region_solve, IterSolverConfig, PenaltyConfig};
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::numeric::Rng;
use crate::problem::{Beamformer, ChannelSet};
use crate::projection::{is_feasible, zf_init, REPORT_TOL, START_POWER_MARGIN};
use crate::trainer::{evaluate, train, BeamformingTask, TrainConfig};

use super::dataset::gen_dataset;
use super::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    K,
    N,
    #[serde(rename = "gamma")]
    Gamma,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(Axis::K),
            "N" | "n" => Ok(Axis::N),
            "gamma" => Ok(Axis::Gamma),
            other => Err(Error::invalid("axis", format!("unknown axis `{other}`, expected K, N or gamma"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::K => "K",
            Axis::N => "N",
            Axis::Gamma => "gamma",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    L2o,
    Penalty,
    Sca,
    TrustRegion,
}

impl Algorithm {
    fn is_learned(self) -> bool {
        matches!(self, Algorithm::L2o | Algorithm::Penalty)
    }
}

/// One (algorithm, axis value) cell of a sweep. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub algorithm: Algorithm,
    pub axis: Axis,
    pub value: f64,
    pub mean_objective: f64,
    pub objective_variance: f64,
    pub raw_feasibility_rate: f64,
    pub post_projection_feasibility_rate: f64,
    pub mean_wall_time_s: f64,
    pub failures: usize,
}

/// Settings shared by every point of a sweep; the swept axis overrides one of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBase {
    pub n_antennas: usize,
    pub n_users: usize,
    pub sigma2: f64,
    pub gamma: f64,
    /// Share of every generated dataset used for training.
    pub train_fraction: f64,
    pub train: TrainConfig,
    pub penalty: PenaltyConfig,
    pub solver: IterSolverConfig,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            n_antennas: 16,
            n_users: 8,
            sigma2: 1.0,
            gamma: 10.0,
            train_fraction: 0.8,
            train: TrainConfig::default(),
            penalty: PenaltyConfig::default(),
            solver: IterSolverConfig::default(),
        }
    }
}

impl SweepBase {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.n_users == 0 {
            return Err(Error::invalid("n_antennas", "K and N must be at least 1"));
        }
        if !(self.sigma2 > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::invalid("sigma2", "sigma2 and gamma must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction", "must lie strictly between 0 and 1"));
        }
        self.train.validate()?;
        self.penalty.validate()?;
        self.solver.validate()
    }

    /// Dataset size that leaves `eval_count` instances after the training split.
    pub fn dataset_size(&self, eval_count: usize) -> usize {
        (eval_count as f64 / (1.0 - self.train_fraction)).round() as usize
    }
}

/// Default grids of the three sweep axes.
pub fn default_values(axis: Axis) -> Vec<f64> {
    match axis {
        Axis::K => vec![4.0, 8.0, 16.0, 32.0],
        Axis::N => vec![2.0, 4.0, 8.0],
        Axis::Gamma => vec![2.0, 5.0, 10.0, 20.0],
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    Rng::with_stream(seed, stream).next_u64()
}

fn count_value(axis: Axis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::invalid("values", format!("{axis} must be a positive integer, got {value}")))
    }
}

struct Point {
    value: f64,
    train: Vec<ChannelSet>,
    eval: Vec<ChannelSet>,
}

fn make_point(
    axis: Axis,
    value: f64,
    index: usize,
    base: &SweepBase,
    eval_count: usize,
    seed: u64,
) -> Result<Point> {
    let (mut k, mut n, mut gamma) = (base.n_antennas, base.n_users, base.gamma);
    match axis {
        Axis::K => k = count_value(axis, value)?,
        Axis::N => n = count_value(axis, value)?,
        Axis::Gamma if value > 0.0 && value.is_finite() => gamma = value,
        Axis::Gamma => return Err(Error::invalid("values", "gamma must be positive")),
    }
    let total = base.dataset_size(eval_count).max(eval_count + 1);
    let data = gen_dataset(k, n, total, base.sigma2, gamma, derive_seed(seed, 10 + index as u64))?;
    let cut = total - eval_count;
    let mut instances = data.instances;
    let eval = instances.split_off(cut);
    Ok(Point {
        value,
        train: instances,
        eval,
    })
}

fn train_network(
    algorithm: Algorithm,
    data: &[ChannelSet],
    base: &SweepBase,
    seed: u64,
) -> Result<MlpParams> {
    let cfg = TrainConfig {
        seed,
        ..base.train.clone()
    };
    let outcome = match algorithm {
        Algorithm::L2o => train(data, &cfg)?,
        Algorithm::Penalty => penalty_train(data, &cfg, &base.penalty)?,
        _ => unreachable!("only learned algorithms are trained"),
    };
    Ok(outcome.params)
}

#[derive(Default)]
struct Tally {
    objective: Summary,
    wall: Summary,
    raw_feasible: usize,
    post_feasible: usize,
    failures: usize,
}

impl Tally {
    fn record(self, algorithm: Algorithm, axis: Axis, value: f64, count: usize) -> SweepRecord {
        let rate = |k: usize| if count == 0 { f64::NAN } else { k as f64 / count as f64 };
        SweepRecord {
            algorithm,
            axis,
            value,
            mean_objective: self.objective.mean(),
            objective_variance: self.objective.variance(),
            raw_feasibility_rate: rate(self.raw_feasible),
            post_projection_feasibility_rate: rate(self.post_feasible),
            mean_wall_time_s: self.wall.mean(),
            failures: self.failures,
        }
    }
}

fn eval_network(params: &MlpParams, eval: &[ChannelSet], base: &SweepBase) -> Result<Tally> {
    let tasks = BeamformingTask::batch(eval, &base.train.problem, &base.train.projector);
    let results = evaluate(params, &tasks)?;
    let mut tally = Tally::default();
    for (res, ch) in results.iter().zip(eval) {
        tally.raw_feasible += usize::from(res.raw_feasible);
        match (&res.output, res.objective) {
            (Some(y), Some(obj)) => {
                let w = Beamformer::from_flat(ch.n_antennas(), ch.n_users(), y.clone())?;
                tally.post_feasible += usize::from(is_feasible(&w, ch, REPORT_TOL));
                tally.objective.push(obj);
                tally.wall.push(res.wall_time_s);
            }
            _ => tally.failures += 1,
        }
    }
    Ok(tally)
}

fn eval_solver(algorithm: Algorithm, eval: &[ChannelSet], base: &SweepBase) -> Tally {
    let spec = &base.train.problem;
    let outcomes: Vec<Result<(f64, bool, f64)>> = eval
        .par_iter()
        .map(|ch| {
            let start = Instant::now();
            let init = zf_init(ch, START_POWER_MARGIN)?;
            let res = match algorithm {
                Algorithm::Sca => sca_solve(ch, spec, &init, &base.solver)?,
                Algorithm::TrustRegion => trust_region_solve(ch, spec, &init, &base.solver)?,
                _ => unreachable!("only iterative solvers are run per instance"),
            };
            let feasible = is_feasible(&res.w, ch, REPORT_TOL);
            Ok((res.objective(), feasible, start.elapsed().as_secs_f64()))
        })
        .collect();
    let mut tally = Tally::default();
    for outcome in outcomes {
        match outcome {
            Ok((obj, feasible, secs)) => {
                tally.objective.push(obj);
                tally.wall.push(secs);
                tally.raw_feasible += usize::from(feasible);
                tally.post_feasible += usize::from(feasible);
            }
            Err(e) => {
                warn!("{algorithm:?} failed on an instance: {e}");
                tally.failures += 1;
            }
        }
    }
    tally
}

/// Evaluates every algorithm at every axis value on a fresh eval split.
///
/// Learned algorithms are retrained per value on the matching training split,
/// except along `gamma`, where one network is trained on the union of all
/// training splits and gamma reaches it as an input feature.
pub fn run_sweep(
    axis: Axis,
    values: &[f64],
    algorithms: &[Algorithm],
    base: &SweepBase,
    eval_count: usize,
    seed: u64,
) -> Result<Vec<SweepRecord>> {
    if algorithms.is_empty() {
        return Ok(Vec::new());
    }
    base.validate()?;
    if values.is_empty() {
        return Err(Error::invalid("values", "must not be empty"));
    }
    if eval_count == 0 {
        return Err(Error::invalid("eval_count", "must be at least 1"));
    }
    let points = values
        .iter()
        .enumerate()
        .map(|(i, &v)| make_point(axis, v, i, base, eval_count, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut shared = Vec::new();
    if axis == Axis::Gamma {
        let pooled: Vec<ChannelSet> = points.iter().flat_map(|p| p.train.iter().cloned()).collect();
        for (a, &alg) in algorithms.iter().enumerate() {
            if alg.is_learned() {
                info!("training {alg:?} on pooled gamma data ({} instances)", pooled.len());
                shared.push((alg, train_network(alg, &pooled, base, derive_seed(seed, 1000 + a as u64))?));
            }
        }
    }

    let mut records = Vec::with_capacity(values.len() * algorithms.len());
    for (i, point) in points.iter().enumerate() {
        for (a, &alg) in algorithms.iter().enumerate() {
            let tally = if alg.is_learned() {
                let params = match shared.iter().find(|(s, _)| *s == alg) {
                    Some((_, p)) => p.clone(),
                    None => {
                        info!("training {alg:?} at {axis} = {}", point.value);
                        let s = derive_seed(seed, 2000 + (i * algorithms.len() + a) as u64);
                        train_network(alg, &point.train, base, s)?
                    }
                };
                eval_network(&params, &point.eval, base)?
            } else {
                eval_solver(alg, &point.eval, base)
            };
            records.push(tally.record(alg, axis, point.value, point.eval.len()));
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }
    }
}

const CSV_HEADER: [&str; 9] = [
    "algorithm",
    "axis",
    "value",
    "mean_objective",
    "objective_variance",
    "raw_feasibility_rate",
    "post_projection_feasibility_rate",
    "mean_wall_time_s",
    "failures",
];

/// Nine significant digits.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn to_csv(records: &[SweepRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::format("csv", e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        let alg = serde_json::to_value(r.algorithm).expect("plain enum");
        w.write_record([
            alg.as_str().expect("string tag").to_string(),
            r.axis.to_string(),
            sig9(r.value),
            sig9(r.mean_objective),
            sig9(r.objective_variance),
            sig9(r.raw_feasibility_rate),
            sig9(r.post_projection_feasibility_rate),
            sig9(r.mean_wall_time_s),
            r.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::format("csv", e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::format("csv", "unexpected header"));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::format("csv", e.to_string())))
        .collect()
}

pub fn to_json(records: &[SweepRecord]) -> Result<String> {
    serde_json::to_string_pretty(records).map_err(|e| Error::format("json", e.to_string()))
}

pub fn parse_json(text: &str) -> Result<Vec<SweepRecord>> {
    serde_json::from_str(text).map_err(|e| Error::format("json", e.to_string()))
}

pub fn export(records: &[SweepRecord], path: &Path, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => to_csv(records)?,
        ExportFormat::Json => to_json(records)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}
