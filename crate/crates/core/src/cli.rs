//! The `l2o` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O or malformed file,
//! 4 training failure, 5 shape mismatch between inputs.
//!
//! Metrics files are JSON lines. The first line is a header object
//! `{"format":"l2o-metrics","version":1,"config_hash":..}` and every later
//! line is one training step.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::baselines::penalty_train;
use crate::config::{RunConfig, TrainMode};
use crate::harness::{export, gen_dataset, run_sweep, Axis, Dataset, ExportFormat};
use crate::nn::Checkpoint;
use crate::numeric::Rng;
use crate::problem::{objective, soc_residuals, Beamformer};
use crate::projection::{
    anchored_start, orthogonality_residual, phase_anchors, project, sample_feasible_points,
    ProjectorConfig, START_POWER_MARGIN,
};
use crate::trainer::{config_hash, evaluate, train, BeamformingTask, TrainMetrics, TrainOutcome};
use crate::Error;

pub const METRICS_VERSION: u32 = 1;
pub const ORTHOGONALITY_SAMPLES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "l2o", version, about = "Projection-based learned beamforming")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs fully serial.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a channel dataset.
    Gen,
    /// Train a network and write a checkpoint plus a metrics file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to the checkpoint path with a `.metrics.jsonl` suffix.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run a checkpoint on every instance of a dataset and write a CSV.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Project one flattened beamformer onto an instance's QoS region.
    Project {
        #[arg(long)]
        dataset: PathBuf,
        /// Whitespace-separated reals in the interleaved layout.
        #[arg(long)]
        point: PathBuf,
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Compare algorithms along one problem axis.
    Sweep {
        /// Overrides `sweep.axis`: K, N or gamma.
        #[arg(long)]
        axis: Option<Axis>,
    },
}

/// A failed command: the process exit code and a message for stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_TRAINING: u8 = 4;
pub const EXIT_SHAPE: u8 = 5;

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// Maps a library error to its exit code, with `context` prefixed.
    fn from_error(context: &str, e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter { .. } => EXIT_CONFIG,
            Error::Io(_) | Error::Format { .. } => EXIT_IO,
            Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => EXIT_SHAPE,
            Error::Training(_)
            | Error::InfeasibleRegion
            | Error::RankDeficient { .. }
            | Error::Undetermined { .. } => EXIT_TRAINING,
        };
        Self::new(code, format!("{context}: {e}"))
    }
}

fn ctx<T>(context: &str, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_error(context, e))
}

fn io_ctx<T>(context: &str, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::new(EXIT_IO, format!("{context}: {e}")))
}

/// Loads `--config` and applies the `--seed` and `--threads` overrides.
pub fn load_config(global: &GlobalArgs) -> CliResult<RunConfig> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| CliError::new(EXIT_CONFIG, "this command needs --config <path>"))?;
    let text = io_ctx(&format!("reading {}", path.display()), std::fs::read_to_string(path))?;
    let mut cfg = ctx(&format!("config {}", path.display()), RunConfig::from_toml(&text))?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = global.threads {
        cfg.threads = Some(threads);
    }
    ctx("config", cfg.validate())?;
    Ok(cfg)
}

fn require_out(global: &GlobalArgs) -> CliResult<&Path> {
    global
        .out
        .as_deref()
        .ok_or_else(|| CliError::new(EXIT_CONFIG, "this command needs --out <path>"))
}

/// Parses the command line and runs it inside a pool of the requested size.
pub fn run(cli: Cli) -> CliResult<()> {
    let threads = match (&cli.command, cli.global.threads) {
        (_, Some(t)) => Some(t),
        (Command::Gen | Command::Train { .. } | Command::Sweep { .. }, None) => {
            load_config(&cli.global)?.threads
        }
        _ => None,
    };
    if threads == Some(0) {
        return Err(CliError::new(EXIT_CONFIG, "--threads must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let global = &cli.global;
    match &cli.command {
        Command::Gen => {
            let cfg = load_config(global)?;
            let dataset = cmd_gen(&cfg, require_out(global)?)?;
            println!("wrote {} instances (seed {})", dataset.len(), dataset.seed);
        }
        Command::Train { dataset, metrics } => {
            let cfg = load_config(global)?;
            let out = require_out(global)?;
            let metrics = metrics.clone().unwrap_or_else(|| metrics_path(out));
            let outcome = cmd_train(&cfg, dataset, out, &metrics)?;
            if let (Some(first), Some(last)) = (outcome.history.first(), outcome.history.last()) {
                println!(
                    "{} steps; mean objective {:.6} -> {:.6}",
                    outcome.history.len(),
                    first.mean_objective,
                    last.mean_objective
                );
            } else {
                println!("0 steps");
            }
        }
        Command::Infer {
            checkpoint,
            dataset,
        } => {
            let projector = match &global.config {
                Some(_) => load_config(global)?.projector,
                None => ProjectorConfig::default(),
            };
            let rows = cmd_infer(checkpoint, dataset, require_out(global)?, &projector)?;
            println!("wrote {rows} rows");
        }
        Command::Project {
            dataset,
            point,
            instance,
        } => {
            let (projector, seed) = match &global.config {
                Some(_) => {
                    let cfg = load_config(global)?;
                    (cfg.projector, cfg.seed)
                }
                None => (ProjectorConfig::default(), global.seed.unwrap_or(1)),
            };
            let report = cmd_project(dataset, point, *instance, require_out(global)?, &projector, seed)?;
            println!(
                "distance {:.9e} after {} iterations; min orthogonality residual {:.3e}",
                report.distance, report.iterations, report.orthogonality_min_residual
            );
        }
        Command::Sweep { axis } => {
            let mut cfg = load_config(global)?;
            if let Some(axis) = axis {
                cfg.sweep.axis = *axis;
            }
            let n = cmd_sweep(&cfg, require_out(global)?)?;
            println!("wrote {n} records");
        }
    }
    Ok(())
}

/// `<checkpoint>.metrics.jsonl` next to the checkpoint.
pub fn metrics_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".metrics.jsonl");
    PathBuf::from(name)
}

pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> CliResult<Dataset> {
    let d = &cfg.data;
    let dataset = ctx(
        "generating dataset",
        gen_dataset(d.k, d.n, d.count, d.sigma2, d.gamma, cfg.seed),
    )?;
    ctx(&format!("writing {}", out.display()), dataset.save(out))?;
    info!("dataset written to {}", out.display());
    Ok(dataset)
}

#[derive(Serialize)]
struct MetricsHeader<'a> {
    format: &'a str,
    version: u32,
    config_hash: u64,
    mode: TrainMode,
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    mode: TrainMode,
    train: &'a crate::trainer::TrainConfig,
    penalty: Option<&'a crate::baselines::PenaltyConfig>,
}

/// Trains per `cfg.train.mode`, then writes the checkpoint and metrics.
pub fn cmd_train(cfg: &RunConfig, dataset: &Path, checkpoint_out: &Path, metrics_out: &Path) -> CliResult<TrainOutcome> {
    let data = ctx(&format!("reading {}", dataset.display()), Dataset::load(dataset))?;
    if data.n_antennas != cfg.data.k || data.n_users != cfg.data.n {
        return Err(CliError::new(
            EXIT_SHAPE,
            format!(
                "dataset is K={}, N={} but the config says K={}, N={}",
                data.n_antennas, data.n_users, cfg.data.k, cfg.data.n
            ),
        ));
    }
    if data.is_empty() {
        return Err(CliError::new(EXIT_TRAINING, "training failed: dataset is empty"));
    }
    let train_cfg = cfg.train_config();
    let mode = cfg.train.mode;
    let hash = config_hash(&HashedConfig {
        mode,
        train: &train_cfg,
        penalty: (mode == TrainMode::Penalty).then_some(&cfg.penalty),
    });
    let outcome = match mode {
        TrainMode::L2o => train(&data.instances, &train_cfg),
        TrainMode::Penalty => penalty_train(&data.instances, &train_cfg, &cfg.penalty),
    };
    let outcome = outcome.map_err(|e| match e {
        Error::InvalidParameter { .. } => CliError::from_error("config", e),
        other => CliError::new(EXIT_TRAINING, format!("training: {other}")),
    })?;
    let checkpoint = Checkpoint {
        n_antennas: data.n_antennas,
        n_users: data.n_users,
        problem: train_cfg.problem,
        config_hash: hash,
        params: outcome.params.clone(),
        adam: outcome.adam.clone(),
    };
    ctx(&format!("writing {}", checkpoint_out.display()), checkpoint.save(checkpoint_out))?;
    io_ctx(
        &format!("writing {}", metrics_out.display()),
        write_metrics(metrics_out, hash, mode, &outcome.history),
    )?;
    Ok(outcome)
}

fn write_metrics(path: &Path, hash: u64, mode: TrainMode, history: &[TrainMetrics]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = MetricsHeader {
        format: "l2o-metrics",
        version: METRICS_VERSION,
        config_hash: hash,
        mode,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for m in history {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a metrics file back, skipping the header line.
pub fn read_metrics(path: &Path) -> crate::Result<Vec<TrainMetrics>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap_or(""))
        .map_err(|e| Error::format("metrics header", e.to_string()))?;
    if header["format"] != "l2o-metrics" || header["version"] != METRICS_VERSION {
        return Err(Error::format("metrics header", format!("unexpected header {header}")));
    }
    lines
        .map(|l| serde_json::from_str(l).map_err(|e| Error::format("metrics record", e.to_string())))
        .collect()
}

/// Writes one CSV row per instance and returns the row count.
///
/// Columns: `instance, objective, raw_objective, projected, min_margin,
/// margin_0 .. margin_{N-1}, wall_time_s`. Margins are those of the
/// returned point; `objective` is empty when the projection failed.
pub fn cmd_infer(
    checkpoint: &Path,
    dataset: &Path,
    out: &Path,
    projector: &ProjectorConfig,
) -> CliResult<usize> {
    let ckpt = ctx(&format!("reading {}", checkpoint.display()), Checkpoint::load(checkpoint))?;
    let data = ctx(&format!("reading {}", dataset.display()), Dataset::load(dataset))?;
    if ckpt.n_antennas != data.n_antennas || ckpt.n_users != data.n_users {
        return Err(CliError::new(
            EXIT_SHAPE,
            format!(
                "checkpoint is K={}, N={} but the dataset is K={}, N={}",
                ckpt.n_antennas, ckpt.n_users, data.n_antennas, data.n_users
            ),
        ));
    }
    let n_users = data.n_users;
    let tasks = BeamformingTask::batch(&data.instances, &ckpt.problem, projector);
    let evals = ctx("inference", evaluate(&ckpt.params, &tasks))?;

    let mut header = vec![
        "instance".to_string(),
        "objective".into(),
        "raw_objective".into(),
        "projected".into(),
        "min_margin".into(),
    ];
    header.extend((0..n_users).map(|i| format!("margin_{i}")));
    header.push("wall_time_s".into());

    let file = io_ctx(&format!("creating {}", out.display()), File::create(out))?;
    let mut writer = csv::Writer::from_writer(file);
    let write_err = |e: csv::Error| CliError::new(EXIT_IO, format!("writing {}: {e}", out.display()));
    writer.write_record(&header).map_err(write_err)?;
    for (i, (ev, ch)) in evals.iter().zip(&data.instances).enumerate() {
        let margins = match &ev.output {
            Some(y) => {
                let w = ctx("inference", Beamformer::from_flat(ch.n_antennas(), n_users, y.clone()))?;
                soc_residuals(&w, ch).margins
            }
            None => vec![f64::NAN; n_users],
        };
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let mut row = vec![
            i.to_string(),
            ev.objective.map(|v| format!("{v:.12e}")).unwrap_or_default(),
            format!("{:.12e}", ev.raw_objective),
            ev.projected.to_string(),
            format!("{min_margin:.12e}"),
        ];
        row.extend(margins.iter().map(|m| format!("{m:.12e}")));
        row.push(format!("{:.6e}", ev.wall_time_s));
        writer.write_record(&row).map_err(write_err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::new(EXIT_IO, format!("writing {}: {e}", out.display())))?;
    Ok(evals.len())
}

/// What `project` writes, as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ProjectReport {
    pub instance: usize,
    pub projected: Vec<f64>,
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub min_margin: f64,
    /// Smallest `<y - x, z - y>` over the sampled feasible points `z`.
    pub orthogonality_min_residual: f64,
    pub orthogonality_samples: usize,
    pub wall_time_s: f64,
}

/// Reads whitespace-separated reals.
pub fn read_point(path: &Path) -> crate::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::format("point file", format!("`{tok}`: {e}")))
        })
        .collect()
}

pub fn cmd_project(
    dataset: &Path,
    point: &Path,
    instance: usize,
    out: &Path,
    projector: &ProjectorConfig,
    seed: u64,
) -> CliResult<ProjectReport> {
    let data = ctx(&format!("reading {}", dataset.display()), Dataset::load(dataset))?;
    let ch = data.instances.get(instance).ok_or_else(|| {
        CliError::new(
            EXIT_SHAPE,
            format!("instance {instance} out of range for {} instances", data.len()),
        )
    })?;
    let flat = ctx(&format!("reading {}", point.display()), read_point(point))?;
    let x = ctx(
        "point",
        Beamformer::from_flat(ch.n_antennas(), ch.n_users(), flat),
    )?;
    let start = Instant::now();
    let result = ctx("projection", project(&x, ch, projector))?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let anchors = phase_anchors(&x, ch);
    let orthogonality_min_residual = if result.distance == 0.0 {
        0.0
    } else {
        let interior = ctx("projection", anchored_start(ch, &anchors, START_POWER_MARGIN))?;
        let mut rng = Rng::with_stream(seed, 7);
        sample_feasible_points(&result.y, &interior, ch, &anchors, &mut rng, ORTHOGONALITY_SAMPLES)
            .iter()
            .map(|z| orthogonality_residual(&x, &result.y, z))
            .fold(f64::INFINITY, f64::min)
    };
    let report = ProjectReport {
        instance,
        objective: objective(&result.y, ch, &Default::default()),
        min_margin: soc_residuals(&result.y, ch).min_margin(),
        projected: result.y.into_flat(),
        distance: result.distance,
        iterations: result.iterations,
        converged: result.converged,
        orthogonality_min_residual,
        orthogonality_samples: ORTHOGONALITY_SAMPLES,
        wall_time_s,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    io_ctx(&format!("writing {}", out.display()), std::fs::write(out, json))?;
    Ok(report)
}

/// Runs the configured sweep and exports it; the format follows the
/// extension of `out` (`.json` or CSV otherwise).
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> CliResult<usize> {
    let records = ctx(
        "sweep",
        run_sweep(
            cfg.sweep.axis,
            &cfg.sweep_values(),
            &cfg.sweep.algorithms,
            &cfg.sweep_base(),
            cfg.sweep.eval_count,
            cfg.seed,
        ),
    )?;
    ctx(
        &format!("writing {}", out.display()),
        export(&records, out, ExportFormat::from_path(out)),
    )?;
    Ok(records.len())
}
