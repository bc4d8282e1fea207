//! Train the same network with a quadratic constraint penalty instead of the
//! projection, and show how often its raw outputs are feasible.
//!
//!     cargo run --release --example penalty_baseline

use proj_l2o::baselines::{penalty_train, PenaltyConfig};
use proj_l2o::harness::gen_dataset;
use proj_l2o::trainer::{evaluate, BeamformingTask, TrainConfig};

fn main() -> proj_l2o::Result<()> {
    let data = gen_dataset(4, 2, 200, 1.0, 10.0, 5)?;
    let (train_set, eval_set) = data.split(0.8);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 16,
        learn_rate: 1e-3,
        hidden: vec![64, 64],
        ..TrainConfig::default()
    };
    let eval_tasks = BeamformingTask::batch(eval_set, &cfg.problem, &cfg.projector);
    for weight in [1.0, 10.0, 100.0] {
        let outcome = penalty_train(train_set, &cfg, &PenaltyConfig { penalty_weight: weight })?;
        let evals = evaluate(&outcome.params, &eval_tasks)?;
        let feasible = evals.iter().filter(|e| e.raw_feasible).count();
        let post: Vec<f64> = evals.iter().filter_map(|e| e.objective).collect();
        println!(
            "weight {weight:>5}: raw outputs feasible {feasible}/{}, post-projection eve SINR {:.4}",
            evals.len(),
            post.iter().sum::<f64>() / post.len() as f64
        );
    }
    Ok(())
}
