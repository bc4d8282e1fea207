//! Train a small network to minimise eavesdropper SINR and compare its
//! projected outputs with the untrained network on held-out channels.
//!
//!     cargo run --release --example train_eve_sinr

use proj_l2o::harness::{gen_dataset, Summary};
use proj_l2o::nn::MlpParams;
use proj_l2o::trainer::{evaluate, train_programs, BeamformingTask, GradientRule, TrainConfig, Upstream};

fn post_projection(params: &MlpParams, tasks: &[BeamformingTask]) -> proj_l2o::Result<Summary> {
    Ok(evaluate(params, tasks)?.iter().filter_map(|e| e.objective).collect())
}

fn main() -> proj_l2o::Result<()> {
    env_logger::init();
    let data = gen_dataset(4, 2, 240, 1.0, 10.0, 1)?;
    let (train_set, eval_set) = data.split(5.0 / 6.0);
    let cfg = TrainConfig {
        epochs: 25,
        batch_size: 16,
        learn_rate: 1e-3,
        hidden: vec![64, 64],
        gradient_rule: GradientRule::Implicit,
        ..TrainConfig::default()
    };
    let train_tasks = BeamformingTask::batch(train_set, &cfg.problem, &cfg.projector);
    let eval_tasks = BeamformingTask::batch(eval_set, &cfg.problem, &cfg.projector);
    let init = cfg.init_params(train_set[0].features().len(), train_set[0].var_dim())?;

    let before = post_projection(&init, &eval_tasks)?;
    let outcome = train_programs(&train_tasks, init, &cfg, Upstream::Projection(cfg.gradient_rule))?;
    for m in outcome.history.iter().step_by(30) {
        println!(
            "step {:>4}  epoch {:>2}  objective {:.4}  raw feasible {:.2}  |g| {:.3}",
            m.step, m.epoch, m.mean_objective, m.raw_feasibility_rate, m.grad_norm_pre_clip
        );
    }
    let after = post_projection(&outcome.params, &eval_tasks)?;
    println!(
        "held-out eve SINR: untrained {:.4} ± {:.4}, trained {:.4} ± {:.4}",
        before.mean(),
        before.std_error(),
        after.mean(),
        after.std_error()
    );
    Ok(())
}
