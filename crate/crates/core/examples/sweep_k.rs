//! A small antenna-count sweep over every algorithm, printed as CSV.
//!
//!     cargo run --release --example sweep_k

use proj_l2o::baselines::IterSolverConfig;
use proj_l2o::harness::{run_sweep, to_csv, Algorithm, Axis, SweepBase};
use proj_l2o::trainer::TrainConfig;

fn main() -> proj_l2o::Result<()> {
    let base = SweepBase {
        n_users: 2,
        train: TrainConfig {
            epochs: 5,
            batch_size: 16,
            learn_rate: 1e-3,
            hidden: vec![32, 32],
            ..TrainConfig::default()
        },
        solver: IterSolverConfig {
            max_outer: 30,
            ..IterSolverConfig::default()
        },
        ..SweepBase::default()
    };
    let algorithms = [Algorithm::L2o, Algorithm::Penalty, Algorithm::Sca, Algorithm::TrustRegion];
    let records = run_sweep(Axis::K, &[2.0, 4.0, 8.0], &algorithms, &base, 20, 1)?;
    print!("{}", to_csv(&records)?);
    Ok(())
}
