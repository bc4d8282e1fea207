//! Generate a dataset, write it, read it back and split it; then save and
//! reload an untrained checkpoint.
//!
//!     cargo run --release --example dataset_io

use proj_l2o::harness::{gen_dataset, Dataset};
use proj_l2o::nn::{AdamState, Checkpoint};
use proj_l2o::trainer::{config_hash, TrainConfig};

fn main() -> proj_l2o::Result<()> {
    let dir = std::env::temp_dir().join("l2o-dataset-io");
    std::fs::create_dir_all(&dir)?;

    let data = gen_dataset(4, 2, 250, 1.0, 10.0, 3)?;
    let path = dir.join("channels.bin");
    data.save(&path)?;
    let loaded = Dataset::load(&path)?;
    assert_eq!(loaded, data);
    let (train, eval) = loaded.split(0.8);
    println!(
        "{} instances of K={} N={} ({} bytes); split {} / {}",
        loaded.len(),
        loaded.n_antennas,
        loaded.n_users,
        std::fs::metadata(&path)?.len(),
        train.len(),
        eval.len()
    );
    println!("feature length {}, output length {}", train[0].features().len(), train[0].var_dim());

    let cfg = TrainConfig {
        hidden: vec![32, 32],
        ..TrainConfig::default()
    };
    let params = cfg.init_params(train[0].features().len(), train[0].var_dim())?;
    let ckpt = Checkpoint {
        n_antennas: 4,
        n_users: 2,
        problem: cfg.problem,
        config_hash: config_hash(&cfg),
        adam: AdamState::for_params(&params),
        params,
    };
    let ckpt_path = dir.join("net.ckpt");
    ckpt.save(&ckpt_path)?;
    assert_eq!(Checkpoint::load(&ckpt_path)?, ckpt);
    println!(
        "checkpoint with {} parameters, config hash {:016x}",
        ckpt.params.len(),
        ckpt.config_hash
    );
    Ok(())
}
