//! Datasets, sweeps and result export.

mod dataset;
mod stats;
mod sweep;

pub use dataset::{gen_dataset, Dataset, DATASET_MAGIC, DATASET_VERSION};
pub use stats::Summary;
pub use sweep::{
    default_values, export, parse_csv, parse_json, run_sweep, to_csv, to_json, Algorithm, Axis,
    ExportFormat, SweepBase, SweepRecord,
};
