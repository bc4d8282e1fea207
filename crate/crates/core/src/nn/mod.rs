//! Feed-forward network, manual reverse pass, Adam and parameter files.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{backward, backward_accumulate, clip, forward, MlpParams, Tape};

pub(crate) use checkpoint::{get_f64, get_f64s, get_u32, get_u64, put_f64s};
