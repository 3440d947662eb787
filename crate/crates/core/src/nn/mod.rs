//! The perceptron that maps a problem vector to QUBO couplings.

mod adam;
mod arch;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use arch::{build_arch, Activation, LayerSpec};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use mlp::{ForwardTrace, Gradients, InputScaler, Layer, MlpParams};
