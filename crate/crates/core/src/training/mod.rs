//! Contrastive training of the QUBO-regressing network.

mod losses;
mod model;
mod trainer;

pub use losses::*;
pub use model::{to_scalar, Model, ModelKind, Sampler, SolverChoice, AUTO_EXHAUSTIVE_MAX_N};
pub use trainer::{init_model, train, train_with, EpochStats, TrainConfig, TrainReport};
