//! Neural-network engine: tensors, layers with hand-written backward passes,
//! the three window architectures, losses, Adam, training and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use layers::{Layer, Mode, Module};
pub use loss::{compute_loss, LossConfig, LossKind};
pub use model::{build_model, Model, ModelConfig, ModelKind};
pub use tensor::{Param, Scalar, Tensor};
pub use train::{train, EpochRecord, TrainOptions, TrainOutcome};
