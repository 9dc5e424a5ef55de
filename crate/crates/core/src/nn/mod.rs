//! Set-transformer correction network, loss, gradients, optimizer and training loop.

pub mod adam;
pub mod checkpoint;
pub mod model;
pub mod network;
pub mod params;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use model::{multihead_attention, AttentionWeights};
pub use network::{backward, features_to_input, infer_position, mse_loss, network_forward, Gradients};
pub use params::{init_params, Architecture, NetConfig, NetworkParams, TensorSpec};
pub use tensor::Tensor2;
pub use train::{sample_loss, train, validation_samples, EpochRecord, TrainConfig, TrainOutcome, Trainer};
