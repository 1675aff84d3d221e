//! Surrogates for the damage solver: an auto-regressive U-Net for the damage
//! field and a small CNN for the homogenised observed shrinkage and
//! stiffness, with input assembly, rollout and training.

pub mod data;
pub mod loss;
pub mod net;
pub mod rollout;
pub mod train;

pub use data::{assemble_input, Inputs, NormalizationSpec, Sample, Targets};
pub use loss::{loss_damage, loss_properties, PropertyLoss};
pub use net::{build_cnn, build_unet, scenario_padding, PropertyNetConfig, UNetConfig};
pub use rollout::{enforce_monotone, predict_properties, rollout, rollout_batch, unet_step, RolloutResult};
pub use train::{evaluate_cnn, evaluate_unet, train_cnn, train_unet, EpochRecord, History, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum SurrogateError {
    #[error("input out of range: {0}")]
    RangeViolation(String),
    #[error("training diverged at epoch {epoch} (loss {loss:.3e})")]
    DivergenceDetected { epoch: usize, loss: f64 },
    #[error("samples from different scenarios")]
    ScenarioMismatch,
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("bad training data: {0}")]
    Data(String),
    #[error(transparent)]
    Nn(#[from] mesoshrink_nn::NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
