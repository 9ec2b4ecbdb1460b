//! Dense neural-network engine: layers, batch norm, losses, optimizers,
//! finite-difference checks and checkpoints.

mod checkpoint;
mod gradcheck;
mod init;
mod loss;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, FD_STEP, REL_ERROR_FLOOR};
pub use init::{init_gaussian, InitSpec};
pub use loss::{cross_entropy_with_grad, loss_cross_entropy, loss_mse, mse_with_grad, CE_FLOOR};
pub use network::{
    activate, sign, softmax_in_place, Activation, BatchNorm, Cache, DenseLayer, Gradients,
    LayerGrads, LayerSpec, Mode, Network,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use tensor::Tensor;
