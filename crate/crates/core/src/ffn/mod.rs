//! Fully connected regression networks trained with reverse-mode gradients.

mod grad;
mod io;
mod model;
mod optim;
mod train;

pub use grad::{backprop, gradient_check, loss_and_gradients, mse_chunked, mse_loss, Gradients, Workspace};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_VERSION};
pub use model::{init_model, Activation, FfnModel, Layer};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{fit, train, train_arrays, HyperConfig, TrainReport};
