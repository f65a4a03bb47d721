//! Small differentiable-computation core: layers, sequential networks, Adam
//! and the training loop with early stopping.

mod adam;
mod layers;
mod network;
mod train;

pub use adam::Adam;
pub use layers::{Act, Conv1d, Dense, Layer, Lstm, Mode, Shape};
pub use network::{bce_with_logit, input_shape_of, sigmoid, Grads, Network};
pub use train::{fit_network, stratified_holdout, TrainHistory};
