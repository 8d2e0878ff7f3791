//! Dense ReLU feedforward networks and their optimizer.

mod adam;
pub mod batch;
mod fnn;

pub use adam::{adam_step, cosine_lr, AdamState};
pub use fnn::{Activation, DenseLayer, Fnn, FnnGrad};
