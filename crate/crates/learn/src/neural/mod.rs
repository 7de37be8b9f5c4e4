//! Dense layers, an LSTM cell, Gaussian reparameterization and Adam.

pub mod checkpoint;
pub mod dense;
pub mod gaussian;
pub mod lstm;
pub mod matrix;
pub mod optim;

pub use dense::{log_softmax, sigmoid, Activation, DenseNet, Forward, Gradients};
pub use gaussian::{gaussian_reparam, kl_standard_normal};
pub use lstm::{LstmCell, LstmState};
pub use matrix::Matrix;
pub use optim::{clip_grad_norm, Adam};
