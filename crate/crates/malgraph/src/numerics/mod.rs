//! From-scratch numeric kernels: matrices, layers, optimizers, and the
//! finite-difference gradient checker the test suite is built on.
//!
//! Backward passes are written by hand per model (see [`crate::vgae`] and
//! [`crate::snn`]); there is no general autodiff here, which keeps every
//! gradient auditable against `grad_check`.

pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod optim;
pub mod params;
pub mod scalar;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{
    cross_entropy, dense_layer, gcn_layer, normalize_adjacency, relu, sigmoid, softmax, softplus,
    Activation,
};
pub use matrix::Matrix;
pub use optim::{OptimizerKind, OptimizerState};
pub use params::{glorot_matrix, glorot_uniform, NamedParam, ParamSet};
pub use scalar::{as_f64, real, FloatMode, Scalar};
