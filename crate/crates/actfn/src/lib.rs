//! Activation functions for small neural networks: a catalog of scalar
//! kinds with analytic gradients, stochastic variants, composite combiners,
//! a dense network for experiments and the experiment runners.

pub mod activation;
pub mod catalog;
pub mod composite;
pub mod error;
pub mod experiments;
pub mod gradients;
pub mod netlab;
pub mod special;
pub mod stochastic;
pub mod vector_ops;

pub use activation::Activation;
pub use catalog::{Kind, ParamSet};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
