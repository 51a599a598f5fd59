//! The book's chapters, compiled as doctests so their examples stay current.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[doc = include_str!("../../../book/src/catalog.md")]
pub struct Catalog;

#[doc = include_str!("../../../book/src/gradients.md")]
pub struct Gradients;

#[doc = include_str!("../../../book/src/stochastic.md")]
pub struct Stochastic;

#[doc = include_str!("../../../book/src/vector_ops.md")]
pub struct VectorOps;

#[doc = include_str!("../../../book/src/composites.md")]
pub struct Composites;

#[doc = include_str!("../../../book/src/networks.md")]
pub struct Networks;

#[doc = include_str!("../../../book/src/experiments.md")]
pub struct Experiments;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;

#[doc = include_str!("../../../book/src/numerics.md")]
pub struct Numerics;
