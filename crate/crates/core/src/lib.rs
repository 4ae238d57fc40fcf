//! Skeleton-based action recognition: a learned pose refinement stage in
//! front of a two-stream graph convolutional backbone.
//!
//! The crate is layered bottom-up: [`numerics`] (tensors, reverse-mode
//! differentiation, SGD), [`graph`] (skeleton topology and partitioned
//! adjacency), [`layers`], [`modules`] (pose refinement, gradual fusion,
//! temporal aggregation), [`model`] (assembly, accounting, checkpoints),
//! [`data`] and [`train`].

pub mod data;
pub mod error;
pub mod graph;
pub mod layers;
pub mod model;
pub mod modules;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
pub use numerics::{no_grad, sgd_step, DType, Float, Parameter, Tensor};
pub use graph::{PartitionedAdjacency, Skeleton, Topology};
pub use layers::{Mode, Module};
pub use model::{count_flops, count_params, ModelConfig, PrGcnModel};
pub use modules::{ChannelSemantics, FusionMode};
pub use train::{evaluate, lr_at, train, train_until, Metrics, RunConfig, TrainConfig};
