//! Minimal differentiable computation.
//!
//! [`Matrix`] holds values, [`ParamStore`] owns named trainable
//! [`DenseArray`]s, and [`Graph`] records a forward pass so that gradients
//! can be replayed in reverse. On top sit the [`Linear`] layer, the
//! [`AttentionBlock`], JSON checkpoints and the finite-difference
//! [`grad_check`].

mod gradcheck;
mod layers;
mod matrix;
mod optim;
mod params;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport, Probe};
pub use layers::{context, AttentionBlock, BoundAttention, BoundLinear, Linear, Projections};
pub use matrix::Matrix;
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Checkpoint, DenseArray, ParamId, ParamRecord, ParamStore, CHECKPOINT_FORMAT};
pub use tape::{Graph, Var};
