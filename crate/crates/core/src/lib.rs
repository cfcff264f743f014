//! Reachable-set approximation for feed-forward ReLU networks with
//! zonotopes.
//!
//! [`reach::propagate`] pushes an input [`Zonotope`] through a [`Network`]
//! and returns a union of zonotopes that either contains every reachable
//! output ([`Direction::Over`]) or is contained in the reachable set
//! ([`Direction::Under`]). The [`analysis`] module turns these sets into
//! robustness certificates, reliability curves, loss values, output extents
//! and feature rankings.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod linprog;
pub mod network;
pub mod oracle;
pub mod reach;
pub mod report;
pub mod zonotope;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use network::{argmax, DenseLayer, Network, Task};
pub use reach::{
    propagate, propagate_limited, propagate_with, Budget, Direction, ReachOptions, ReachSet,
};
pub use zonotope::{merge_union, IntervalHull, Zonotope};
