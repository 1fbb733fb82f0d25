//! Bernoulli percolation and first-passage percolation on translation-invariant
//! oriented graphs over Z^d.
//!
//! The graph is never materialized: a [`GraphSpec`] holds the finite direction
//! set, and a [`FieldParams`] maps every implicit edge to an open/closed state
//! (equivalently a passage time in {0, 1}) through a counter-based hash. All
//! Monte Carlo estimators are therefore reproducible from `(seed, p)` alone and
//! coupled across `p`.

pub mod cli;
pub mod cluster;
pub mod cones;
pub mod error;
pub mod field;
pub mod fpp;
pub mod graph;
pub mod oracle;
pub mod render;
pub mod sharp;
pub mod stats;

mod search;

pub use cluster::{ClusterReport, PcEstimate, SweepPoint, Termination};
pub use error::{Error, Result};
pub use field::{EdgeKey, FieldParams};
pub use graph::{Direction, GraphSpec, LinearForm, SubadditiveWeight, Vertex, Window};
pub use sharp::{DecayCertificate, FiniteSet, PhiResult};
