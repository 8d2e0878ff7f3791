//! Aggregation expressivity laboratory for aggregate-combine graph neural networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`neural`]: dense ReLU feedforward networks, their gradients, a max-norm
//!   Lipschitz bound and an Adam optimizer with cosine decay.
//! - [`graph`]: featured graphs, the parameterized star / bipartite / tripartite
//!   families and their JSON format.
//! - [`gnn`]: aggregations, layer semantics, forward passes, readouts and the
//!   training tape used for backpropagation.
//! - [`constructions`]: Sum-GNN gadgets that approximate Mean and Max, and the
//!   compiler turning a Mean-GNN or Max-GNN into an equivalent Sum-GNN.
//! - [`analysis`]: symbolic describing sets, piecewise-polynomial piece counting,
//!   a discrete minimax polynomial oracle and counterexample search.
//! - [`experiments`]: UC / SV datasets, training from scratch and relative-error grids.
//! - [`report`]: CSV aggregation and deterministic SVG plots of RE tables.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod gnn;
pub mod graph;
pub mod neural;
pub mod report;
pub mod util;

pub use error::{Error, Result};
