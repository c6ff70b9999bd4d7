//! Density-aware graph classification.
//!
//! The pipeline runs in five stages, each usable on its own:
//!
//! 1. [`graph`]: undirected simple graphs, dataset loading and a planted
//!    dense-core generator.
//! 2. [`density`]: degree, core number and truss number per node, plus the
//!    min-max normalization that turns them into sampling densities.
//! 3. [`walk`]: random weighted walks whose transitions follow the density of
//!    the current node relative to a threshold.
//! 4. [`embed`]: skip-gram with negative sampling over the walk corpus.
//! 5. [`mpnn`] and [`eval`]: message-passing graph classifiers (GCN, GAT, GIN,
//!    GraphSAGE) and the metrics and hyperparameter sweep around them.
//!
//! [`pipeline`] ties the stages together with content-hash caching.
//!
//! With the default `parallel` feature, batch work over graphs, seed nodes
//! and sweep cells runs on rayon. Without it every [`Execution`] falls back
//! to sequential iteration and results are identical.

pub mod density;
pub mod embed;
pub mod eval;
mod exec;
pub mod graph;
mod fsutil;
pub mod mpnn;
pub mod pipeline;
pub mod walk;

pub use exec::Execution;
pub use graph::{Graph, LabeledGraphSet, Split};
