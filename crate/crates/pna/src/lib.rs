//! Graph networks built around multi-statistic neighbourhood aggregation with
//! degree scalers, plus the synthetic graph-theory benchmark used to compare
//! them against common message-passing baselines.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: a small dense float64 tensor arena with reverse-mode
//!   automatic differentiation (Wengert tape), including the segment
//!   reductions graph batching needs.
//! - [`batch`]: batched graph structure (edge lists, segment indices,
//!   per-node degree scaler columns).
//! - [`graphgen`]: random graph families, edge toggling, input features.
//! - [`tasks`]: exact classical-algorithm labels (shortest paths,
//!   eccentricity, Laplacian features, connectivity, diameter, spectral
//!   radius).
//! - [`aggregation`]: multiset aggregators and degree scalers, both as plain
//!   functions and as differentiable neighbourhood reductions.
//! - [`layers`]: graph convolutions (multi-aggregator, GCN, GAT, GIN, MPNN),
//!   recurrent units and readouts.
//! - [`theory`]: constructive checks — multiset recovery from moments,
//!   injective scaled mean, exhaustive aggregator collision search.
//! - [`pipeline`]: datasets, model assembly, training, evaluation, suites.

pub mod aggregation;
pub mod batch;
pub mod graphgen;
pub mod layers;
pub mod pipeline;
pub mod tasks;
pub mod tensor;
pub mod theory;
