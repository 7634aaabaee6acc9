//! Simulation and exact finite-volume verification for the arboreal gas:
//! random spanning forests with weight `beta` per edge, boundary-partition
//! Gibbs measures, augmented windows, component resampling, uniform
//! spanning forests and random-walk intersection diagnostics.

pub mod augment;
pub mod beta;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod graph;
pub mod linkcut;
pub mod observables;
pub mod oracle;
pub mod par;
pub mod partition;
pub mod resample;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod suite;
pub mod unionfind;
pub mod validate;
pub mod walks;

pub use beta::Beta;
pub use error::{Error, Result};
pub use forest::ForestConfig;
pub use oracle::ExactLaw;
pub use graph::{
    build_lattice_window, components, induced_subgraph, inner_boundary, quotient, EdgeId,
    Extracted, FiniteGraph, QuotientGraph, Subgraph, VertexId, VertexPartition,
};
pub use partition::{derive_inner, BoundaryMixture, BoundaryPartition};
pub use unionfind::DisjointSets;
