//! Bernoulli bond percolation on boxes of `Z^d`.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: boxes `B_n`, vertex indexing, interior edges.
//! - [`percolation`]: counter-hashed edge states, coupled across `p` and across nested boxes.
//! - [`cluster`]: augmented union-find and the maximum-diameter observables.
//! - [`oracle`]: exact enumeration over every configuration of a tiny box.
//! - [`estimate`]: streaming moments, Wilson intervals, decay-rate regression.
//! - [`montecarlo`]: deterministic parallel experiments and run manifests.

pub mod cluster;
pub mod estimate;
pub mod lattice;
pub mod montecarlo;
pub mod oracle;
pub mod percolation;

pub use cluster::{ClusterForest, ClusterRecord, MarginPolicy, SimFrame, TailOutcome};
pub use estimate::{BinomialEstimate, Regime, StreamStats, XiEstimate};
pub use lattice::{BoxSpec, EdgeId, Vertex};
pub use montecarlo::{ExperimentKind, ExperimentSpec, RunManifest};
pub use oracle::{ExactDistribution, Observable};
pub use percolation::{EdgeSampler, EdgeStates, RestrictedConfig};
