//! Modeling and design-space exploration for multi-alternative process
//! networks (mAPN).
//!
//! An mAPN is a process network whose channels are colored; every color is
//! one algorithmic alternative and a single graph encodes many end-to-end
//! variants of the same streaming application. This crate validates such
//! graphs, unfolds data-parallel processes into per-degree lanes, aggregates
//! per-process metric annotations into per-variant evaluations and extracts
//! the feasible and best variants, either incrementally ([`explore`]) or by
//! brute-force enumeration ([`oracle`]).
//!
//! ```
//! use mapn_core::{explore, fixtures, metrics::ExplorationConfig, unfold};
//!
//! let model = fixtures::sample_model();
//! let unfolded = unfold::unfold_model(&model).unwrap();
//! let cfg = ExplorationConfig { best: 3, ..Default::default() };
//! let best = explore::explore_graph(&unfolded.model, &cfg).unwrap();
//! assert_eq!(best.len(), 3);
//! ```

pub mod explore;
pub mod fixtures;
pub mod gen;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod unfold;
pub mod wellformed;

pub use metrics::{AnnotationTable, MetricSet, ParallelRules};
pub use model::{Channel, Color, MapnGraph, Process, ProcessId, Variant};

/// A graph together with everything needed to evaluate its variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub graph: MapnGraph,
    pub metrics: MetricSet,
    pub annotations: AnnotationTable,
    pub rules: ParallelRules,
}
