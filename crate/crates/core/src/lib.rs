//! Score-based Bayesian network structure learning under a hard treewidth
//! bound.
//!
//! The crate provides three routes to a bounded-treewidth structure:
//!
//! * an exact mixed-integer linear program builder with an LP-text exporter,
//!   an assignment checker and a desk-scale enumerative solver ([`milp`]),
//! * an anytime sampler over uniformly drawn k-trees (via Dandelion codes)
//!   with either an exact in-k-tree dynamic program or a fast greedy pass
//!   over sampled partial orders ([`search`], [`ktree`]),
//! * a brute-force oracle for tiny instances that everything else is tested
//!   against ([`oracle`]).
//!
//! Local scores are BDeu, precomputed into a [`scoring::ScoreCache`] which is
//! the sole input to every learner.

pub mod graph;
pub mod ktree;
pub mod milp;
pub mod oracle;
pub mod scoring;
pub mod search;
pub mod synth;

pub use graph::{Dag, EliminationOrder, UndirectedGraph};
pub use ktree::{CliqueTree, DandelionCode, KTree};
pub use scoring::{Dataset, ScoreCache, ScoringConfig};
pub use search::{LearnResult, PartialOrder};
