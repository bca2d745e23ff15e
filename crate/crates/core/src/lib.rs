//! Language-to-behavior-tree pipeline for 2D robot swarms.
//!
//! Operator commands are normalized, safety-gated, turned into prompts for a
//! pluggable language-model endpoint, and the returned XML is admitted to the
//! simulator only if the strict whitelist gate in [`bt_model`] accepts it.

pub mod bt_model;
pub mod bt_runtime;
pub mod swarm_sim;
pub mod nl_pipeline;
pub mod eval;
pub mod datagen;

pub use bt_model::{
    classify_failure, default_whitelist, parse_document, serialize_tree, BehaviorTree, BtNode,
    Classification, FailureCategory, NodeKind, NodeWhitelist, ValidationReport,
};
