//! Exact inference in the hidden Markov tree laid over a belief tree.
//!
//! Each node carries a hidden truth value `Z_u` and an observed confidence
//! `S_u`. Scores are tied to truth values by an [`EmissionTable`]; parents
//! and children are tied by the relation on their edge
//! ([`TransitionModel`]) or, for decomposition groups, by a joint
//! "all true iff parent true" factor.

mod beta;
mod emission;
mod oracle;
mod transition;

use thiserror::Error;

use crate::tree::{NodeId, Violation};

pub use beta::{
    child_message, compute_beta, group_message, log_add_exp, posterior_root, InferenceResult,
    LogPair, NodeBeta,
};
pub use emission::{bin_index, check_bin_edges, default_bins, EmissionTable, DEFAULT_BIN_EDGES};
pub use oracle::{brute_force_posterior, MAX_ORACLE_NODES};
pub use transition::{TransitionMatrix, TransitionModel, TransitionParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("invalid emission table: {0}")]
    InvalidTable(String),
    #[error("invalid transition parameters p_t={p_t}, p_f={p_f}")]
    InvalidTransition { p_t: f64, p_f: f64 },
    #[error("prior {0} is outside [0, 1]")]
    InvalidPrior(f64),
    #[error("tree fails validation: {0:?}")]
    InvalidTree(Vec<Violation>),
    #[error("both truth values have zero likelihood at node {0}")]
    DegenerateEvidence(NodeId),
    #[error("a decomposition group needs at least one member")]
    EmptyGroup,
    #[error("tree has {nodes} nodes; enumeration is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },
}
