//! The upward pass: β(z, u) = p(scores in the subtree of u | Z_u = z),
//! computed leaves-first in log space.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use libm::{exp, log, log1p};

use super::{EmissionTable, InferenceError, TransitionMatrix, TransitionModel};
use crate::tree::{BeliefTree, NodeId};

/// A pair of log-likelihoods indexed by the truth value of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPair {
    pub log_true: f64,
    pub log_false: f64,
}

/// `log β(T, u)` and `log β(F, u)`.
pub type NodeBeta = LogPair;

impl LogPair {
    pub fn from_linear(p_true: f64, p_false: f64) -> Self {
        Self {
            log_true: log(p_true),
            log_false: log(p_false),
        }
    }

    pub fn linear(&self) -> (f64, f64) {
        (exp(self.log_true), exp(self.log_false))
    }

    fn add(self, other: LogPair) -> Self {
        Self {
            log_true: self.log_true + other.log_true,
            log_false: self.log_false + other.log_false,
        }
    }

    fn is_degenerate(&self) -> bool {
        self.log_true == f64::NEG_INFINITY && self.log_false == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub posterior_true: f64,
    pub prior_true: f64,
    pub per_node_beta: BTreeMap<NodeId, NodeBeta>,
}

/// `ln(e^a + e^b)`, exact when either side is `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + log(exp(a - hi) + exp(b - hi))
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + log(values.iter().map(|v| exp(v - hi)).sum::<f64>())
}

/// `ln(2^m - 1)` without overflowing for large `m`.
fn log_nonempty_subsets(m: usize) -> f64 {
    m as f64 * LN_2 + log1p(-(0.5f64).powi(m as i32))
}

/// Contribution of one independently generated child:
/// `m_z = Σ_k p(Z_v = k | Z_u = z) · β(k, v)`.
pub fn child_message(transition: &TransitionMatrix, child: NodeBeta) -> LogPair {
    let row = |given: [f64; 2]| {
        log_add_exp(
            log(given[0]) + child.log_true,
            log(given[1]) + child.log_false,
        )
    };
    LogPair {
        log_true: row(transition.rows[0]),
        log_false: row(transition.rows[1]),
    }
}

/// Joint contribution of a decomposition group, whose members are all true
/// when the parent is true and not all true (uniformly over the remaining
/// `2^m - 1` assignments) when it is false.
///
/// `m_T = ∏ β(T, v)` and `m_F = (∏ (β(T, v) + β(F, v)) − ∏ β(T, v)) / (2^m − 1)`.
/// The difference is expanded as a telescoping sum of non-negative terms,
/// `Σ_k ∏_{i<k} β(T, v_i) · β(F, v_k) · ∏_{i>k} (β(T, v_i) + β(F, v_i))`,
/// so nothing cancels.
pub fn group_message(members: &[NodeBeta]) -> Result<LogPair, InferenceError> {
    let m = members.len();
    if m == 0 {
        return Err(InferenceError::EmptyGroup);
    }
    let log_either: Vec<f64> = members
        .iter()
        .map(|b| log_add_exp(b.log_true, b.log_false))
        .collect();
    // suffix[k] = Σ_{i >= k} ln(β_T + β_F)
    let mut suffix = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] + log_either[k];
    }
    let mut prefix_true = 0.0;
    let mut terms = Vec::with_capacity(m);
    for (k, member) in members.iter().enumerate() {
        terms.push(prefix_true + member.log_false + suffix[k + 1]);
        prefix_true += member.log_true;
    }
    Ok(LogPair {
        log_true: prefix_true,
        log_false: log_sum_exp(terms) - log_nonempty_subsets(m),
    })
}

/// β for every node of a valid tree.
pub fn compute_beta<M: TransitionModel>(
    tree: &BeliefTree,
    table: &EmissionTable,
    model: &M,
) -> Result<BTreeMap<NodeId, NodeBeta>, InferenceError> {
    let violations = tree.validate();
    if !violations.is_empty() {
        return Err(InferenceError::InvalidTree(violations));
    }
    let mut betas: BTreeMap<NodeId, NodeBeta> = BTreeMap::new();
    for id in tree.breadth_first().into_iter().rev() {
        let node = tree.node(id).expect("breadth_first yields tree nodes");
        let (e_true, e_false) = table.lookup(node.confidence, node.strategy);
        let mut beta = LogPair::from_linear(e_true, e_false);
        if tree.is_group_parent(id) {
            let members: Vec<NodeBeta> = node.children.iter().map(|c| betas[c]).collect();
            beta = beta.add(group_message(&members)?);
        } else {
            for child_id in &node.children {
                let child = tree.node(*child_id).expect("validated");
                let relation = child.relation.expect("validated");
                beta = beta.add(child_message(&model.matrix(relation), betas[child_id]));
            }
        }
        if beta.is_degenerate() {
            return Err(InferenceError::DegenerateEvidence(id));
        }
        betas.insert(id, beta);
    }
    Ok(betas)
}

/// Posterior probability that the root statement is true.
pub fn posterior_root<M: TransitionModel>(
    tree: &BeliefTree,
    table: &EmissionTable,
    model: &M,
    prior_true: f64,
) -> Result<InferenceResult, InferenceError> {
    check_prior(prior_true)?;
    let betas = compute_beta(tree, table, model)?;
    let root = betas[&tree.root_id()];
    let joint_true = root.log_true + log(prior_true);
    let joint_false = root.log_false + log(1.0 - prior_true);
    let evidence = log_add_exp(joint_true, joint_false);
    if evidence == f64::NEG_INFINITY {
        return Err(InferenceError::DegenerateEvidence(tree.root_id()));
    }
    Ok(InferenceResult {
        posterior_true: exp(joint_true - evidence),
        prior_true,
        per_node_beta: betas,
    })
}

pub(crate) fn check_prior(prior_true: f64) -> Result<(), InferenceError> {
    if !(0.0..=1.0).contains(&prior_true) {
        return Err(InferenceError::InvalidPrior(prior_true));
    }
    Ok(())
}
