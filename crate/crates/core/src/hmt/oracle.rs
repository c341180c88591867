//! Exhaustive enumeration of the hidden truth assignments. Exponential in
//! the node count and written without any of the message-passing code, so
//! it can referee [`posterior_root`](super::posterior_root).

use std::collections::BTreeMap;

use super::{beta::check_prior, EmissionTable, InferenceError, TransitionModel};
use crate::tree::{BeliefTree, NodeId};

pub const MAX_ORACLE_NODES: usize = 20;

pub fn brute_force_posterior<M: TransitionModel>(
    tree: &BeliefTree,
    table: &EmissionTable,
    model: &M,
    prior_true: f64,
) -> Result<f64, InferenceError> {
    check_prior(prior_true)?;
    let n = tree.len();
    if n > MAX_ORACLE_NODES {
        return Err(InferenceError::TooLarge {
            nodes: n,
            limit: MAX_ORACLE_NODES,
        });
    }
    let violations = tree.validate();
    if !violations.is_empty() {
        return Err(InferenceError::InvalidTree(violations));
    }

    let index: BTreeMap<NodeId, usize> = tree
        .nodes()
        .enumerate()
        .map(|(i, node)| (node.id, i))
        .collect();
    let root = index[&tree.root_id()];
    let mut mass_true = 0.0;
    let mut mass_false = 0.0;

    for assignment in 0u32..(1u32 << n) {
        let truth = |i: usize| assignment & (1 << i) != 0;
        let mut joint = if truth(root) {
            prior_true
        } else {
            1.0 - prior_true
        };

        for node in tree.nodes() {
            let u = index[&node.id];
            let (e_true, e_false) = table.lookup(node.confidence, node.strategy);
            joint *= if truth(u) { e_true } else { e_false };
            if node.children.is_empty() {
                continue;
            }
            if tree.is_group_parent(node.id) {
                let m = node.children.len();
                let all_true = node.children.iter().all(|c| truth(index[c]));
                joint *= match (truth(u), all_true) {
                    (true, true) => 1.0,
                    (true, false) => 0.0,
                    (false, true) => 0.0,
                    (false, false) => 1.0 / ((1u64 << m) - 1) as f64,
                };
            } else {
                for child_id in &node.children {
                    let child = tree.node(*child_id).expect("validated");
                    let matrix = model.matrix(child.relation.expect("validated"));
                    joint *= matrix.prob(truth(u), truth(index[child_id]));
                }
            }
        }

        if truth(root) {
            mass_true += joint;
        } else {
            mass_false += joint;
        }
    }

    let total = mass_true + mass_false;
    if total == 0.0 {
        return Err(InferenceError::DegenerateEvidence(tree.root_id()));
    }
    Ok(mass_true / total)
}
