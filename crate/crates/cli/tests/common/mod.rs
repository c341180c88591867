#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use btprop_core::tree::{BeliefNode, BeliefTree, NodeId, Relation, Statement, Strategy};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn btprop(args: &[&str]) -> Output {
    btprop_env(args, &[])
}

/// Runs the binary with only the given `BTPROP_*` variables set.
pub fn btprop_env(args: &[&str], vars: &[(&str, &str)]) -> Output {
    let mut command = Command::new(env!("CARGO_BIN_EXE_btprop"));
    for (key, _) in std::env::vars().filter(|(k, _)| k.starts_with("BTPROP_")) {
        command.env_remove(key);
    }
    command
        .args(args)
        .envs(vars.iter().copied())
        .output()
        .expect("binary runs")
}

pub fn stderr_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

pub fn premise(id: u32, text: &str, confidence: f64, relation: Relation) -> BeliefNode {
    BeliefNode::new(
        NodeId(id),
        Statement::new(text),
        confidence,
        Strategy::Premise,
        Some(relation),
    )
}

pub fn single_node(confidence: f64) -> BeliefTree {
    BeliefTree::with_root(Statement::new("The statement under test."), confidence, 2).unwrap()
}

/// Root 0.1 with a contradicting child at 0.05 and an entailed child at 0.95.
pub fn three_node() -> BeliefTree {
    let mut tree = single_node(0.1);
    tree.add_child(
        NodeId(0),
        premise(
            1,
            "A claim that contradicts the root.",
            0.05,
            Relation::Contradiction,
        ),
    )
    .unwrap();
    tree.add_child(
        NodeId(0),
        premise(2, "A claim the root entails.", 0.95, Relation::Entailment),
    )
    .unwrap();
    tree
}

/// Root 0.1 split into two claims at 0.95 each.
pub fn decomposition() -> BeliefTree {
    let mut tree = single_node(0.1);
    let claims = [(1, "First claim."), (2, "Second claim.")].map(|(id, text)| {
        BeliefNode::new(
            NodeId(id),
            Statement::new(text),
            0.95,
            Strategy::Decomposition,
            None,
        )
    });
    tree.add_decomposition_group(NodeId(0), claims.to_vec())
        .unwrap();
    tree
}

pub mod random {
    use btprop_core::hmt::{EmissionTable, TransitionParams, DEFAULT_BIN_EDGES};
    use btprop_core::tree::{BeliefNode, BeliefTree, NodeId, Relation, Statement, Strategy};
    use rand::seq::IndexedRandom;
    use rand::Rng;

    /// Probabilities bounded away from zero that sum to one.
    fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v / total).collect()
    }

    pub fn table(rng: &mut impl Rng) -> EmissionTable {
        let bins = DEFAULT_BIN_EDGES.len() - 1;
        let (t, f) = (simplex(rng, bins), simplex(rng, bins));
        let c = rng.random_range(0.05..0.95);
        EmissionTable::new(DEFAULT_BIN_EDGES.to_vec(), t, f, c, 1.0 - c).unwrap()
    }

    pub fn params(rng: &mut impl Rng) -> TransitionParams {
        TransitionParams::from_p_t(rng.random_range(0.05..0.95)).unwrap()
    }

    fn confidence(rng: &mut impl Rng) -> f64 {
        // land on bin edges now and then
        if rng.random_bool(0.15) {
            *DEFAULT_BIN_EDGES.choose(rng).unwrap()
        } else {
            rng.random()
        }
    }

    /// A valid tree of at most `max_nodes` nodes mixing every relation,
    /// corrections and decomposition groups of two to four members.
    pub fn tree(rng: &mut impl Rng, max_nodes: usize) -> BeliefTree {
        let max_depth = 3;
        let target = rng.random_range(1..=max_nodes);
        let mut tree =
            BeliefTree::with_root(Statement::new("root"), confidence(rng), max_depth).unwrap();
        while tree.len() < target {
            let open: Vec<&BeliefNode> = tree
                .nodes()
                .filter(|n| {
                    n.depth < max_depth
                        && n.strategy != Strategy::Correction
                        && !tree.is_group_parent(n.id)
                })
                .collect();
            let Some(parent) = open.choose(rng) else {
                break;
            };
            let (parent_id, childless) = (parent.id, parent.children.is_empty());
            let room = target - tree.len();
            let next = tree.next_id().0;
            if childless && room >= 2 && rng.random_bool(0.35) {
                let m = rng.random_range(2..=room.min(4)) as u32;
                let members = (0..m)
                    .map(|i| {
                        let id = NodeId(next + i);
                        BeliefNode::new(
                            id,
                            Statement::new(format!("claim {}", id.0)),
                            confidence(rng),
                            Strategy::Decomposition,
                            None,
                        )
                    })
                    .collect();
                tree.add_decomposition_group(parent_id, members).unwrap();
            } else {
                let relation = *Relation::ALL.choose(rng).unwrap();
                let (strategy, c) = if rng.random_bool(0.2) {
                    (Strategy::Correction, 1.0)
                } else {
                    (Strategy::Premise, confidence(rng))
                };
                let node = BeliefNode::new(
                    NodeId(next),
                    Statement::new(format!("node {next}")),
                    c,
                    strategy,
                    Some(relation),
                );
                tree.add_child(parent_id, node).unwrap();
            }
        }
        tree
    }
}
