//! Belief trees: a target statement at the root, LLM-generated statements
//! below it, and the logical relation of each child to its parent.
//!
//! A tree is grown through [`BeliefTree::add_child`] and
//! [`BeliefTree::add_decomposition_group`], both of which refuse any step
//! that would break a structural invariant. Trees read back from disk are
//! not trusted and should be run through [`BeliefTree::validate`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

/// Dense node identifier, assigned in construction order with the root at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

impl Statement {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source_id: None,
        }
    }

    pub fn with_source(text: impl Into<String>, source_id: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source_id: Some(source_id.into()),
        }
    }

    pub fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

/// Logical relation of a child statement `v` to its parent `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// u ⇔ v
    Equivalence,
    /// u ⇒ v
    Entailment,
    /// u ⇐ v
    ReverseEntailment,
    /// u ⇒ ¬v
    Contradiction,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Equivalence,
        Relation::Entailment,
        Relation::ReverseEntailment,
        Relation::Contradiction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Equivalence => "Equivalence",
            Relation::Entailment => "Entailment",
            Relation::ReverseEntailment => "ReverseEntailment",
            Relation::Contradiction => "Contradiction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Root,
    Decomposition,
    Premise,
    Correction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNode {
    pub id: NodeId,
    pub statement: Statement,
    /// Observed confidence score in `[0, 1]`.
    pub confidence: f64,
    pub strategy: Strategy,
    /// Absent for the root and for members of a decomposition group.
    pub relation: Option<Relation>,
    pub depth: u32,
    pub children: Vec<NodeId>,
}

impl BeliefNode {
    /// A childless node. `depth` is filled in by the tree when it is added.
    pub fn new(
        id: NodeId,
        statement: Statement,
        confidence: f64,
        strategy: Strategy,
        relation: Option<Relation>,
    ) -> Self {
        Self {
            id,
            statement,
            confidence,
            strategy,
            relation,
            depth: 0,
            children: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("unknown parent node {0}")]
    UnknownParent(NodeId),
    #[error("node id {0} is already in use")]
    DuplicateId(NodeId),
    #[error("node {id} at depth {depth} exceeds the maximum depth {max_depth}")]
    DepthExceeded {
        id: NodeId,
        depth: u32,
        max_depth: u32,
    },
    #[error("node {0} was produced by statement correction and cannot have children")]
    CorrectionParent(NodeId),
    #[error("node {id} has confidence {confidence} outside [0, 1]")]
    ConfidenceOutOfRange { id: NodeId, confidence: f64 },
    #[error("node {0} has an empty statement")]
    EmptyStatement(NodeId),
    #[error("correction node {0} must have confidence 1.0")]
    CorrectionConfidence(NodeId),
    #[error("node {0} needs a relation to its parent")]
    MissingRelation(NodeId),
    #[error("node {0} cannot be added under a decomposition group parent")]
    MixedDecompositionGroup(NodeId),
    #[error("a decomposition group needs at least two members, got {0}")]
    GroupTooSmall(usize),
    #[error("decomposition member {0} must have strategy decomposition and no relation")]
    InvalidGroupMember(NodeId),
    #[error("the root strategy is reserved for node 0")]
    SecondRoot(NodeId),
}

/// One broken invariant found by [`BeliefTree::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    MissingRoot(NodeId),
    /// Map key and stored node id disagree.
    IdMismatch(NodeId),
    EmptyStatement(NodeId),
    ConfidenceOutOfRange(NodeId),
    /// A non-root node carries the root strategy, or the root does not.
    RootStrategy(NodeId),
    RootHasRelation(NodeId),
    DepthExceeded(NodeId),
    DepthMismatch(NodeId),
    UnknownChild {
        parent: NodeId,
        child: NodeId,
    },
    MultipleParents(NodeId),
    Unreachable(NodeId),
    CorrectionConfidence(NodeId),
    CorrectionHasChildren(NodeId),
    MissingRelation(NodeId),
    /// A decomposition-group parent with a child that is not a plain
    /// decomposition member. Reported on the parent.
    MixedDecompositionGroup(NodeId),
    SingletonDecompositionGroup(NodeId),
    UnknownGroupParent(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTree {
    nodes: BTreeMap<NodeId, BeliefNode>,
    root_id: NodeId,
    joint_decomposition_parents: BTreeSet<NodeId>,
    max_depth: u32,
}

impl BeliefTree {
    /// A tree holding only the root statement, which becomes node 0.
    pub fn with_root(
        statement: Statement,
        confidence: f64,
        max_depth: u32,
    ) -> Result<Self, TreeError> {
        let root_id = NodeId(0);
        check_payload(root_id, &statement, confidence)?;
        let root = BeliefNode {
            id: root_id,
            statement,
            confidence,
            strategy: Strategy::Root,
            relation: None,
            depth: 0,
            children: Vec::new(),
        };
        Ok(Self {
            nodes: BTreeMap::from([(root_id, root)]),
            root_id,
            joint_decomposition_parents: BTreeSet::new(),
            max_depth,
        })
    }

    pub fn root_id(&self) -> NodeId {
        self.root_id
    }

    pub fn root(&self) -> &BeliefNode {
        &self.nodes[&self.root_id]
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&BeliefNode> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &BeliefNode> {
        self.nodes.values()
    }

    pub fn joint_decomposition_parents(&self) -> &BTreeSet<NodeId> {
        &self.joint_decomposition_parents
    }

    pub fn is_group_parent(&self, id: NodeId) -> bool {
        self.joint_decomposition_parents.contains(&id)
    }

    /// The next unused dense id.
    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.children.len()).sum()
    }

    /// Nodes ordered parents-before-children (breadth first from the root).
    /// Nodes unreachable from the root are not visited.
    pub fn breadth_first(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.root_id]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            let Some(node) = self.nodes.get(&id) else {
                continue;
            };
            order.push(id);
            queue.extend(node.children.iter().copied());
        }
        order
    }

    /// Adds a relation-typed child under `parent_id`.
    ///
    /// The child's depth is derived from its parent. Decomposition members go
    /// through [`add_decomposition_group`](Self::add_decomposition_group).
    pub fn add_child(&mut self, parent_id: NodeId, mut node: BeliefNode) -> Result<(), TreeError> {
        let depth = self.check_parent(parent_id)?;
        if self.is_group_parent(parent_id) {
            return Err(TreeError::MixedDecompositionGroup(node.id));
        }
        self.check_new_node(&node, depth)?;
        if node.relation.is_none() {
            return Err(TreeError::MissingRelation(node.id));
        }
        node.depth = depth;
        node.children.clear();
        let id = node.id;
        self.nodes.insert(id, node);
        self.nodes
            .get_mut(&parent_id)
            .expect("parent checked")
            .children
            .push(id);
        Ok(())
    }

    /// Adds `members` as one jointly-equivalent decomposition group under a
    /// parent that has no children yet.
    pub fn add_decomposition_group(
        &mut self,
        parent_id: NodeId,
        members: Vec<BeliefNode>,
    ) -> Result<(), TreeError> {
        let depth = self.check_parent(parent_id)?;
        if members.len() < 2 {
            return Err(TreeError::GroupTooSmall(members.len()));
        }
        if let Some(existing) = self.nodes[&parent_id].children.first() {
            return Err(TreeError::MixedDecompositionGroup(*existing));
        }
        let mut ids = BTreeSet::new();
        for member in &members {
            self.check_new_node(member, depth)?;
            if !ids.insert(member.id) {
                return Err(TreeError::DuplicateId(member.id));
            }
            if member.strategy != Strategy::Decomposition || member.relation.is_some() {
                return Err(TreeError::InvalidGroupMember(member.id));
            }
        }
        for mut member in members {
            member.depth = depth;
            member.children.clear();
            let id = member.id;
            self.nodes.insert(id, member);
            self.nodes
                .get_mut(&parent_id)
                .expect("parent checked")
                .children
                .push(id);
        }
        self.joint_decomposition_parents.insert(parent_id);
        Ok(())
    }

    /// Returns the depth a child of `parent_id` would have.
    fn check_parent(&self, parent_id: NodeId) -> Result<u32, TreeError> {
        let parent = self
            .nodes
            .get(&parent_id)
            .ok_or(TreeError::UnknownParent(parent_id))?;
        if parent.strategy == Strategy::Correction {
            return Err(TreeError::CorrectionParent(parent_id));
        }
        Ok(parent.depth + 1)
    }

    fn check_new_node(&self, node: &BeliefNode, depth: u32) -> Result<(), TreeError> {
        if self.nodes.contains_key(&node.id) {
            return Err(TreeError::DuplicateId(node.id));
        }
        if depth > self.max_depth {
            return Err(TreeError::DepthExceeded {
                id: node.id,
                depth,
                max_depth: self.max_depth,
            });
        }
        if node.strategy == Strategy::Root {
            return Err(TreeError::SecondRoot(node.id));
        }
        check_payload(node.id, &node.statement, node.confidence)?;
        if node.strategy == Strategy::Correction && node.confidence != 1.0 {
            return Err(TreeError::CorrectionConfidence(node.id));
        }
        Ok(())
    }

    /// Every violated invariant, sorted. Empty for a well-formed tree.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = BTreeSet::new();
        let Some(root) = self.nodes.get(&self.root_id) else {
            return vec![Violation::MissingRoot(self.root_id)];
        };
        if root.relation.is_some() {
            out.insert(Violation::RootHasRelation(root.id));
        }
        if root.depth != 0 {
            out.insert(Violation::DepthMismatch(root.id));
        }

        let mut parent_of: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for (key, node) in &self.nodes {
            let id = node.id;
            if *key != id {
                out.insert(Violation::IdMismatch(*key));
            }
            if node.statement.is_blank() {
                out.insert(Violation::EmptyStatement(id));
            }
            if !(0.0..=1.0).contains(&node.confidence) {
                out.insert(Violation::ConfidenceOutOfRange(id));
            }
            if (node.strategy == Strategy::Root) != (id == self.root_id) {
                out.insert(Violation::RootStrategy(id));
            }
            if node.depth > self.max_depth {
                out.insert(Violation::DepthExceeded(id));
            }
            if node.strategy == Strategy::Correction {
                if node.confidence != 1.0 {
                    out.insert(Violation::CorrectionConfidence(id));
                }
                if !node.children.is_empty() {
                    out.insert(Violation::CorrectionHasChildren(id));
                }
            }

            let grouped = self.joint_decomposition_parents.contains(&id);
            if grouped && node.children.len() < 2 {
                out.insert(Violation::SingletonDecompositionGroup(id));
            }
            for child_id in &node.children {
                let Some(child) = self.nodes.get(child_id) else {
                    out.insert(Violation::UnknownChild {
                        parent: id,
                        child: *child_id,
                    });
                    continue;
                };
                if parent_of.insert(*child_id, id).is_some() || *child_id == self.root_id {
                    out.insert(Violation::MultipleParents(*child_id));
                }
                if child.depth != node.depth + 1 {
                    out.insert(Violation::DepthMismatch(*child_id));
                }
                if grouped {
                    if child.strategy != Strategy::Decomposition || child.relation.is_some() {
                        out.insert(Violation::MixedDecompositionGroup(id));
                    }
                } else if child.relation.is_none() {
                    out.insert(Violation::MissingRelation(*child_id));
                }
            }
        }

        for parent in &self.joint_decomposition_parents {
            if !self.nodes.contains_key(parent) {
                out.insert(Violation::UnknownGroupParent(*parent));
            }
        }

        let reachable: BTreeSet<NodeId> = self.breadth_first().into_iter().collect();
        for id in self.nodes.keys() {
            if !reachable.contains(id) {
                out.insert(Violation::Unreachable(*id));
            }
        }
        out.into_iter().collect()
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Canonical JSON text: fixed key order, nodes sorted by id, trailing
    /// newline. Identical trees serialize to identical bytes.
    pub fn to_canonical_string(&self) -> String {
        let file = TreeFile {
            root_id: self.root_id,
            max_depth: self.max_depth,
            joint_decomposition_parents: self.joint_decomposition_parents.iter().copied().collect(),
            nodes: self.nodes.values().map(NodeRecord::from).collect(),
        };
        let mut text =
            serde_json::to_string_pretty(&file).expect("tree serialization is infallible");
        text.push('\n');
        text
    }

    /// Parses the canonical text form. Only syntax and id uniqueness are
    /// checked here; call [`validate`](Self::validate) for the rest.
    pub fn from_canonical_str(text: &str) -> Result<Self, ParseError> {
        let raw: RawTreeFile<'_> =
            serde_json::from_str(text).map_err(|e| ParseError::from_json(text, 0, &e))?;
        let mut nodes = BTreeMap::new();
        for raw_node in raw.nodes {
            let start = offset_within(text, raw_node.get());
            let record: NodeRecord = serde_json::from_str(raw_node.get())
                .map_err(|e| ParseError::from_json(raw_node.get(), start, &e))?;
            let node = BeliefNode::from(record);
            if nodes.contains_key(&node.id) {
                return Err(ParseError {
                    offset: start,
                    message: format!("duplicate node id {}", node.id),
                });
            }
            nodes.insert(node.id, node);
        }
        let mut parents = BTreeSet::new();
        for id in raw.joint_decomposition_parents {
            if !parents.insert(id) {
                return Err(ParseError {
                    offset: 0,
                    message: format!("node {id} listed twice in joint_decomposition_parents"),
                });
            }
        }
        Ok(Self {
            nodes,
            root_id: raw.root_id,
            joint_decomposition_parents: parents,
            max_depth: raw.max_depth,
        })
    }

    /// Graphviz rendering with one labelled node per statement.
    pub fn to_dot(&self) -> String {
        const LABEL_CHARS: usize = 48;
        let mut out = String::from("digraph belief_tree {\n  node [shape=box];\n");
        for node in self.nodes.values() {
            let mut text: String = node.statement.text.chars().take(LABEL_CHARS).collect();
            if node.statement.text.chars().count() > LABEL_CHARS {
                text.push_str("...");
            }
            out.push_str(&format!(
                "  n{} [label=\"{}: {}\\n({:.2})\"];\n",
                node.id,
                node.id,
                dot_escape(&text),
                node.confidence
            ));
        }
        for node in self.nodes.values() {
            let grouped = self.is_group_parent(node.id);
            for child_id in &node.children {
                let label = match self.nodes.get(child_id).and_then(|c| c.relation) {
                    _ if grouped => "decomp",
                    Some(relation) => relation.name(),
                    None => "?",
                };
                out.push_str(&format!(
                    "  n{} -> n{} [label=\"{}\"];\n",
                    node.id, child_id, label
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn check_payload(id: NodeId, statement: &Statement, confidence: f64) -> Result<(), TreeError> {
    if statement.is_blank() {
        return Err(TreeError::EmptyStatement(id));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(TreeError::ConfidenceOutOfRange { id, confidence });
    }
    Ok(())
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn from_json(text: &str, base: usize, err: &serde_json::Error) -> Self {
        Self {
            offset: base + line_col_to_offset(text, err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

/// serde_json reports 1-based lines and columns.
fn line_col_to_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn offset_within(outer: &str, inner: &str) -> usize {
    (inner.as_ptr() as usize).saturating_sub(outer.as_ptr() as usize)
}

#[derive(Serialize)]
struct TreeFile {
    root_id: NodeId,
    max_depth: u32,
    joint_decomposition_parents: Vec<NodeId>,
    nodes: Vec<NodeRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTreeFile<'a> {
    root_id: NodeId,
    max_depth: u32,
    joint_decomposition_parents: Vec<NodeId>,
    #[serde(borrow)]
    nodes: Vec<&'a RawValue>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: NodeId,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_id: Option<String>,
    confidence: f64,
    strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relation: Option<Relation>,
    depth: u32,
    children: Vec<NodeId>,
}

impl From<&BeliefNode> for NodeRecord {
    fn from(node: &BeliefNode) -> Self {
        Self {
            id: node.id,
            text: node.statement.text.clone(),
            source_id: node.statement.source_id.clone(),
            confidence: node.confidence,
            strategy: node.strategy,
            relation: node.relation,
            depth: node.depth,
            children: node.children.clone(),
        }
    }
}

impl From<NodeRecord> for BeliefNode {
    fn from(r: NodeRecord) -> Self {
        Self {
            id: r.id,
            statement: Statement {
                text: r.text,
                source_id: r.source_id,
            },
            confidence: r.confidence,
            strategy: r.strategy,
            relation: r.relation,
            depth: r.depth,
            children: r.children,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn premise(id: u32, text: &str, confidence: f64, relation: Relation) -> BeliefNode {
        BeliefNode::new(
            NodeId(id),
            Statement::new(text),
            confidence,
            Strategy::Premise,
            Some(relation),
        )
    }

    fn decomp(id: u32, text: &str, confidence: f64) -> BeliefNode {
        BeliefNode::new(
            NodeId(id),
            Statement::new(text),
            confidence,
            Strategy::Decomposition,
            None,
        )
    }

    fn three_node() -> BeliefTree {
        let mut tree = BeliefTree::with_root(Statement::new("root"), 0.1, 2).unwrap();
        tree.add_child(NodeId(0), premise(1, "a", 0.05, Relation::Contradiction))
            .unwrap();
        tree.add_child(NodeId(0), premise(2, "b", 0.95, Relation::Entailment))
            .unwrap();
        tree
    }

    #[test]
    fn smallest_growth_step() {
        let mut tree = BeliefTree::with_root(Statement::new("root"), 0.5, 2).unwrap();
        tree.add_child(NodeId(0), premise(1, "child", 0.9, Relation::Entailment))
            .unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(tree.root().children, vec![NodeId(1)]);
        assert_eq!(tree.node(NodeId(1)).unwrap().depth, 1);
    }

    #[test]
    fn depth_beyond_max_is_rejected() {
        let mut tree = BeliefTree::with_root(Statement::new("root"), 0.5, 2).unwrap();
        tree.add_child(NodeId(0), premise(1, "d1", 0.5, Relation::Entailment))
            .unwrap();
        tree.add_child(NodeId(1), premise(2, "d2", 0.5, Relation::Entailment))
            .unwrap();
        let err = tree
            .add_child(NodeId(2), premise(3, "d3", 0.5, Relation::Entailment))
            .unwrap_err();
        assert_eq!(
            err,
            TreeError::DepthExceeded {
                id: NodeId(3),
                depth: 3,
                max_depth: 2
            }
        );
    }

    #[test]
    fn correction_nodes_are_never_expanded() {
        let mut tree = BeliefTree::with_root(Statement::new("root"), 0.5, 2).unwrap();
        let fix = BeliefNode::new(
            NodeId(1),
            Statement::new("fix"),
            1.0,
            Strategy::Correction,
            Some(Relation::Equivalence),
        );
        tree.add_child(NodeId(0), fix).unwrap();
        let err = tree
            .add_child(NodeId(1), premise(2, "x", 0.5, Relation::Entailment))
            .unwrap_err();
        assert_eq!(err, TreeError::CorrectionParent(NodeId(1)));
    }

    #[test]
    fn add_child_errors() {
        let mut tree = three_node();
        assert_eq!(
            tree.add_child(NodeId(9), premise(3, "x", 0.5, Relation::Entailment))
                .unwrap_err(),
            TreeError::UnknownParent(NodeId(9))
        );
        assert_eq!(
            tree.add_child(NodeId(0), premise(2, "x", 0.5, Relation::Entailment))
                .unwrap_err(),
            TreeError::DuplicateId(NodeId(2))
        );
        let bad = BeliefNode::new(NodeId(3), Statement::new("x"), 0.5, Strategy::Premise, None);
        assert_eq!(
            tree.add_child(NodeId(0), bad).unwrap_err(),
            TreeError::MissingRelation(NodeId(3))
        );
        let wrong_fix = BeliefNode::new(
            NodeId(3),
            Statement::new("x"),
            0.7,
            Strategy::Correction,
            Some(Relation::Contradiction),
        );
        assert_eq!(
            tree.add_child(NodeId(0), wrong_fix).unwrap_err(),
            TreeError::CorrectionConfidence(NodeId(3))
        );
        assert!(matches!(
            tree.add_child(NodeId(0), premise(3, "x", 1.5, Relation::Entailment)),
            Err(TreeError::ConfidenceOutOfRange { .. })
        ));
        assert_eq!(
            tree.add_child(NodeId(0), premise(3, "  ", 0.5, Relation::Entailment))
                .unwrap_err(),
            TreeError::EmptyStatement(NodeId(3))
        );
        assert!(tree.is_valid());
    }

    #[test]
    fn decomposition_groups() {
        let mut tree = BeliefTree::with_root(Statement::new("a and b"), 0.5, 2).unwrap();
        assert_eq!(
            tree.add_decomposition_group(NodeId(0), vec![decomp(1, "a", 0.9)])
                .unwrap_err(),
            TreeError::GroupTooSmall(1)
        );
        tree.add_decomposition_group(NodeId(0), vec![decomp(1, "a", 0.9), decomp(2, "b", 0.8)])
            .unwrap();
        assert!(tree.is_group_parent(NodeId(0)));
        assert_eq!(
            tree.add_child(NodeId(0), premise(3, "c", 0.5, Relation::Entailment))
                .unwrap_err(),
            TreeError::MixedDecompositionGroup(NodeId(3))
        );
        tree.add_child(NodeId(2), premise(3, "c", 0.5, Relation::Entailment))
            .unwrap();
        assert!(tree.is_valid());
    }

    #[test]
    fn validate_well_formed() {
        assert_eq!(three_node().validate(), vec![]);
    }

    #[test]
    fn validate_confidence_range() {
        let mut tree = three_node();
        tree.nodes.get_mut(&NodeId(1)).unwrap().confidence = 1.2;
        assert_eq!(
            tree.validate(),
            vec![Violation::ConfidenceOutOfRange(NodeId(1))]
        );
    }

    #[test]
    fn validate_mixed_group() {
        let mut tree = BeliefTree::with_root(Statement::new("a and b"), 0.5, 2).unwrap();
        tree.add_decomposition_group(NodeId(0), vec![decomp(1, "a", 0.9), decomp(2, "b", 0.8)])
            .unwrap();
        tree.nodes.get_mut(&NodeId(2)).unwrap().relation = Some(Relation::Entailment);
        assert_eq!(
            tree.validate(),
            vec![Violation::MixedDecompositionGroup(NodeId(0))]
        );
    }

    #[test]
    fn validate_structural_faults() {
        let mut tree = three_node();
        tree.nodes
            .get_mut(&NodeId(1))
            .unwrap()
            .children
            .push(NodeId(2));
        let violations = tree.validate();
        assert!(violations.contains(&Violation::MultipleParents(NodeId(2))));
        assert!(violations.contains(&Violation::DepthMismatch(NodeId(2))));

        let mut orphan = three_node();
        orphan
            .nodes
            .insert(NodeId(7), premise(7, "lost", 0.5, Relation::Entailment));
        assert!(orphan
            .validate()
            .contains(&Violation::Unreachable(NodeId(7))));

        let mut singleton = three_node();
        singleton.joint_decomposition_parents.insert(NodeId(2));
        assert_eq!(
            singleton.validate(),
            vec![Violation::SingletonDecompositionGroup(NodeId(2))]
        );
    }

    #[test]
    fn canonical_text_is_deterministic_and_roundtrips() {
        let mut tree =
            BeliefTree::with_root(Statement::with_source("a and b", "rec-1"), 0.3, 2).unwrap();
        tree.add_decomposition_group(
            NodeId(0),
            vec![decomp(1, "a", 0.9), decomp(2, "b", 0.1 + 0.2)],
        )
        .unwrap();
        tree.add_child(
            NodeId(1),
            premise(3, "c \"quoted\"", 0.75, Relation::ReverseEntailment),
        )
        .unwrap();
        let first = tree.to_canonical_string();
        assert_eq!(first, tree.clone().to_canonical_string());
        let back = BeliefTree::from_canonical_str(&first).unwrap();
        assert_eq!(back, tree);
        assert!(first.contains("\"reverse_entailment\""));
        assert!(first.contains("\"decomposition\""));
    }

    #[test]
    fn duplicate_ids_fail_to_parse() {
        let text = three_node().to_canonical_string();
        let dup = text.replace("\"id\": 2,", "\"id\": 1,");
        let err = BeliefTree::from_canonical_str(&dup).unwrap_err();
        assert!(err.message.contains("duplicate"));
        let second = dup.match_indices("\"id\": 1,").nth(1).unwrap().0;
        assert!(
            err.offset < second && err.offset > dup.match_indices("\"id\": 1,").next().unwrap().0
        );
    }

    #[test]
    fn malformed_text_reports_offset() {
        let err = BeliefTree::from_canonical_str("{\n  \"root_id\": x").unwrap_err();
        assert_eq!(err.offset, 15);
        let err = BeliefTree::from_canonical_str("").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn dot_export() {
        let single = BeliefTree::with_root(Statement::new("only"), 0.5, 2)
            .unwrap()
            .to_dot();
        assert_eq!(single.matches("[label=").count(), 1);
        assert!(!single.contains("->"));

        let mut tree = BeliefTree::with_root(Statement::new("root"), 0.5, 2).unwrap();
        tree.add_child(NodeId(0), premise(1, "x", 0.5, Relation::Contradiction))
            .unwrap();
        assert!(tree.to_dot().contains("n0 -> n1 [label=\"Contradiction\"]"));

        let mut group = BeliefTree::with_root(Statement::new("a and b"), 0.5, 2).unwrap();
        group
            .add_decomposition_group(NodeId(0), vec![decomp(1, "a", 0.9), decomp(2, "b", 0.8)])
            .unwrap();
        let dot = group.to_dot();
        assert_eq!(dot.matches("[label=\"decomp\"]").count(), 2);
    }
}
