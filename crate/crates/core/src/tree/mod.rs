//! Plaintext decision trees, their validation, and the per-level partition
//! handed to level-sites.
//!
//! A tree is stored level by level. Children of a node at level `l` are
//! indexes into level `l + 1`, so a sparse tree needs no padding: a leaf at
//! level 2 of a 12-level tree simply has no descendants. Routing follows the
//! comparison bit: `β = 1` goes to `true_child`.

mod schema;
mod slice;
mod stats;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compare::CompareMode;
use crate::he::HeError;

pub use schema::{read_dataset, Attribute, AttributeKind, AttributeSchema, FeatureVector};
pub use slice::{partition_and_encrypt, EncNode, LevelSlice};
pub use stats::{depth_stats, termination_levels, DepthStats};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("tree file: {0}")]
    Parse(String),
    #[error("invalid tree: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("attribute {attribute}: unknown category {value:?}")]
    UnknownCategory { attribute: String, value: String },
    #[error("attribute {attribute}: value {value:?} outside [0, 2^{t})")]
    Range { attribute: String, value: String, t: u32 },
    #[error("attribute {0} missing from input")]
    MissingAttribute(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{0}")]
    Parameter(String),
    #[error(transparent)]
    He(#[from] HeError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "NodeRepr", into = "NodeRepr")]
pub enum TreeNode {
    Leaf {
        class_id: usize,
    },
    Internal {
        attribute: usize,
        threshold: u64,
        mode: CompareMode,
        true_child: Option<usize>,
        false_child: Option<usize>,
    },
}

impl TreeNode {
    pub fn leaf(class_id: usize) -> Self {
        TreeNode::Leaf { class_id }
    }

    pub fn internal(
        attribute: usize,
        threshold: u64,
        mode: CompareMode,
        true_child: usize,
        false_child: usize,
    ) -> Self {
        TreeNode::Internal { attribute, threshold, mode, true_child: Some(true_child), false_child: Some(false_child) }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    fn children(&self) -> [Option<usize>; 2] {
        match self {
            TreeNode::Leaf { .. } => [None, None],
            TreeNode::Internal { true_child, false_child, .. } => [*true_child, *false_child],
        }
    }
}

/// On-disk node form: `{"leaf": c}` or `{"attr", "threshold", "mode",
/// "true_child", "false_child"}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum NodeRepr {
    Leaf {
        leaf: usize,
    },
    Internal {
        attr: usize,
        threshold: u64,
        mode: CompareMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        true_child: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        false_child: Option<usize>,
    },
}

impl From<NodeRepr> for TreeNode {
    fn from(r: NodeRepr) -> Self {
        match r {
            NodeRepr::Leaf { leaf } => TreeNode::Leaf { class_id: leaf },
            NodeRepr::Internal { attr, threshold, mode, true_child, false_child } => {
                TreeNode::Internal { attribute: attr, threshold, mode, true_child, false_child }
            }
        }
    }
}

impl From<TreeNode> for NodeRepr {
    fn from(n: TreeNode) -> Self {
        match n {
            TreeNode::Leaf { class_id } => NodeRepr::Leaf { leaf: class_id },
            TreeNode::Internal { attribute, threshold, mode, true_child, false_child } => {
                NodeRepr::Internal { attr: attribute, threshold, mode, true_child, false_child }
            }
        }
    }
}

/// A broken tree invariant, located at node `(level, index)` where one
/// applies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub at: Option<(usize, usize)>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NoLevels,
    RootCount(usize),
    EmptyLevel,
    MissingChild { branch: &'static str },
    ChildOutOfRange { branch: &'static str, child: usize, len: usize },
    ChildBelowLastLevel,
    AttributeOutOfRange(usize),
    ModeMismatch { attribute: String, mode: CompareMode },
    ThresholdTooWide { threshold: u64, t: u32 },
    ClassOutOfRange(usize),
    Unreachable,
    MultipleParents(usize),
    Schema(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((l, k)) = self.at {
            write!(f, "({l},{k}) ")?;
        }
        match &self.kind {
            ViolationKind::NoLevels => write!(f, "tree has no levels"),
            ViolationKind::RootCount(n) => write!(f, "level 0 must hold exactly one node, found {n}"),
            ViolationKind::EmptyLevel => write!(f, "empty level"),
            ViolationKind::MissingChild { branch } => write!(f, "internal node missing {branch}"),
            ViolationKind::ChildOutOfRange { branch, child, len } => {
                write!(f, "{branch} {child} outside next level of {len} nodes")
            }
            ViolationKind::ChildBelowLastLevel => write!(f, "internal node on the last level"),
            ViolationKind::AttributeOutOfRange(a) => write!(f, "attribute index {a} not in schema"),
            ViolationKind::ModeMismatch { attribute, mode } => {
                write!(f, "{mode} comparison on attribute {attribute} of the other kind")
            }
            ViolationKind::ThresholdTooWide { threshold, t } => {
                write!(f, "threshold {threshold} does not fit {t} bits")
            }
            ViolationKind::ClassOutOfRange(c) => write!(f, "class id {c} not in schema"),
            ViolationKind::Unreachable => write!(f, "node unreachable from the root"),
            ViolationKind::MultipleParents(n) => write!(f, "node has {n} parents"),
            ViolationKind::Schema(msg) => write!(f, "schema: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeModel {
    pub schema: AttributeSchema,
    pub levels: Vec<Vec<TreeNode>>,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn node(&self, level: usize, index: usize) -> Option<&TreeNode> {
        self.levels.get(level)?.get(index)
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        serde_json::from_str(text).map_err(|e| TreeError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Parses and validates a tree file for `t`-bit features.
    pub fn load(text: &str, t: u32) -> Result<Self, TreeError> {
        let model = Self::from_json(text)?;
        model.check(t)?;
        Ok(model)
    }

    pub fn check(&self, t: u32) -> Result<(), TreeError> {
        let violations = self.validate(t);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(TreeError::Invalid(violations))
        }
    }

    /// Lists every broken invariant. An empty list means the tree is valid
    /// for `t`-bit features.
    pub fn validate(&self, t: u32) -> Vec<Violation> {
        let mut out: Vec<Violation> = self
            .schema
            .violations(t)
            .into_iter()
            .map(|msg| Violation { at: None, kind: ViolationKind::Schema(msg) })
            .collect();
        let push = |out: &mut Vec<Violation>, l, k, kind| out.push(Violation { at: Some((l, k)), kind });

        if self.levels.is_empty() {
            out.push(Violation { at: None, kind: ViolationKind::NoLevels });
            return out;
        }
        if self.levels[0].len() != 1 {
            out.push(Violation { at: None, kind: ViolationKind::RootCount(self.levels[0].len()) });
        }
        let last = self.levels.len() - 1;
        let mut parents: Vec<Vec<usize>> = self.levels.iter().map(|lvl| vec![0; lvl.len()]).collect();
        for (l, level) in self.levels.iter().enumerate() {
            if level.is_empty() && l > 0 {
                out.push(Violation { at: None, kind: ViolationKind::EmptyLevel });
            }
            for (k, node) in level.iter().enumerate() {
                match node {
                    TreeNode::Leaf { class_id } => {
                        if *class_id >= self.schema.classes.len() {
                            push(&mut out, l, k, ViolationKind::ClassOutOfRange(*class_id));
                        }
                    }
                    TreeNode::Internal { attribute, threshold, mode, .. } => {
                        match self.schema.attributes.get(*attribute) {
                            None => push(&mut out, l, k, ViolationKind::AttributeOutOfRange(*attribute)),
                            Some(attr) if !attr.kind.admits(*mode) => push(
                                &mut out,
                                l,
                                k,
                                ViolationKind::ModeMismatch { attribute: attr.name.clone(), mode: *mode },
                            ),
                            Some(_) => {}
                        }
                        if t < 64 && *threshold >= 1u64 << t {
                            push(&mut out, l, k, ViolationKind::ThresholdTooWide { threshold: *threshold, t });
                        }
                        if l == last {
                            push(&mut out, l, k, ViolationKind::ChildBelowLastLevel);
                        }
                        for (branch, child) in ["true_child", "false_child"].into_iter().zip(node.children()) {
                            match child {
                                None => push(&mut out, l, k, ViolationKind::MissingChild { branch }),
                                Some(c) if l < last => {
                                    let len = self.levels[l + 1].len();
                                    if c < len {
                                        parents[l + 1][c] += 1;
                                    } else {
                                        push(&mut out, l, k, ViolationKind::ChildOutOfRange { branch, child: c, len });
                                    }
                                }
                                Some(_) => {}
                            }
                        }
                    }
                }
            }
        }
        for (l, counts) in parents.iter().enumerate().skip(1) {
            for (k, &n) in counts.iter().enumerate() {
                match n {
                    0 => push(&mut out, l, k, ViolationKind::Unreachable),
                    1 => {}
                    n => push(&mut out, l, k, ViolationKind::MultipleParents(n)),
                }
            }
        }
        out
    }

    /// Walks from the root and returns `(class_id, termination_level)`.
    /// The tree must be valid.
    pub fn plaintext_classify(&self, fv: &[u64]) -> (usize, usize) {
        let mut index = 0;
        for (l, level) in self.levels.iter().enumerate() {
            match &level[index] {
                TreeNode::Leaf { class_id } => return (*class_id, l),
                TreeNode::Internal { attribute, threshold, mode, true_child, false_child } => {
                    let beta = mode.evaluate(*threshold, fv[*attribute]);
                    index = if beta { *true_child } else { *false_child }.expect("validated tree");
                }
            }
        }
        unreachable!("validated tree ends every path in a leaf")
    }

    /// Class label for a class id.
    pub fn class_label(&self, class_id: usize) -> Option<&str> {
        self.schema.classes.get(class_id).map(String::as_str)
    }
}
