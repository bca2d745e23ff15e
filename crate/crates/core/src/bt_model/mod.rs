//! Behavior-tree data model, the strict XML wire format and the validation
//! gate that decides whether generated output may be executed.
//!
//! The gate is a closed decision procedure. Text either parses into a
//! [`BehaviorTree`] whose every leaf is on the active [`NodeWhitelist`], or
//! it is rejected with exactly one [`FailureCategory`]. Categories are tested
//! in a fixed order and the first one that applies wins:
//!
//! 1. [`FailureCategory::NonXml`]: the trimmed text is not a lone XML document.
//! 2. [`FailureCategory::MalformedXml`]: the document is not well-formed.
//! 3. [`FailureCategory::IncompleteStructure`]: the `root` / `BehaviorTree` /
//!    `TreeNodesModel` skeleton is missing, duplicated or malformed.
//! 4. [`FailureCategory::UnsupportedNode`]: a node, parameter or declaration
//!    falls outside the whitelist.

mod parse;
mod serialize;
mod whitelist;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{classify_failure, parse_document, Classification};
pub use serialize::{serialize_tree, SerializeError};
pub use whitelist::{
    default_whitelist, NodeSpec, NodeWhitelist, ParamValues, WhitelistError, DEFAULT_COLORS,
};

/// Identifier written into `main_tree_to_execute` and `BehaviorTree ID`.
pub const DEFAULT_TREE_ID: &str = "MainTree";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Sequence,
    Fallback,
    ActionLeaf,
    ConditionLeaf,
}

impl NodeKind {
    pub fn is_control(self) -> bool {
        matches!(self, NodeKind::Sequence | NodeKind::Fallback)
    }

    pub fn is_leaf(self) -> bool {
        !self.is_control()
    }

    /// Element tag of a control node, `None` for leaves.
    pub fn control_tag(self) -> Option<&'static str> {
        match self {
            NodeKind::Sequence => Some("Sequence"),
            NodeKind::Fallback => Some("Fallback"),
            _ => None,
        }
    }

    pub fn leaf_kind(self) -> Option<LeafKind> {
        match self {
            NodeKind::ActionLeaf => Some(LeafKind::Action),
            NodeKind::ConditionLeaf => Some(LeafKind::Condition),
            _ => None,
        }
    }
}

/// The two kinds a `TreeNodesModel` entry may declare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeafKind {
    Action,
    Condition,
}

impl LeafKind {
    pub fn tag(self) -> &'static str {
        match self {
            LeafKind::Action => "Action",
            LeafKind::Condition => "Condition",
        }
    }

    pub fn node_kind(self) -> NodeKind {
        match self {
            LeafKind::Action => NodeKind::ActionLeaf,
            LeafKind::Condition => NodeKind::ConditionLeaf,
        }
    }
}

impl fmt::Display for LeafKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A single node. Control nodes carry their tag as `name` and no params.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BtNode {
    pub kind: NodeKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<BtNode>,
}

impl BtNode {
    pub fn sequence(children: Vec<BtNode>) -> Self {
        Self::control(NodeKind::Sequence, children)
    }

    pub fn fallback(children: Vec<BtNode>) -> Self {
        Self::control(NodeKind::Fallback, children)
    }

    fn control(kind: NodeKind, children: Vec<BtNode>) -> Self {
        BtNode {
            kind,
            name: kind.control_tag().unwrap_or_default().to_string(),
            params: BTreeMap::new(),
            children,
        }
    }

    pub fn action(name: impl Into<String>) -> Self {
        Self::leaf(NodeKind::ActionLeaf, name)
    }

    pub fn condition(name: impl Into<String>) -> Self {
        Self::leaf(NodeKind::ConditionLeaf, name)
    }

    fn leaf(kind: NodeKind, name: impl Into<String>) -> Self {
        BtNode {
            kind,
            name: name.into(),
            params: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    /// Pre-order iterator over this node and its descendants.
    pub fn iter(&self) -> impl Iterator<Item = &BtNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BtNode> {
        self.iter().filter(|n| n.kind.is_leaf())
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(BtNode::depth).max().unwrap_or(0)
    }
}

/// One `TreeNodesModel` entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub kind: LeafKind,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorTree {
    pub tree_id: String,
    pub root_node: BtNode,
    pub declared_model: Vec<Declaration>,
}

impl BehaviorTree {
    /// Builds a tree whose model declares each distinct leaf once, in order
    /// of first appearance.
    pub fn new(root_node: BtNode) -> Self {
        let mut declared_model: Vec<Declaration> = Vec::new();
        for leaf in root_node.leaves() {
            let Some(kind) = leaf.kind.leaf_kind() else { continue };
            if !declared_model.iter().any(|d| d.name == leaf.name) {
                declared_model.push(Declaration {
                    kind,
                    name: leaf.name.clone(),
                });
            }
        }
        BehaviorTree {
            tree_id: DEFAULT_TREE_ID.to_string(),
            root_node,
            declared_model,
        }
    }

    pub fn declared_kind(&self, name: &str) -> Option<LeafKind> {
        self.declared_model
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.kind)
    }

    /// Leaf names in pre-order, repeats included.
    pub fn leaf_names(&self) -> Vec<&str> {
        self.root_node.leaves().map(|n| n.name.as_str()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCategory {
    NonXml,
    MalformedXml,
    IncompleteStructure,
    UnsupportedNode,
}

impl FailureCategory {
    /// All categories in precedence order.
    pub const ALL: [FailureCategory; 4] = [
        FailureCategory::NonXml,
        FailureCategory::MalformedXml,
        FailureCategory::IncompleteStructure,
        FailureCategory::UnsupportedNode,
    ];

    /// 1-based position in the precedence order; also the CLI exit code.
    pub fn code(self) -> u8 {
        match self {
            FailureCategory::NonXml => 1,
            FailureCategory::MalformedXml => 2,
            FailureCategory::IncompleteStructure => 3,
            FailureCategory::UnsupportedNode => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FailureCategory::NonXml => "non-xml",
            FailureCategory::MalformedXml => "malformed-xml",
            FailureCategory::IncompleteStructure => "incomplete-structure",
            FailureCategory::UnsupportedNode => "unsupported-node",
        }
    }
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// 1-based line and column in the original text.
    Position { line: u32, column: u32 },
    /// Slash-separated element path, e.g. `/root/BehaviorTree/Sequence[0]`.
    Path(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Position { line, column } => write!(f, "{line}:{column}"),
            Location::Path(p) => f.write_str(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub category: Option<FailureCategory>,
    pub diagnostics: Vec<Diagnostic>,
    pub tree: Option<BehaviorTree>,
}

impl ValidationReport {
    pub(crate) fn accepted(tree: BehaviorTree) -> Self {
        ValidationReport {
            verdict: Verdict::Accepted,
            category: None,
            diagnostics: Vec::new(),
            tree: Some(tree),
        }
    }

    pub(crate) fn rejected(category: FailureCategory, diagnostics: Vec<Diagnostic>) -> Self {
        debug_assert!(!diagnostics.is_empty());
        ValidationReport {
            verdict: Verdict::Rejected,
            category: Some(category),
            diagnostics,
            tree: None,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    pub fn classification(&self) -> Classification {
        match self.category {
            None => Classification::Accepted,
            Some(c) => Classification::Rejected(c),
        }
    }
}
