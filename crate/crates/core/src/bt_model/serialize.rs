use std::fmt::Write as _;

use thiserror::Error;

use super::{BehaviorTree, BtNode, NodeKind, NodeWhitelist};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SerializeError {
    #[error("leaf `{0}` is not whitelisted")]
    NotWhitelisted(String),
    #[error("leaf `{name}` has kind {found:?} but the whitelist says {expected:?}")]
    KindMismatch {
        name: String,
        found: NodeKind,
        expected: NodeKind,
    },
    #[error("leaf `{0}` is not declared in the tree model")]
    Undeclared(String),
    #[error("leaf `{name}` is declared with the wrong kind")]
    DeclarationKind { name: String },
    #[error("{0}")]
    IllegalParams(String),
    #[error("control node `{0}` has no children")]
    EmptyControl(String),
    #[error("leaf `{0}` has children")]
    LeafWithChildren(String),
    #[error("control node `{0}` carries parameters")]
    ControlParams(String),
    #[error("tree id is empty")]
    EmptyTreeId,
}

/// Writes the canonical wire form: two-space indentation, parameters in key
/// order, model entries in stored order, trailing newline.
pub fn serialize_tree(tree: &BehaviorTree, whitelist: &NodeWhitelist) -> Result<String, SerializeError> {
    check(tree, whitelist)?;

    let id = escape(&tree.tree_id);
    let mut out = String::new();
    let _ = writeln!(out, "<root main_tree_to_execute=\"{id}\">");
    let _ = writeln!(out, "  <BehaviorTree ID=\"{id}\">");
    write_node(&mut out, &tree.root_node, 2);
    out.push_str("  </BehaviorTree>\n");
    out.push_str("  <TreeNodesModel>\n");
    for decl in &tree.declared_model {
        let _ = writeln!(out, "    <{} ID=\"{}\"/>", decl.kind.tag(), escape(&decl.name));
    }
    out.push_str("  </TreeNodesModel>\n");
    out.push_str("</root>\n");
    Ok(out)
}

fn write_node(out: &mut String, node: &BtNode, depth: usize) {
    let indent = "  ".repeat(depth);
    match node.kind.control_tag() {
        Some(tag) => {
            let _ = writeln!(out, "{indent}<{tag}>");
            for child in &node.children {
                write_node(out, child, depth + 1);
            }
            let _ = writeln!(out, "{indent}</{tag}>");
        }
        None => {
            let _ = write!(out, "{indent}<{}", node.name);
            for (key, value) in &node.params {
                let _ = write!(out, " {key}=\"{}\"", escape(value));
            }
            out.push_str("/>\n");
        }
    }
}

fn check(tree: &BehaviorTree, whitelist: &NodeWhitelist) -> Result<(), SerializeError> {
    if tree.tree_id.is_empty() {
        return Err(SerializeError::EmptyTreeId);
    }
    for node in tree.root_node.iter() {
        if let Some(tag) = node.kind.control_tag() {
            if node.children.is_empty() {
                return Err(SerializeError::EmptyControl(tag.into()));
            }
            if !node.params.is_empty() {
                return Err(SerializeError::ControlParams(tag.into()));
            }
            continue;
        }
        if !node.children.is_empty() {
            return Err(SerializeError::LeafWithChildren(node.name.clone()));
        }
        let (kind, spec) = whitelist
            .lookup(&node.name)
            .ok_or_else(|| SerializeError::NotWhitelisted(node.name.clone()))?;
        if kind.node_kind() != node.kind {
            return Err(SerializeError::KindMismatch {
                name: node.name.clone(),
                found: node.kind,
                expected: kind.node_kind(),
            });
        }
        let problems = spec.check_params(node.params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        if !problems.is_empty() {
            return Err(SerializeError::IllegalParams(problems.join("; ")));
        }
        match tree.declared_kind(&node.name) {
            None => return Err(SerializeError::Undeclared(node.name.clone())),
            Some(declared) if declared != kind => {
                return Err(SerializeError::DeclarationKind {
                    name: node.name.clone(),
                })
            }
            Some(_) => {}
        }
    }
    for decl in &tree.declared_model {
        match whitelist.kind_of(&decl.name) {
            Some(kind) if kind == decl.kind => {}
            Some(_) => return Err(SerializeError::DeclarationKind { name: decl.name.clone() }),
            None => return Err(SerializeError::NotWhitelisted(decl.name.clone())),
        }
    }
    Ok(())
}

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}
