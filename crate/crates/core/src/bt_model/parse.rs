use std::collections::BTreeMap;

use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};

use super::{
    BehaviorTree, BtNode, Declaration, Diagnostic, FailureCategory, LeafKind, Location, NodeKind,
    NodeWhitelist, ValidationReport, DEFAULT_TREE_ID,
};

/// Deepest element nesting accepted inside a document.
pub const MAX_NESTING: usize = 64;

/// Upper bound on parsed XML nodes; keeps hostile inputs cheap.
const NODES_LIMIT: u32 = 50_000;

/// Nesting beyond this is refused before the recursive XML parser runs.
const SCAN_DEPTH_LIMIT: usize = 128;

const ROOT_ATTRIBUTES: [&str; 2] = ["main_tree_to_execute", "BTCPP_format"];

/// Outcome of the gate without the diagnostics or the tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Accepted,
    Rejected(FailureCategory),
}

/// Same decision procedure as [`parse_document`], reduced to its outcome.
pub fn classify_failure(text: &str, whitelist: &NodeWhitelist) -> Classification {
    parse_document(text, whitelist).classification()
}

/// Runs the full gate over raw model output. Never panics; every failure is
/// reported through the returned [`ValidationReport`].
pub fn parse_document(text: &str, whitelist: &NodeWhitelist) -> ValidationReport {
    let locator = Locator::new(text);
    let body = locator.body;

    if let Err(diag) = check_envelope(text, &locator) {
        return ValidationReport::rejected(FailureCategory::NonXml, vec![diag]);
    }

    if lexical_depth(body) > SCAN_DEPTH_LIMIT {
        let diag = Diagnostic {
            location: locator.map(1, 1),
            message: format!("element nesting exceeds the parser limit of {SCAN_DEPTH_LIMIT}"),
        };
        return ValidationReport::rejected(FailureCategory::MalformedXml, vec![diag]);
    }

    let options = ParsingOptions {
        allow_dtd: true,
        nodes_limit: NODES_LIMIT,
    };
    let doc = match Document::parse_with_options(body, options) {
        Ok(doc) => doc,
        Err(err) => {
            let pos = err.pos();
            let diag = Diagnostic {
                location: locator.map(pos.row, pos.col),
                message: err.to_string(),
            };
            return ValidationReport::rejected(FailureCategory::MalformedXml, vec![diag]);
        }
    };

    let skeleton = match check_structure(&doc, &locator) {
        Ok(skeleton) => skeleton,
        Err(diags) => return ValidationReport::rejected(FailureCategory::IncompleteStructure, diags),
    };

    let diags = check_legality(&skeleton, whitelist, &locator);
    if !diags.is_empty() {
        return ValidationReport::rejected(FailureCategory::UnsupportedNode, diags);
    }

    ValidationReport::accepted(build_tree(&skeleton, whitelist))
}

/// Maps positions in the trimmed body back onto the caller's text.
struct Locator<'t> {
    body: &'t str,
    lead_lines: u32,
    lead_columns: u32,
}

impl<'t> Locator<'t> {
    fn new(text: &'t str) -> Self {
        let without_bom = text.strip_prefix('\u{feff}').unwrap_or(text);
        let body = without_bom.trim_matches(is_xml_space);
        let lead = &text[..text.len() - without_bom.trim_start_matches(is_xml_space).len()];
        let lead_lines = lead.matches('\n').count() as u32;
        let tail = lead.rsplit('\n').next().unwrap_or("");
        Locator {
            body,
            lead_lines,
            lead_columns: tail.chars().count() as u32,
        }
    }

    fn map(&self, row: u32, col: u32) -> Location {
        let (line, column) = if row <= 1 {
            (self.lead_lines + 1, self.lead_columns + col)
        } else {
            (self.lead_lines + row, col)
        };
        Location::Position { line, column }
    }

    fn at(&self, doc: &Document, node: Node) -> Location {
        let pos = doc.text_pos_at(node.range().start);
        self.map(pos.row, pos.col)
    }
}

fn is_xml_space(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\r' | '\n')
}

/// Zero-prose rule: the trimmed text must start and end as markup and contain
/// at least one element start tag.
fn check_envelope(text: &str, locator: &Locator) -> Result<(), Diagnostic> {
    let body = locator.body;
    let start = locator.map(1, 1);
    if body.is_empty() {
        return Err(Diagnostic {
            location: start,
            message: "output is empty".into(),
        });
    }
    if !body.starts_with('<') {
        return Err(Diagnostic {
            location: start,
            message: "text precedes the XML document".into(),
        });
    }
    if !body.ends_with('>') {
        let line = text.trim_end_matches(is_xml_space).matches('\n').count() as u32 + 1;
        return Err(Diagnostic {
            location: Location::Position { line, column: 1 },
            message: "text follows the XML document".into(),
        });
    }
    let has_element = body
        .split('<')
        .skip(1)
        .any(|rest| rest.starts_with(|c: char| c.is_alphabetic() || c == '_' || c == ':'));
    if !has_element {
        return Err(Diagnostic {
            location: start,
            message: "no XML element found".into(),
        });
    }
    Ok(())
}

/// Upper estimate of element nesting from a single pass over the markup.
/// Comments, CDATA, processing instructions and doctype blocks are skipped;
/// scanning stops at the first unterminated construct.
fn lexical_depth(body: &str) -> usize {
    fn skip_past(bytes: &[u8], from: usize, end: &[u8]) -> Option<usize> {
        bytes[from..]
            .windows(end.len())
            .position(|w| w == end)
            .map(|p| from + p + end.len())
    }

    let bytes = body.as_bytes();
    let (mut i, mut depth, mut deepest) = (0, 0usize, 0usize);
    while let Some(offset) = bytes[i..].iter().position(|&b| b == b'<') {
        i += offset;
        let rest = &bytes[i..];
        let next = if rest.starts_with(b"<!--") {
            skip_past(bytes, i + 4, b"-->")
        } else if rest.starts_with(b"<![CDATA[") {
            skip_past(bytes, i + 9, b"]]>")
        } else if rest.starts_with(b"<?") {
            skip_past(bytes, i + 2, b"?>")
        } else if rest.starts_with(b"<!") {
            let mut brackets = 0i32;
            let mut quote = None;
            let mut end = None;
            for (j, &b) in bytes.iter().enumerate().skip(i + 2) {
                match (quote, b) {
                    (Some(q), _) if b == q => quote = None,
                    (Some(_), _) => {}
                    (None, b'"' | b'\'') => quote = Some(b),
                    (None, b'[') => brackets += 1,
                    (None, b']') => brackets -= 1,
                    (None, b'>') if brackets <= 0 => {
                        end = Some(j + 1);
                        break;
                    }
                    _ => {}
                }
            }
            end
        } else {
            let closing = rest.starts_with(b"</");
            let mut quote = None;
            let mut end = None;
            for (j, &b) in bytes.iter().enumerate().skip(i + 1) {
                match (quote, b) {
                    (Some(q), _) if b == q => quote = None,
                    (Some(_), _) => {}
                    (None, b'"' | b'\'') => quote = Some(b),
                    (None, b'>') => {
                        end = Some(j + 1);
                        break;
                    }
                    _ => {}
                }
            }
            if let Some(end) = end {
                if closing {
                    depth = depth.saturating_sub(1);
                } else if bytes[end - 2] != b'/' {
                    depth += 1;
                    deepest = deepest.max(depth);
                }
            }
            end
        };
        match next {
            Some(n) => i = n,
            None => break,
        }
    }
    deepest
}

struct Skeleton<'a, 'i> {
    doc: &'a Document<'i>,
    tree_id: String,
    top: Node<'a, 'i>,
    model: Node<'a, 'i>,
    declared: Vec<(Node<'a, 'i>, Declaration)>,
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(Node::is_element)
}

fn stray_text<'a, 'i>(node: Node<'a, 'i>) -> Option<Node<'a, 'i>> {
    node.children()
        .find(|c| c.is_text() && c.text().is_some_and(|t| !t.trim_matches(is_xml_space).is_empty()))
}

fn nesting_depth(root: Node) -> usize {
    let mut deepest = 0;
    let mut stack = vec![(root, 1usize)];
    while let Some((node, depth)) = stack.pop() {
        deepest = deepest.max(depth);
        if depth > MAX_NESTING {
            break;
        }
        stack.extend(elements(node).map(|c| (c, depth + 1)));
    }
    deepest
}

fn check_structure<'a, 'i>(
    doc: &'a Document<'i>,
    locator: &Locator,
) -> Result<Skeleton<'a, 'i>, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut push = |node: Node, message: String| {
        diags.push(Diagnostic {
            location: locator.at(doc, node),
            message,
        })
    };

    let root = doc.root_element();
    if root.tag_name().name() != "root" || root.tag_name().namespace().is_some() {
        push(
            root,
            format!("document element is `{}`, expected `root`", root.tag_name().name()),
        );
        return Err(diags);
    }
    if nesting_depth(root) > MAX_NESTING {
        push(root, format!("element nesting exceeds {MAX_NESTING} levels"));
        return Err(diags);
    }

    for attr in root.attributes() {
        if attr.namespace().is_some() || !ROOT_ATTRIBUTES.contains(&attr.name()) {
            push(root, format!("unexpected attribute `{}` on `root`", attr.name()));
        }
    }
    if let Some(text) = stray_text(root) {
        push(text, "unexpected text inside `root`".into());
    }

    let mut trees = Vec::new();
    let mut models = Vec::new();
    for child in elements(root) {
        match (child.tag_name().name(), child.tag_name().namespace()) {
            ("BehaviorTree", None) => trees.push(child),
            ("TreeNodesModel", None) => models.push(child),
            (other, _) => push(child, format!("unexpected element `{other}` inside `root`")),
        }
    }
    if trees.len() != 1 {
        push(
            root,
            format!("expected exactly one `BehaviorTree`, found {}", trees.len()),
        );
    }
    if models.len() != 1 {
        push(
            root,
            format!("expected exactly one `TreeNodesModel`, found {}", models.len()),
        );
    }

    let mut tree_id = DEFAULT_TREE_ID.to_string();
    let mut top = None;
    if let [bt] = trees[..] {
        for attr in bt.attributes() {
            if attr.name() != "ID" || attr.namespace().is_some() {
                push(bt, format!("unexpected attribute `{}` on `BehaviorTree`", attr.name()));
            }
        }
        match bt.attribute("ID") {
            Some("") => push(bt, "`BehaviorTree` has an empty `ID`".into()),
            Some(id) => tree_id = id.to_string(),
            None => {}
        }
        if let Some(main) = root.attribute("main_tree_to_execute") {
            if bt.attribute("ID") != Some(main) {
                push(
                    bt,
                    format!("`main_tree_to_execute` names `{main}` but no `BehaviorTree` has that ID"),
                );
            }
        }
        if let Some(text) = stray_text(bt) {
            push(text, "unexpected text inside `BehaviorTree`".into());
        }
        let nodes: Vec<_> = elements(bt).collect();
        match nodes[..] {
            [node] => top = Some(node),
            _ => push(
                bt,
                format!(
                    "`BehaviorTree` must contain exactly one top-level node, found {}",
                    nodes.len()
                ),
            ),
        }
        let mut stack: Vec<Node> = nodes;
        while let Some(node) = stack.pop() {
            if node.tag_name().namespace().is_some() {
                push(node, format!("namespaced element `{}` in tree", node.tag_name().name()));
            }
            if let Some(text) = stray_text(node) {
                push(text, format!("unexpected text inside `{}`", node.tag_name().name()));
            }
            let children: Vec<_> = elements(node).collect();
            if children.is_empty() && matches!(node.tag_name().name(), "Sequence" | "Fallback") {
                push(
                    node,
                    format!("control node `{}` has no children", node.tag_name().name()),
                );
            }
            stack.extend(children.into_iter().rev());
        }
    }

    let mut declared = Vec::new();
    if let [model] = models[..] {
        if let Some(attr) = model.attributes().next() {
            push(model, format!("unexpected attribute `{}` on `TreeNodesModel`", attr.name()));
        }
        if let Some(text) = stray_text(model) {
            push(text, "unexpected text inside `TreeNodesModel`".into());
        }
        let mut kinds: BTreeMap<String, LeafKind> = BTreeMap::new();
        for entry in elements(model) {
            let kind = match entry.tag_name().name() {
                "Action" => LeafKind::Action,
                "Condition" => LeafKind::Condition,
                // Other declaration kinds are a legality question.
                _ => continue,
            };
            for attr in entry.attributes() {
                if attr.name() != "ID" || attr.namespace().is_some() {
                    push(entry, format!("unexpected attribute `{}` on `{kind}` declaration", attr.name()));
                }
            }
            if elements(entry).next().is_some() || stray_text(entry).is_some() {
                push(entry, format!("`{kind}` declaration must be empty"));
            }
            let id = match entry.attribute("ID") {
                Some(id) if !id.is_empty() => id,
                _ => {
                    push(entry, format!("`{kind}` declaration is missing `ID`"));
                    continue;
                }
            };
            match kinds.get(id) {
                Some(prev) if *prev != kind => push(
                    entry,
                    format!("`{id}` is declared both as {prev} and as {kind}"),
                ),
                _ => {
                    kinds.insert(id.to_string(), kind);
                }
            }
            declared.push((
                entry,
                Declaration {
                    kind,
                    name: id.to_string(),
                },
            ));
        }
    }

    match (diags.is_empty(), top, models.first()) {
        (true, Some(top), Some(&model)) => Ok(Skeleton {
            doc,
            tree_id,
            top,
            model,
            declared,
        }),
        _ => Err(diags),
    }
}

fn check_legality(skeleton: &Skeleton, whitelist: &NodeWhitelist, locator: &Locator) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let doc = skeleton.doc;
    let mut push = |node: Node, message: String| {
        diags.push(Diagnostic {
            location: locator.at(doc, node),
            message,
        })
    };

    let declared: BTreeMap<&str, LeafKind> = skeleton
        .declared
        .iter()
        .map(|(_, d)| (d.name.as_str(), d.kind))
        .collect();

    let mut stack = vec![skeleton.top];
    while let Some(node) = stack.pop() {
        let name = node.tag_name().name();
        let children: Vec<_> = elements(node).collect();
        if matches!(name, "Sequence" | "Fallback") {
            for attr in node.attributes() {
                push(node, format!("control node `{name}` does not accept attribute `{}`", attr.name()));
            }
        } else if !children.is_empty() {
            push(node, format!("unsupported control node `{name}`"));
        } else {
            match whitelist.lookup(name) {
                None => push(node, format!("unsupported node `{name}`")),
                Some((kind, spec)) => {
                    let params = node.attributes().map(|a| (a.name(), a.value()));
                    for problem in spec.check_params(params) {
                        push(node, problem);
                    }
                    match declared.get(name) {
                        None => push(node, format!("`{name}` is not declared in `TreeNodesModel`")),
                        Some(d) if *d != kind => push(
                            node,
                            format!("`{name}` is declared as {d} but is a whitelisted {}", kind.tag().to_lowercase()),
                        ),
                        Some(_) => {}
                    }
                }
            }
        }
        stack.extend(children.into_iter().rev());
    }

    for entry in elements(skeleton.model) {
        let tag = entry.tag_name().name();
        if !matches!(tag, "Action" | "Condition") {
            push(entry, format!("unsupported declaration kind `{tag}`"));
        }
    }
    for (entry, decl) in &skeleton.declared {
        match whitelist.kind_of(&decl.name) {
            None => push(*entry, format!("declared node `{}` is not whitelisted", decl.name)),
            Some(kind) if kind != decl.kind => push(
                *entry,
                format!("`{}` is declared as {} but is a whitelisted {}", decl.name, decl.kind, kind.tag().to_lowercase()),
            ),
            Some(_) => {}
        }
    }
    diags
}

fn build_tree(skeleton: &Skeleton, whitelist: &NodeWhitelist) -> BehaviorTree {
    BehaviorTree {
        tree_id: skeleton.tree_id.clone(),
        root_node: build_node(skeleton.top, whitelist),
        declared_model: skeleton.declared.iter().map(|(_, d)| d.clone()).collect(),
    }
}

fn build_node(node: Node, whitelist: &NodeWhitelist) -> BtNode {
    let name = node.tag_name().name();
    let kind = match name {
        "Sequence" => NodeKind::Sequence,
        "Fallback" => NodeKind::Fallback,
        _ => whitelist
            .kind_of(name)
            .map(LeafKind::node_kind)
            .unwrap_or(NodeKind::ActionLeaf),
    };
    BtNode {
        kind,
        name: name.to_string(),
        params: node
            .attributes()
            .map(|a| (a.name().to_string(), a.value().to_string()))
            .collect(),
        children: elements(node).map(|c| build_node(c, whitelist)).collect(),
    }
}
