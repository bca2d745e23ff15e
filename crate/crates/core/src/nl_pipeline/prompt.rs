use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt_model::{serialize_tree, BehaviorTree, BtNode, NodeSpec, NodeWhitelist, ParamValues};

pub const SYSTEM_INSTRUCTION: &str = "Generate only a valid XML behavior tree.";
pub const NODE_INSTRUCTION: &str = "Use only the listed actions and conditions.";
pub const FORMAT_SKELETON: &str = "<root> ... <BehaviorTree> ... </BehaviorTree>\n                 <TreeNodesModel> ... </TreeNodesModel> </root>";
pub const RESPONSE_INSTRUCTION: &str = "RESPONSE: XML only.";

/// Bumped whenever the example bank changes.
pub const EXAMPLE_BANK_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub instruction: String,
    pub tree_xml: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_instruction: String,
    pub allowed_nodes: String,
    pub format_skeleton: String,
    pub shots: Vec<PromptExample>,
    pub user_command: String,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("shots must be 0, 1 or 2 (got {0})")]
pub struct ShotsOutOfRange(pub u8);

fn render_spec(spec: &NodeSpec) -> String {
    if spec.params.is_empty() {
        return spec.name.clone();
    }
    let params: Vec<String> = spec
        .params
        .iter()
        .map(|(k, v)| match v {
            ParamValues::OneOf(values) => format!("{k}={}", values.join("|")),
            ParamValues::Free(_) => format!("{k}=<text>"),
        })
        .collect();
    format!("{}({})", spec.name, params.join(", "))
}

/// `ACTIONS: …` and `CONDITIONS: …` lines naming every whitelisted leaf.
pub fn render_whitelist(whitelist: &NodeWhitelist) -> String {
    let join = |specs: &[NodeSpec]| specs.iter().map(render_spec).collect::<Vec<_>>().join(", ");
    format!(
        "ACTIONS: {}\nCONDITIONS: {}",
        join(whitelist.actions()),
        join(whitelist.conditions())
    )
}

/// The fixed two-entry bank, serialized against `whitelist`.
pub fn example_bank(whitelist: &NodeWhitelist) -> Vec<PromptExample> {
    let trees = [
        (
            "Wander until a target is detected, then approach it.",
            BtNode::sequence(vec![
                BtNode::fallback(vec![BtNode::condition("TargetDetected"), BtNode::action("Wander")]),
                BtNode::action("ApproachTarget"),
            ]),
        ),
        (
            "If the path is clear form a line, otherwise turn yellow.",
            BtNode::fallback(vec![
                BtNode::sequence(vec![BtNode::condition("PathClear"), BtNode::action("FormLine")]),
                BtNode::action("ChangeColor").with_param("color", "yellow"),
            ]),
        ),
    ];
    trees
        .into_iter()
        .filter_map(|(instruction, root)| {
            let tree_xml = serialize_tree(&BehaviorTree::new(root), whitelist).ok()?;
            Some(PromptExample {
                instruction: instruction.to_string(),
                tree_xml,
            })
        })
        .collect()
}

pub fn build_prompt(command: &str, shots: u8, whitelist: &NodeWhitelist) -> Result<PromptSpec, ShotsOutOfRange> {
    if shots > 2 {
        return Err(ShotsOutOfRange(shots));
    }
    let shots = example_bank(whitelist).into_iter().take(shots as usize).collect();
    Ok(PromptSpec {
        system_instruction: SYSTEM_INSTRUCTION.to_string(),
        allowed_nodes: render_whitelist(whitelist),
        format_skeleton: FORMAT_SKELETON.to_string(),
        shots,
        user_command: command.to_string(),
    })
}

impl PromptSpec {
    pub fn render(&self) -> String {
        let mut out = format!(
            "SYSTEM: {}\nINSTRUCTIONS: {}\n{}\nREQUIRED FORMAT: {}\n",
            self.system_instruction, NODE_INSTRUCTION, self.allowed_nodes, self.format_skeleton
        );
        for (i, ex) in self.shots.iter().enumerate() {
            out.push_str(&format!(
                "EXAMPLE {}:\nUSER COMMAND: {}\nRESPONSE:\n{}",
                i + 1,
                ex.instruction,
                ex.tree_xml
            ));
        }
        out.push_str(&format!("USER COMMAND: {}\n{}", self.user_command, RESPONSE_INSTRUCTION));
        out
    }
}
