//! Seeded fuzz inputs and random trees for the parser gate.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmcommand_core::{
    classify_failure, parse_document, serialize_tree, BehaviorTree, BtNode, Classification, NodeKind,
    NodeWhitelist,
};

const CONDITIONS: [&str; 5] = ["ObstacleDetected", "TargetDetected", "PathClear", "GoalFound", "TargetReached"];
const ACTIONS: [&str; 8] = [
    "Wander",
    "AvoidObstacle",
    "ChangeColor",
    "ApproachTarget",
    "FormLine",
    "AlignWithSwarm",
    "FreezeMovement",
    "FindGoal",
];
const COLORS: [&str; 5] = ["red", "green", "blue", "yellow", "white"];

/// Fragments spliced into valid documents by the mutator.
const SPLICES: [&str; 16] = [
    "<", ">", "/", "\"", "=", "&", "&amp;", "<!--", "-->", "<Sequence>", "</Fallback>", "<LaunchRocket/>",
    "color=\"purple\"", "Sure! ", "\u{0}", "\u{feff}",
];

pub fn random_leaf(rng: &mut impl Rng) -> BtNode {
    if rng.random_bool(0.4) {
        BtNode::condition(*CONDITIONS.choose(rng).unwrap())
    } else {
        let name = *ACTIONS.choose(rng).unwrap();
        let leaf = BtNode::action(name);
        if name == "ChangeColor" {
            leaf.with_param("color", *COLORS.choose(rng).unwrap())
        } else {
            leaf
        }
    }
}

/// Random whitelisted tree of the given maximum depth and fan-out.
pub fn random_tree(rng: &mut impl Rng, depth: usize, width: usize) -> BtNode {
    if depth <= 1 || rng.random_bool(0.3) {
        return random_leaf(rng);
    }
    let n = rng.random_range(1..=width);
    let children = (0..n).map(|_| random_tree(rng, depth - 1, width)).collect();
    if rng.random_bool(0.5) {
        BtNode::sequence(children)
    } else {
        BtNode::fallback(children)
    }
}

fn mutate(rng: &mut impl Rng, text: &str) -> String {
    let mut bytes = text.as_bytes().to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let pos = rng.random_range(0..=bytes.len());
        match rng.random_range(0..4) {
            0 if pos < bytes.len() => {
                bytes.remove(pos);
            }
            1 if pos < bytes.len() => bytes[pos] = rng.random(),
            2 => {
                let s = SPLICES.choose(rng).unwrap().as_bytes();
                bytes.splice(pos..pos, s.iter().copied());
            }
            _ => {
                let end = (pos + rng.random_range(0..40)).min(bytes.len());
                bytes.drain(pos..end);
            }
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Case `i` of the fuzz set: random bytes for even i, a mutated valid
/// document for odd i.
pub fn fuzz_case(seed: u64, i: u64, wl: &NodeWhitelist) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    if i % 2 == 0 {
        let len = rng.random_range(0..200);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    } else {
        let tree = BehaviorTree::new(random_tree(&mut rng, 4, 3));
        let xml = serialize_tree(&tree, wl).expect("random trees are whitelisted");
        mutate(&mut rng, &xml)
    }
}

/// Independent re-check of an accepted tree against the published default
/// vocabulary.
pub fn leaf_is_sound(node: &BtNode) -> bool {
    match node.kind {
        NodeKind::Sequence | NodeKind::Fallback => {
            !node.children.is_empty() && node.params.is_empty() && node.children.iter().all(leaf_is_sound)
        }
        NodeKind::ConditionLeaf => CONDITIONS.contains(&node.name.as_str()) && node.params.is_empty(),
        NodeKind::ActionLeaf => {
            ACTIONS.contains(&node.name.as_str())
                && node.children.is_empty()
                && if node.name == "ChangeColor" {
                    node.params.len() == 1 && node.params.get("color").is_some_and(|c| COLORS.contains(&c.as_str()))
                } else {
                    node.params.is_empty()
                }
        }
    }
}

#[derive(Debug, Default)]
pub struct FuzzSummary {
    pub cases: u64,
    pub accepted: u64,
    pub violations: Vec<String>,
}

/// Runs `cases` fuzz inputs, recording every broken report invariant.
/// A panic inside the parser propagates to the caller.
pub fn fuzz(seed: u64, cases: u64, wl: &NodeWhitelist) -> FuzzSummary {
    let mut summary = FuzzSummary::default();
    for i in 0..cases {
        let text = fuzz_case(seed, i, wl);
        let report = parse_document(&text, wl);
        summary.cases += 1;
        let accepted = report.is_accepted();
        let consistent = accepted == report.category.is_none() && accepted == report.tree.is_some();
        if !consistent {
            summary.violations.push(format!("case {i}: verdict/category/tree disagree"));
        }
        if !accepted && report.diagnostics.is_empty() {
            summary.violations.push(format!("case {i}: rejection without diagnostics"));
        }
        let expected = match report.category {
            None => Classification::Accepted,
            Some(c) => Classification::Rejected(c),
        };
        if classify_failure(&text, wl) != expected {
            summary.violations.push(format!("case {i}: classify_failure disagrees"));
        }
        if parse_document(&text, wl) != report {
            summary.violations.push(format!("case {i}: nondeterministic report"));
        }
        if let Some(tree) = &report.tree {
            summary.accepted += 1;
            if !leaf_is_sound(&tree.root_node) {
                summary.violations.push(format!("case {i}: accepted tree fails the independent walker"));
            }
        }
    }
    summary
}
