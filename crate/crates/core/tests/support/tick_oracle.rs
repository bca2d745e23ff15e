//! Reference tick semantics, written directly over the recursive `BtNode`
//! structure with path-keyed memory, plus exhaustive tree enumeration.

use std::collections::HashMap;

use swarmcommand_core::bt_model::{BehaviorTree, BtNode, NodeKind};
use swarmcommand_core::bt_runtime::{LeafBinding, Params, RuntimeFault, TickStatus, TreeExecutor};

/// Closed-form single-tick result for trees whose leaves only succeed or fail.
pub fn truth_table(node: &BtNode, status_of: &dyn Fn(&str) -> TickStatus) -> TickStatus {
    match node.kind {
        NodeKind::Sequence => node
            .children
            .iter()
            .map(|c| truth_table(c, status_of))
            .find(|s| *s != TickStatus::Success)
            .unwrap_or(TickStatus::Success),
        NodeKind::Fallback => node
            .children
            .iter()
            .map(|c| truth_table(c, status_of))
            .find(|s| *s != TickStatus::Failure)
            .unwrap_or(TickStatus::Failure),
        _ => status_of(&node.name),
    }
}

/// Recursive interpreter with memoryful Sequence and reactive Fallback.
#[derive(Default)]
pub struct ReferenceInterpreter {
    memory: HashMap<Vec<usize>, usize>,
    pub ticked: Vec<usize>,
    pub halted: Vec<usize>,
}

impl ReferenceInterpreter {
    pub fn tick(&mut self, root: &BtNode, statuses: &[TickStatus]) -> TickStatus {
        self.visit(root, &mut Vec::new(), statuses)
    }

    pub fn is_mid_run(&self) -> bool {
        !self.memory.is_empty()
    }

    pub fn reset(&mut self) {
        self.memory.clear();
    }

    fn visit(
        &mut self,
        node: &BtNode,
        path: &mut Vec<usize>,
        statuses: &[TickStatus],
    ) -> TickStatus {
        match node.kind {
            NodeKind::ActionLeaf | NodeKind::ConditionLeaf => {
                let idx = leaf_index(&node.name).expect("labelled leaf");
                self.ticked.push(idx);
                statuses[idx]
            }
            NodeKind::Sequence => {
                let start = self.memory.remove(path).unwrap_or(0);
                for i in start..node.children.len() {
                    path.push(i);
                    let s = self.visit(&node.children[i], path, statuses);
                    path.pop();
                    match s {
                        TickStatus::Success => {}
                        TickStatus::Failure => return TickStatus::Failure,
                        TickStatus::Running => {
                            self.memory.insert(path.clone(), i);
                            return TickStatus::Running;
                        }
                    }
                }
                TickStatus::Success
            }
            NodeKind::Fallback => {
                let previous = self.memory.remove(path);
                for i in 0..node.children.len() {
                    path.push(i);
                    let s = self.visit(&node.children[i], path, statuses);
                    path.pop();
                    if s == TickStatus::Failure {
                        continue;
                    }
                    if let Some(p) = previous {
                        if p > i {
                            path.push(p);
                            self.halt(&node.children[p], path);
                            path.pop();
                        }
                    }
                    if s == TickStatus::Running {
                        self.memory.insert(path.clone(), i);
                    }
                    return s;
                }
                TickStatus::Failure
            }
        }
    }

    fn halt(&mut self, node: &BtNode, path: &mut Vec<usize>) {
        match node.kind {
            NodeKind::ActionLeaf => self.halted.extend(leaf_index(&node.name)),
            NodeKind::ConditionLeaf => {}
            _ => {
                if let Some(i) = self.memory.remove(path) {
                    path.push(i);
                    self.halt(&node.children[i], path);
                    path.pop();
                }
            }
        }
    }
}

/// Every Sequence/Fallback tree with at most `depth` levels and at most
/// `width` children per control node. Leaves are placeholders named `_`.
pub fn enumerate_shapes(depth: usize, width: usize) -> Vec<BtNode> {
    let mut shapes = vec![BtNode::action("_")];
    if depth <= 1 {
        return shapes;
    }
    let smaller = enumerate_shapes(depth - 1, width);
    for kind in [NodeKind::Sequence, NodeKind::Fallback] {
        let mut child_lists: Vec<Vec<BtNode>> = vec![Vec::new()];
        for _ in 0..width {
            child_lists = child_lists
                .iter()
                .flat_map(|prefix| {
                    smaller.iter().map(move |c| {
                        let mut next = prefix.clone();
                        next.push(c.clone());
                        next
                    })
                })
                .collect();
            for children in &child_lists {
                shapes.push(match kind {
                    NodeKind::Sequence => BtNode::sequence(children.clone()),
                    _ => BtNode::fallback(children.clone()),
                });
            }
        }
    }
    shapes
}

/// Renames placeholder leaves to `L0`, `L1`, … in pre-order; returns the count.
pub fn label_leaves(node: &mut BtNode, next: &mut usize) {
    if node.kind.is_leaf() {
        node.name = format!("L{next}");
        *next += 1;
    }
    for child in &mut node.children {
        label_leaves(child, next);
    }
}

/// Binding that reads the current status of leaf `L<i>` from slot `i`.
#[derive(Default)]
pub struct TableBinding {
    pub statuses: Vec<TickStatus>,
    pub ticked: Vec<usize>,
    pub halted: Vec<usize>,
}

fn leaf_index(name: &str) -> Option<usize> {
    name.strip_prefix('L')?.parse().ok()
}

impl LeafBinding for TableBinding {
    type World = ();

    fn tick_action(&mut self, name: &str, _: &Params, _: &mut ()) -> Result<TickStatus, RuntimeFault> {
        let idx = leaf_index(name).ok_or_else(|| RuntimeFault::UnknownLeaf(name.to_string()))?;
        self.ticked.push(idx);
        self.statuses
            .get(idx)
            .copied()
            .ok_or_else(|| RuntimeFault::UnknownLeaf(name.to_string()))
    }

    fn tick_condition(&mut self, name: &str, p: &Params, w: &mut ()) -> Result<TickStatus, RuntimeFault> {
        self.tick_action(name, p, w)
    }

    fn halt_action(&mut self, name: &str, _: &mut ()) {
        self.halted.extend(leaf_index(name));
    }
}

#[derive(Debug, Default)]
pub struct SweepSummary {
    pub shapes: usize,
    pub cases: usize,
    pub disagreements: Vec<String>,
}

/// Compares the executor with the reference over every shape and every
/// assignment of Success/Failure to the leaves, plus every assignment with a
/// single Running leaf followed by a second tick in which that leaf resolves
/// each way. Each case starts from cleared memory.
pub fn exhaustive_sweep(depth: usize, width: usize) -> SweepSummary {
    let mut summary = SweepSummary::default();
    for mut shape in enumerate_shapes(depth, width) {
        summary.shapes += 1;
        let mut leaves = 0;
        label_leaves(&mut shape, &mut leaves);
        let mut exec = TreeExecutor::new(BehaviorTree::new(shape.clone()), TableBinding::default());
        let mut reference = ReferenceInterpreter::default();

        for mask in 0u32..(1 << leaves) {
            let base: Vec<TickStatus> = (0..leaves)
                .map(|i| {
                    if mask & (1 << i) != 0 {
                        TickStatus::Success
                    } else {
                        TickStatus::Failure
                    }
                })
                .collect();

            summary.cases += 1;
            let expected = truth_table(&shape, &|n| base[leaf_index(n).unwrap()]);
            compare(&shape, &mut exec, &mut reference, &[&base], Some(expected), &mut summary);

            // Running placements: only leaves whose own bit is clear, so each
            // placement is visited once per assignment of the other leaves.
            for r in 0..leaves {
                if mask & (1 << r) != 0 {
                    continue;
                }
                let mut first = base.clone();
                first[r] = TickStatus::Running;
                for resolved in [TickStatus::Success, TickStatus::Failure] {
                    let mut second = base.clone();
                    second[r] = resolved;
                    summary.cases += 1;
                    compare(&shape, &mut exec, &mut reference, &[&first, &second], None, &mut summary);
                }
            }
        }
    }
    summary
}

fn compare(
    shape: &BtNode,
    exec: &mut TreeExecutor<TableBinding>,
    reference: &mut ReferenceInterpreter,
    ticks: &[&Vec<TickStatus>],
    closed_form: Option<TickStatus>,
    summary: &mut SweepSummary,
) {
    exec.binding_mut().halted.clear();
    reference.halted.clear();
    for (t, statuses) in ticks.iter().enumerate() {
        exec.binding_mut().statuses.clone_from(statuses);
        exec.binding_mut().ticked.clear();
        reference.ticked.clear();
        let got = exec.tick(&mut ());
        let want = reference.tick(shape, statuses);
        let mismatch = got != Ok(want)
            || exec.binding().ticked != reference.ticked
            || exec.binding().halted != reference.halted
            || (t == 0 && closed_form.is_some_and(|c| c != want));
        if mismatch {
            summary.disagreements.push(format!(
                "{shape:?} tick {t}: executor {got:?} {:?}, reference {want:?} {:?}",
                exec.binding().ticked,
                reference.ticked
            ));
        }
    }
    if exec.is_mid_run() || reference.is_mid_run() {
        summary
            .disagreements
            .push(format!("{shape:?}: memory not cleared after resolution"));
        exec.halt(&mut ());
        reference.reset();
    }
}
