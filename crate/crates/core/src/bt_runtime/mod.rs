//! Tick interpreter for validated behavior trees.
//!
//! `Sequence` keeps memory: while a child is `Running` the next tick resumes
//! at that child and earlier children are not re-ticked. `Fallback` is
//! reactive: every tick starts from its first child, so a guard placed before
//! a long-running child (`Fallback[TargetDetected, Wander]`) is re-checked
//! each tick. A running child that is overtaken by an earlier one is halted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt_model::{BehaviorTree, BtNode, NodeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuntimeFault {
    #[error("no behavior bound to leaf `{0}`")]
    UnknownLeaf(String),
    #[error("condition `{0}` returned Running")]
    ConditionRunning(String),
    #[error("leaf `{name}`: {message}")]
    BadParams { name: String, message: String },
    #[error("tick budget must be at least 1")]
    ZeroBudget,
}

pub type Params = BTreeMap<String, String>;

/// Leaf behaviors supplied by whatever the tree drives.
pub trait LeafBinding {
    type World;

    fn tick_action(
        &mut self,
        name: &str,
        params: &Params,
        world: &mut Self::World,
    ) -> Result<TickStatus, RuntimeFault>;

    /// Must resolve instantly; `Running` is reported as a fault.
    fn tick_condition(
        &mut self,
        name: &str,
        params: &Params,
        world: &mut Self::World,
    ) -> Result<TickStatus, RuntimeFault>;

    /// Called when a running action is preempted.
    fn halt_action(&mut self, _name: &str, _world: &mut Self::World) {}
}

/// A world that moves forward one step after every tick.
pub trait Advance {
    fn advance(&mut self);
}

impl Advance for () {
    fn advance(&mut self) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    /// The root returned `Success` or `Failure`.
    Resolved(TickStatus),
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub ticks_used: u64,
}

#[derive(Debug)]
struct FlatNode {
    kind: NodeKind,
    name: String,
    params: Params,
    children: Vec<usize>,
}

/// Executes one tree against one binding. Single-threaded; owns its memory.
pub struct TreeExecutor<B> {
    tree: BehaviorTree,
    nodes: Vec<FlatNode>,
    /// Per control node: index of the child that returned `Running` last tick.
    memory: Vec<Option<usize>>,
    binding: B,
    ticks: u64,
}

impl<B: LeafBinding> TreeExecutor<B> {
    /// The tree is expected to have passed the validation gate.
    pub fn new(tree: BehaviorTree, binding: B) -> Self {
        let mut nodes = Vec::new();
        flatten(&tree.root_node, &mut nodes);
        let memory = vec![None; nodes.len()];
        TreeExecutor {
            tree,
            nodes,
            memory,
            binding,
            ticks: 0,
        }
    }

    pub fn tree(&self) -> &BehaviorTree {
        &self.tree
    }

    pub fn binding(&self) -> &B {
        &self.binding
    }

    pub fn binding_mut(&mut self) -> &mut B {
        &mut self.binding
    }

    /// Ticks performed so far.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// True while some control node is waiting on a running child.
    pub fn is_mid_run(&self) -> bool {
        self.memory.iter().any(Option::is_some)
    }

    pub fn tick(&mut self, world: &mut B::World) -> Result<TickStatus, RuntimeFault> {
        self.ticks += 1;
        let result = self.tick_node(0, world);
        if result.is_err() {
            self.memory.iter_mut().for_each(|m| *m = None);
        }
        result
    }

    /// Halts every running branch and clears all memory.
    pub fn halt(&mut self, world: &mut B::World) {
        self.halt_node(0, world);
    }

    /// Ticks once per world step until the root resolves or the budget is
    /// spent.
    pub fn run_to_completion(
        &mut self,
        world: &mut B::World,
        max_ticks: u64,
    ) -> Result<RunReport, RuntimeFault>
    where
        B::World: Advance,
    {
        if max_ticks == 0 {
            return Err(RuntimeFault::ZeroBudget);
        }
        for used in 1..=max_ticks {
            let status = self.tick(world)?;
            world.advance();
            if status != TickStatus::Running {
                return Ok(RunReport {
                    outcome: RunOutcome::Resolved(status),
                    ticks_used: used,
                });
            }
        }
        Ok(RunReport {
            outcome: RunOutcome::Timeout,
            ticks_used: max_ticks,
        })
    }

    fn tick_node(&mut self, idx: usize, world: &mut B::World) -> Result<TickStatus, RuntimeFault> {
        match self.nodes[idx].kind {
            NodeKind::Sequence => self.tick_sequence(idx, world),
            NodeKind::Fallback => self.tick_fallback(idx, world),
            NodeKind::ActionLeaf => {
                let node = &self.nodes[idx];
                self.binding.tick_action(&node.name, &node.params, world)
            }
            NodeKind::ConditionLeaf => {
                let node = &self.nodes[idx];
                match self.binding.tick_condition(&node.name, &node.params, world)? {
                    TickStatus::Running => Err(RuntimeFault::ConditionRunning(node.name.clone())),
                    status => Ok(status),
                }
            }
        }
    }

    fn tick_sequence(&mut self, idx: usize, world: &mut B::World) -> Result<TickStatus, RuntimeFault> {
        let start = self.memory[idx].take().unwrap_or(0);
        for pos in start..self.nodes[idx].children.len() {
            let child = self.nodes[idx].children[pos];
            match self.tick_node(child, world)? {
                TickStatus::Success => continue,
                TickStatus::Failure => return Ok(TickStatus::Failure),
                TickStatus::Running => {
                    self.memory[idx] = Some(pos);
                    return Ok(TickStatus::Running);
                }
            }
        }
        Ok(TickStatus::Success)
    }

    fn tick_fallback(&mut self, idx: usize, world: &mut B::World) -> Result<TickStatus, RuntimeFault> {
        let previous = self.memory[idx].take();
        for pos in 0..self.nodes[idx].children.len() {
            let child = self.nodes[idx].children[pos];
            let status = self.tick_node(child, world)?;
            if status == TickStatus::Failure {
                continue;
            }
            if let Some(prev) = previous.filter(|&p| p > pos) {
                let stale = self.nodes[idx].children[prev];
                self.halt_node(stale, world);
            }
            if status == TickStatus::Running {
                self.memory[idx] = Some(pos);
            }
            return Ok(status);
        }
        Ok(TickStatus::Failure)
    }

    fn halt_node(&mut self, idx: usize, world: &mut B::World) {
        match self.nodes[idx].kind {
            NodeKind::ActionLeaf => self.binding.halt_action(&self.nodes[idx].name, world),
            NodeKind::ConditionLeaf => {}
            NodeKind::Sequence | NodeKind::Fallback => {
                if let Some(pos) = self.memory[idx].take() {
                    let child = self.nodes[idx].children[pos];
                    self.halt_node(child, world);
                }
            }
        }
    }
}

fn flatten(node: &BtNode, out: &mut Vec<FlatNode>) -> usize {
    let idx = out.len();
    out.push(FlatNode {
        kind: node.kind,
        name: node.name.clone(),
        params: node.params.clone(),
        children: Vec::new(),
    });
    let children = node.children.iter().map(|c| flatten(c, out)).collect();
    out[idx].children = children;
    idx
}
