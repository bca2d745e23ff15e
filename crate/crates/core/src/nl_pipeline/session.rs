use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::CommandMode;
use super::trace::{AuditLog, ExecutionStatus, PipelineTrace, Stage};
use super::{CommandInput, Pipeline};
use crate::bt_runtime::{Advance, TickStatus, TreeExecutor};
use crate::swarm_sim::{SwarmBinding, SwarmWorld};

pub const TRACE_RING_CAPACITY: usize = 256;

struct ActiveRun {
    executor: TreeExecutor<SwarmBinding>,
    trace: PipelineTrace,
}

/// One operator session: a world, at most one running tree, recent traces
/// and an optional audit log. Traces are written to the log once they reach
/// a terminal status.
pub struct Session {
    id: String,
    world: SwarmWorld,
    active: Option<ActiveRun>,
    queue: VecDeque<PipelineTrace>,
    finished: VecDeque<PipelineTrace>,
    audit: Option<AuditLog>,
    mode: CommandMode,
    max_ticks: u64,
    audit_errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub tick: u64,
    /// Trace that reached a terminal status during this step.
    pub finished: Option<PipelineTrace>,
    /// Trace started from the queue during this step.
    pub started: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopAck {
    pub session_id: String,
    pub was_running: bool,
    pub stopped_trace: Option<String>,
}

impl Session {
    pub fn new(id: impl Into<String>, world: SwarmWorld, mode: CommandMode, max_ticks: u64) -> Self {
        Session {
            id: id.into(),
            world,
            active: None,
            queue: VecDeque::new(),
            finished: VecDeque::new(),
            audit: None,
            mode,
            max_ticks: max_ticks.max(1),
            audit_errors: Vec::new(),
        }
    }

    pub fn with_audit(mut self, log: AuditLog) -> Self {
        self.audit = Some(log);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn world(&self) -> &SwarmWorld {
        &self.world
    }

    pub fn is_running(&self) -> bool {
        self.active.is_some()
    }

    pub fn audit_errors(&self) -> &[String] {
        &self.audit_errors
    }

    /// Finished traces (oldest first, bounded), then the running one, then
    /// queued ones.
    pub fn traces(&self) -> Vec<PipelineTrace> {
        self.finished
            .iter()
            .chain(self.active.as_ref().map(|a| &a.trace))
            .chain(self.queue.iter())
            .cloned()
            .collect()
    }

    pub fn trace(&self, trace_id: &str) -> Option<PipelineTrace> {
        self.traces().into_iter().find(|t| t.trace_id == trace_id)
    }

    /// Hands a prepared trace to the session. Rejected traces are recorded
    /// as NotExecuted; accepted trees start (or queue) per the command mode.
    /// Returns the trace as it stands afterwards.
    pub fn install(&mut self, mut trace: PipelineTrace) -> PipelineTrace {
        let tree = match trace.validation_report.as_ref().and_then(|r| r.tree.clone()) {
            Some(tree) if trace.is_accepted() => tree,
            _ => {
                trace.set_status(ExecutionStatus::NotExecuted);
                let snapshot = trace.clone();
                self.finish(trace);
                return snapshot;
            }
        };
        if self.active.is_some() {
            match self.mode {
                CommandMode::Preempt => {
                    let by = trace.trace_id.clone();
                    self.halt_active(&format!("preempted by {by}"));
                }
                CommandMode::Queue => {
                    self.queue.push_back(trace.clone());
                    return trace;
                }
            }
        }
        self.start(trace, tree)
    }

    fn start(&mut self, mut trace: PipelineTrace, tree: crate::bt_model::BehaviorTree) -> PipelineTrace {
        // A new command releases agents frozen by a previous stop.
        for agent in &mut self.world.agents {
            agent.frozen = false;
        }
        trace.set_status(ExecutionStatus::Running);
        let snapshot = trace.clone();
        self.active = Some(ActiveRun {
            executor: TreeExecutor::new(tree, SwarmBinding),
            trace,
        });
        snapshot
    }

    fn start_next_queued(&mut self) -> Option<String> {
        while let Some(trace) = self.queue.pop_front() {
            if let Some(tree) = trace.validation_report.as_ref().and_then(|r| r.tree.clone()) {
                let id = trace.trace_id.clone();
                self.start(trace, tree);
                return Some(id);
            }
        }
        None
    }

    /// One simulation step if a tree is running; the world stands still
    /// otherwise.
    pub fn step(&mut self) -> Option<StepOutcome> {
        let run = self.active.as_mut()?;
        let result = self.world.step(&mut run.executor);
        run.trace.ticks += 1;
        let status = match result {
            Ok(TickStatus::Running) if run.trace.ticks >= self.max_ticks => Some(ExecutionStatus::Timeout),
            Ok(TickStatus::Running) => None,
            Ok(TickStatus::Success) => Some(ExecutionStatus::Succeeded),
            Ok(TickStatus::Failure) => Some(ExecutionStatus::Failed),
            Err(fault) => {
                run.trace.error(Stage::Execute, fault.to_string());
                Some(ExecutionStatus::Failed)
            }
        };
        let mut outcome = StepOutcome {
            tick: self.world.tick,
            finished: None,
            started: None,
        };
        if let Some(status) = status {
            let mut run = self.active.take().expect("active run");
            if status == ExecutionStatus::Timeout {
                run.executor.halt(&mut self.world);
            }
            run.trace.set_status(status);
            outcome.finished = Some(run.trace.clone());
            self.finish(run.trace);
            outcome.started = self.start_next_queued();
        }
        Some(outcome)
    }

    /// Steps until no tree is running or `max_steps` have been taken.
    pub fn run_until_idle(&mut self, max_steps: u64) -> u64 {
        let mut steps = 0;
        while steps < max_steps && self.step().is_some() {
            steps += 1;
        }
        steps
    }

    /// Emergency stop: halts the running tree, freezes every agent and drops
    /// queued commands. The freeze takes one world tick, so observers see a
    /// fresh state. Idempotent; a no-op when nothing runs.
    pub fn stop(&mut self) -> StopAck {
        let stopped = self.halt_active("emergency stop");
        while let Some(mut t) = self.queue.pop_front() {
            t.error(Stage::Execute, "cancelled by emergency stop");
            self.finish(t);
        }
        if stopped.is_some() {
            self.world.set_all_frozen();
            self.world.advance();
        }
        StopAck {
            session_id: self.id.clone(),
            was_running: stopped.is_some(),
            stopped_trace: stopped,
        }
    }

    fn halt_active(&mut self, why: &str) -> Option<String> {
        let mut run = self.active.take()?;
        run.executor.halt(&mut self.world);
        run.trace.error(Stage::Execute, why);
        run.trace.set_status(ExecutionStatus::Stopped);
        let id = run.trace.trace_id.clone();
        self.finish(run.trace);
        Some(id)
    }

    fn finish(&mut self, trace: PipelineTrace) {
        if let Some(log) = self.audit.as_mut() {
            if let Err(e) = log.append(&trace) {
                self.audit_errors.push(e.to_string());
            }
        }
        if self.finished.len() == TRACE_RING_CAPACITY {
            self.finished.pop_front();
        }
        self.finished.push_back(trace);
    }
}

impl Drop for Session {
    /// Unfinished traces are still written so every command leaves a record.
    fn drop(&mut self) {
        let pending: Vec<_> = self.active.take().map(|a| a.trace).into_iter().chain(self.queue.drain(..)).collect();
        if let Some(log) = self.audit.as_mut() {
            for t in &pending {
                let _ = log.append(t);
            }
        }
    }
}

/// Prepares `input` with `pipeline` and installs the result in `session`.
pub fn handle_command(pipeline: &Pipeline, session: &mut Session, input: CommandInput) -> PipelineTrace {
    session.install(pipeline.prepare(input))
}
