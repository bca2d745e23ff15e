use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Agent, AgentColor, Boundary, Circle, SimError, SimParams, SwarmBinding, SwarmWorld, Vec2};
use crate::bt_model::{default_whitelist, parse_document, BehaviorTree};
use crate::bt_runtime::{RunOutcome, RuntimeFault, TreeExecutor};

pub const SCENARIO_IDS: [u8; 5] = [1, 2, 3, 4, 5];

/// Default seed for scenario runs and regression fixtures.
pub const DEFAULT_SEED: u64 = 42;

/// Tick budget within which every reference tree must succeed.
pub const TICK_BUDGET: u64 = 2000;

const SOURCES: [(&str, &str); 5] = [
    (include_str!("../../scenarios/s1.json"), include_str!("../../scenarios/s1.xml")),
    (include_str!("../../scenarios/s2.json"), include_str!("../../scenarios/s2.xml")),
    (include_str!("../../scenarios/s3.json"), include_str!("../../scenarios/s3.xml")),
    (include_str!("../../scenarios/s4.json"), include_str!("../../scenarios/s4.xml")),
    (include_str!("../../scenarios/s5.json"), include_str!("../../scenarios/s5.xml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario id {0} (expected 1..=5)")]
    UnknownId(u8),
    #[error("scenario definition: {0}")]
    Definition(#[from] serde_json::Error),
    #[error("reference tree rejected: {0}")]
    Tree(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Runtime(#[from] RuntimeFault),
}

/// Agents spawned uniformly inside the given ranges, drawn from the world
/// RNG in id order (x, y, heading per agent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentLayout {
    pub count: u32,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub heading: [f64; 2],
    pub speed: f64,
}

impl AgentLayout {
    /// The whole arena, any heading.
    pub fn everywhere(count: u32, width: f64, height: f64, speed: f64) -> Self {
        AgentLayout {
            count,
            x: [0.0, width],
            y: [0.0, height],
            heading: [-std::f64::consts::PI, std::f64::consts::PI],
            speed,
        }
    }

    pub fn spawn(&self, world: &mut SwarmWorld) -> Result<(), SimError> {
        for id in 0..self.count {
            let x = world.rng.random_range(self.x[0]..=self.x[1]);
            let y = world.rng.random_range(self.y[0]..=self.y[1]);
            let h = world.rng.random_range(self.heading[0]..=self.heading[1]);
            world.add_agent(Agent::new(id, Vec2::new(x, y), h, self.speed))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessCriterion {
    /// An obstacle was sensed, no agent ever entered one, all agents show `color`.
    ObstacleAvoided { color: AgentColor },
    /// Every agent is inside a target and shows `color`.
    TargetReached { color: AgentColor },
    LineFormed,
    /// The goal was sensed, all agents show `color` and headings are aligned.
    GoalAligned { color: AgentColor },
    /// Every agent is frozen inside a target.
    FrozenAtTarget,
}

impl SuccessCriterion {
    pub fn holds(&self, world: &SwarmWorld) -> bool {
        let all_color = |c: AgentColor| world.agents.iter().all(|a| a.color == c);
        match *self {
            SuccessCriterion::ObstacleAvoided { color } => {
                world.stats.obstacle_ever_detected
                    && world.stats.min_obstacle_clearance > 0.0
                    && all_color(color)
            }
            SuccessCriterion::TargetReached { color } => world.target_reached() && all_color(color),
            SuccessCriterion::LineFormed => world.line_formed(),
            SuccessCriterion::GoalAligned { color } => {
                world.stats.target_ever_detected && world.aligned() && all_color(color)
            }
            SuccessCriterion::FrozenAtTarget => {
                world.agents.iter().all(|a| {
                    a.frozen && world.targets.iter().any(|t| a.position.distance(t.center) <= t.radius)
                })
            }
        }
    }
}

/// On-disk scenario definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDef {
    pub id: u8,
    pub description: String,
    pub width: f64,
    pub height: f64,
    pub agents: AgentLayout,
    #[serde(default)]
    pub obstacles: Vec<Circle>,
    #[serde(default)]
    pub targets: Vec<Circle>,
    #[serde(default)]
    pub params: SimParams,
    #[serde(default)]
    pub boundary: Boundary,
    pub success: SuccessCriterion,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub def: ScenarioDef,
    pub reference_xml: &'static str,
    pub reference_tree: BehaviorTree,
}

impl Scenario {
    pub fn id(&self) -> u8 {
        self.def.id
    }

    pub fn description(&self) -> &str {
        &self.def.description
    }

    /// Fresh initial world for this layout.
    pub fn world(&self, seed: u64) -> Result<SwarmWorld, SimError> {
        let d = &self.def;
        let mut world = SwarmWorld::new(d.width, d.height, d.params, seed)?;
        world.boundary = d.boundary;
        for o in &d.obstacles {
            world.add_obstacle(*o);
        }
        for t in &d.targets {
            world.add_target(*t);
        }
        d.agents.spawn(&mut world)?;
        Ok(world)
    }

    pub fn success(&self, world: &SwarmWorld) -> bool {
        self.def.success.holds(world)
    }
}

pub fn load_scenario(id: u8) -> Result<Scenario, ScenarioError> {
    let (json, xml) = SOURCES
        .get((id as usize).wrapping_sub(1))
        .ok_or(ScenarioError::UnknownId(id))?;
    let def: ScenarioDef = serde_json::from_str(json)?;
    debug_assert_eq!(def.id, id);
    let report = parse_document(xml, &default_whitelist());
    let tree = report.tree.ok_or_else(|| {
        let detail: Vec<_> = report.diagnostics.iter().map(|d| d.message.clone()).collect();
        ScenarioError::Tree(detail.join("; "))
    })?;
    Ok(Scenario {
        def,
        reference_xml: xml,
        reference_tree: tree,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario_id: u8,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub ticks: u64,
    pub success: bool,
    pub state_hash: String,
}

/// Runs `tree` (the reference tree when `None`) from the scenario's initial
/// world until the root resolves or `max_ticks` pass, then evaluates the
/// success predicate on the final world.
pub fn run_scenario(
    scenario: &Scenario,
    tree: Option<BehaviorTree>,
    seed: u64,
    max_ticks: u64,
) -> Result<(ScenarioOutcome, SwarmWorld), ScenarioError> {
    let mut world = scenario.world(seed)?;
    let tree = tree.unwrap_or_else(|| scenario.reference_tree.clone());
    let mut exec = TreeExecutor::new(tree, SwarmBinding);
    let report = exec.run_to_completion(&mut world, max_ticks)?;
    let outcome = ScenarioOutcome {
        scenario_id: scenario.id(),
        seed,
        outcome: report.outcome,
        ticks: report.ticks_used,
        success: scenario.success(&world),
        state_hash: world.state_hash(),
    };
    Ok((outcome, world))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt_model::serialize_tree;

    #[test]
    fn all_scenarios_load_and_serialize_back() {
        let wl = default_whitelist();
        for id in SCENARIO_IDS {
            let s = load_scenario(id).unwrap();
            assert_eq!(s.id(), id);
            assert_eq!(serialize_tree(&s.reference_tree, &wl).unwrap(), s.reference_xml);
        }
    }

    #[test]
    fn unknown_ids_rejected() {
        for id in [0, 6, 7, 255] {
            assert!(matches!(load_scenario(id), Err(ScenarioError::UnknownId(i)) if i == id));
        }
    }

    #[test]
    fn spawn_respects_layout() {
        let s = load_scenario(1).unwrap();
        let w = s.world(DEFAULT_SEED).unwrap();
        assert_eq!(w.agents.len(), 10);
        for a in &w.agents {
            assert!((40.0..=120.0).contains(&a.position.x));
            assert!((180.0..=320.0).contains(&a.position.y));
        }
    }
}
