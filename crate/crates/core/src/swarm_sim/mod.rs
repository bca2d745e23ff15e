//! Deterministic 2D swarm simulator.
//!
//! A [`SwarmWorld`] is advanced one step per behavior-tree tick. Leaf
//! behaviors act on the whole swarm at once: conditions are swarm-level
//! predicates and actions set per-agent steering targets that the next
//! [`Advance::advance`] turns into motion. All randomness comes from one
//! seeded ChaCha8 stream consumed in ascending agent id order.

mod behaviors;
mod geometry;
mod scenario;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bt_runtime::{Advance, LeafBinding, RuntimeFault, TickStatus, TreeExecutor};

pub use behaviors::{Primitive, SwarmBinding};
pub use geometry::{angle_between, sector_distance, wrap_angle, Circle, Vec2};
pub use scenario::{
    load_scenario, run_scenario, AgentLayout, Scenario, ScenarioDef, ScenarioError, ScenarioOutcome,
    SuccessCriterion, DEFAULT_SEED, SCENARIO_IDS, TICK_BUDGET,
};

/// Identifier of the generator behind [`SwarmWorld`]'s randomness, recorded
/// in traces so fixtures can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

pub const DEFAULT_WORLD_SIZE: f64 = 500.0;
pub const DEFAULT_AGENT_COUNT: u32 = 10;
pub const DEFAULT_AGENT_SPEED: f64 = 2.0;

/// Half-opening of the forward cone used by `PathClear`.
pub const PATH_CONE_HALF_ANGLE: f64 = std::f64::consts::PI / 6.0;

/// An agent counts as on its line slot within this distance.
pub const LINE_SLOT_TOLERANCE: f64 = 0.5;

/// Headings count as aligned when every pair differs by less than this.
pub const ALIGNMENT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("simulation parameter `{0}` must be strictly positive")]
    NonPositiveParam(&'static str),
    #[error("world dimensions must be strictly positive")]
    EmptyWorld,
    #[error("agent speed must be non-negative")]
    NegativeSpeed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentColor {
    Red,
    Green,
    Blue,
    Yellow,
    White,
}

impl AgentColor {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentColor::Red => "red",
            AgentColor::Green => "green",
            AgentColor::Blue => "blue",
            AgentColor::Yellow => "yellow",
            AgentColor::White => "white",
        }
    }
}

impl fmt::Display for AgentColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentColor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "red" => AgentColor::Red,
            "green" => AgentColor::Green,
            "blue" => AgentColor::Blue,
            "yellow" => AgentColor::Yellow,
            "white" => AgentColor::White,
            other => return Err(format!("unknown color `{other}`")),
        })
    }
}

/// Steering request for the coming step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Steer {
    pub heading: f64,
    /// Arrival mode: never travel past this distance and slow down while
    /// still turning toward `heading`.
    pub arrive_within: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub id: u32,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub color: AgentColor,
    pub frozen: bool,
    pub(crate) steer: Option<Steer>,
}

impl Agent {
    pub fn new(id: u32, position: Vec2, heading: f64, speed: f64) -> Self {
        Agent {
            id,
            position,
            heading: wrap_angle(heading),
            speed,
            color: AgentColor::White,
            frozen: false,
            steer: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub detection_radius: f64,
    pub avoidance_gain: f64,
    pub alignment_radius: f64,
    pub line_spacing: f64,
    pub wander_turn_stddev: f64,
    pub max_turn_per_tick: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            detection_radius: 50.0,
            avoidance_gain: 1.0,
            alignment_radius: 60.0,
            line_spacing: 20.0,
            wander_turn_stddev: 0.3,
            max_turn_per_tick: 0.2,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("detection_radius", self.detection_radius),
            ("avoidance_gain", self.avoidance_gain),
            ("alignment_radius", self.alignment_radius),
            ("line_spacing", self.line_spacing),
            ("wander_turn_stddev", self.wander_turn_stddev),
            ("max_turn_per_tick", self.max_turn_per_tick),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::NonPositiveParam(name));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Clamp into the arena and mirror the heading off the wall.
    #[default]
    Reflect,
    /// Toroidal arena.
    Wrap,
}

/// Facts accumulated over the world's whole history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldStats {
    pub obstacle_ever_detected: bool,
    pub target_ever_detected: bool,
    /// Smallest agent-to-obstacle surface distance seen; negative means an
    /// agent has been inside an obstacle.
    pub min_obstacle_clearance: f64,
}

impl Default for WorldStats {
    fn default() -> Self {
        WorldStats {
            obstacle_ever_detected: false,
            target_ever_detected: false,
            min_obstacle_clearance: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SwarmWorld {
    pub width: f64,
    pub height: f64,
    pub agents: Vec<Agent>,
    pub obstacles: Vec<Circle>,
    pub targets: Vec<Circle>,
    pub tick: u64,
    pub params: SimParams,
    pub boundary: Boundary,
    pub stats: WorldStats,
    seed: u64,
    pub(crate) rng: ChaCha8Rng,
}

impl SwarmWorld {
    pub fn new(width: f64, height: f64, params: SimParams, seed: u64) -> Result<Self, SimError> {
        params.validate()?;
        if !(width > 0.0 && height > 0.0) {
            return Err(SimError::EmptyWorld);
        }
        Ok(SwarmWorld {
            width,
            height,
            agents: Vec::new(),
            obstacles: Vec::new(),
            targets: Vec::new(),
            tick: 0,
            params,
            boundary: Boundary::default(),
            stats: WorldStats::default(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Default arena with the default swarm spread uniformly over it.
    pub fn with_default_swarm(seed: u64) -> Self {
        let size = DEFAULT_WORLD_SIZE;
        let mut world = SwarmWorld::new(size, size, SimParams::default(), seed).expect("defaults are valid");
        AgentLayout::everywhere(DEFAULT_AGENT_COUNT, size, size, DEFAULT_AGENT_SPEED)
            .spawn(&mut world)
            .expect("defaults are valid");
        world
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.width / 2.0, self.height / 2.0)
    }

    /// Inserts an agent keeping the list sorted by id.
    pub fn add_agent(&mut self, agent: Agent) -> Result<(), SimError> {
        if !(agent.speed >= 0.0) {
            return Err(SimError::NegativeSpeed);
        }
        let at = self.agents.partition_point(|a| a.id < agent.id);
        self.agents.insert(at, agent);
        self.record_stats();
        Ok(())
    }

    pub fn add_obstacle(&mut self, obstacle: Circle) {
        self.obstacles.push(obstacle);
        self.record_stats();
    }

    pub fn add_target(&mut self, target: Circle) {
        self.targets.push(target);
        self.record_stats();
    }

    /// One simulation step: tick the tree once, then move the agents.
    pub fn step<B>(&mut self, executor: &mut TreeExecutor<B>) -> Result<TickStatus, RuntimeFault>
    where
        B: LeafBinding<World = SwarmWorld>,
    {
        let status = executor.tick(self);
        self.advance();
        status
    }

    pub fn set_all_frozen(&mut self) {
        for agent in &mut self.agents {
            agent.frozen = true;
            agent.steer = None;
        }
    }

    fn record_stats(&mut self) {
        if self.obstacle_detected() {
            self.stats.obstacle_ever_detected = true;
        }
        if self.target_detected() {
            self.stats.target_ever_detected = true;
        }
        for agent in &self.agents {
            for obstacle in &self.obstacles {
                let d = obstacle.surface_distance(agent.position);
                if d < self.stats.min_obstacle_clearance {
                    self.stats.min_obstacle_clearance = d;
                }
            }
        }
    }

    fn apply_boundary(&self, agent: &mut Agent) {
        let (w, h) = (self.width, self.height);
        match self.boundary {
            Boundary::Reflect => {
                let p = &mut agent.position;
                if p.x < 0.0 || p.x > w {
                    p.x = p.x.clamp(0.0, w);
                    agent.heading = wrap_angle(std::f64::consts::PI - agent.heading);
                }
                if p.y < 0.0 || p.y > h {
                    p.y = p.y.clamp(0.0, h);
                    agent.heading = wrap_angle(-agent.heading);
                }
            }
            Boundary::Wrap => {
                agent.position.x = agent.position.x.rem_euclid(w);
                agent.position.y = agent.position.y.rem_euclid(h);
            }
        }
    }

    /// Bit-exact digest of the evolving state: tick, agents and RNG position.
    pub fn state_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.tick.to_le_bytes());
        for agent in &self.agents {
            hasher.update(agent.id.to_le_bytes());
            hasher.update(agent.position.x.to_bits().to_le_bytes());
            hasher.update(agent.position.y.to_bits().to_le_bytes());
            hasher.update(agent.heading.to_bits().to_le_bytes());
            hasher.update(agent.speed.to_bits().to_le_bytes());
            hasher.update([agent.color as u8, agent.frozen as u8]);
        }
        hasher.update(self.rng.get_word_pos().to_le_bytes());
        hasher
            .finalize()
            .iter()
            .take(16)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            tick: self.tick,
            agents: self
                .agents
                .iter()
                .map(|a| AgentSnapshot {
                    id: a.id,
                    x: a.position.x,
                    y: a.position.y,
                    heading: a.heading,
                    color: a.color,
                    frozen: a.frozen,
                })
                .collect(),
            obstacles: self.obstacles.clone(),
            targets: self.targets.clone(),
        }
    }
}

impl Advance for SwarmWorld {
    /// Applies pending steering (turn clamped to `max_turn_per_tick`), moves
    /// every unfrozen agent forward, enforces the boundary and bumps `tick`.
    fn advance(&mut self) {
        let max_turn = self.params.max_turn_per_tick;
        let mut agents = std::mem::take(&mut self.agents);
        for agent in &mut agents {
            let steer = agent.steer.take();
            if agent.frozen {
                continue;
            }
            let mut distance = agent.speed;
            if let Some(steer) = steer {
                let error = wrap_angle(steer.heading - agent.heading);
                agent.heading = wrap_angle(agent.heading + error.clamp(-max_turn, max_turn));
                if let Some(limit) = steer.arrive_within {
                    let remaining = wrap_angle(steer.heading - agent.heading);
                    distance = distance.min(limit) * remaining.cos().max(0.0);
                }
            }
            agent.position = agent.position + Vec2::from_angle(agent.heading) * distance;
            self.apply_boundary(agent);
        }
        self.agents = agents;
        self.tick += 1;
        self.record_stats();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub color: AgentColor,
    pub frozen: bool,
}

/// Wire form of a world at a step boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub tick: u64,
    pub agents: Vec<AgentSnapshot>,
    pub obstacles: Vec<Circle>,
    pub targets: Vec<Circle>,
}
