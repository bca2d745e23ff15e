use rand_distr::{Distribution, Normal};

use super::{
    sector_distance, AgentColor, Steer, SwarmWorld, Vec2, ALIGNMENT_TOLERANCE, LINE_SLOT_TOLERANCE,
    PATH_CONE_HALF_ANGLE,
};
use crate::bt_runtime::{LeafBinding, Params, RuntimeFault, TickStatus};

/// The whitelisted swarm behaviors, keyed by their leaf names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Primitive {
    Wander,
    AvoidObstacle,
    ChangeColor,
    ApproachTarget,
    FormLine,
    AlignWithSwarm,
    FreezeMovement,
    FindGoal,
    ObstacleDetected,
    TargetDetected,
    PathClear,
    GoalFound,
    TargetReached,
}

impl Primitive {
    pub const ALL: [Primitive; 13] = [
        Primitive::Wander,
        Primitive::AvoidObstacle,
        Primitive::ChangeColor,
        Primitive::ApproachTarget,
        Primitive::FormLine,
        Primitive::AlignWithSwarm,
        Primitive::FreezeMovement,
        Primitive::FindGoal,
        Primitive::ObstacleDetected,
        Primitive::TargetDetected,
        Primitive::PathClear,
        Primitive::GoalFound,
        Primitive::TargetReached,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Wander => "Wander",
            Primitive::AvoidObstacle => "AvoidObstacle",
            Primitive::ChangeColor => "ChangeColor",
            Primitive::ApproachTarget => "ApproachTarget",
            Primitive::FormLine => "FormLine",
            Primitive::AlignWithSwarm => "AlignWithSwarm",
            Primitive::FreezeMovement => "FreezeMovement",
            Primitive::FindGoal => "FindGoal",
            Primitive::ObstacleDetected => "ObstacleDetected",
            Primitive::TargetDetected => "TargetDetected",
            Primitive::PathClear => "PathClear",
            Primitive::GoalFound => "GoalFound",
            Primitive::TargetReached => "TargetReached",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Primitive::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_condition(self) -> bool {
        matches!(
            self,
            Primitive::ObstacleDetected
                | Primitive::TargetDetected
                | Primitive::PathClear
                | Primitive::GoalFound
                | Primitive::TargetReached
        )
    }
}

fn status(ok: bool) -> TickStatus {
    if ok {
        TickStatus::Success
    } else {
        TickStatus::Failure
    }
}

fn progress(done: bool) -> TickStatus {
    if done {
        TickStatus::Success
    } else {
        TickStatus::Running
    }
}

fn nearest(circles: &[super::Circle], p: Vec2) -> Option<&super::Circle> {
    circles
        .iter()
        .min_by(|a, b| a.surface_distance(p).total_cmp(&b.surface_distance(p)))
}

fn nearest_center(circles: &[super::Circle], p: Vec2) -> Option<&super::Circle> {
    circles
        .iter()
        .min_by(|a, b| a.center.distance(p).total_cmp(&b.center.distance(p)))
}

/// Steers toward `point`, never overshooting it. The remaining distance
/// cannot grow.
fn arrive_at(agent: &mut super::Agent, point: Vec2) {
    let to = point - agent.position;
    agent.steer = Some(Steer {
        heading: if to.length() == 0.0 { agent.heading } else { to.angle() },
        arrive_within: Some(to.length()),
    });
}

impl SwarmWorld {
    fn any_within(&self, circles: &[super::Circle]) -> bool {
        let r = self.params.detection_radius;
        self.agents
            .iter()
            .any(|a| circles.iter().any(|c| c.surface_distance(a.position) <= r))
    }

    pub fn obstacle_detected(&self) -> bool {
        self.any_within(&self.obstacles)
    }

    pub fn target_detected(&self) -> bool {
        self.any_within(&self.targets)
    }

    pub fn path_clear(&self) -> bool {
        let len = self.params.detection_radius;
        self.agents.iter().all(|a| {
            self.obstacles.iter().all(|o| {
                sector_distance(o.center, a.position, a.heading, PATH_CONE_HALF_ANGLE, len) > o.radius
            })
        })
    }

    /// Every unfrozen agent lies inside its nearest target. False without targets.
    pub fn target_reached(&self) -> bool {
        !self.targets.is_empty()
            && self.agents.iter().filter(|a| !a.frozen).all(|a| {
                nearest_center(&self.targets, a.position)
                    .is_some_and(|t| a.position.distance(t.center) <= t.radius)
            })
    }

    /// Slot of each agent, in id order, on the horizontal line through the
    /// world center.
    pub fn line_slots(&self) -> Vec<Vec2> {
        let c = self.center();
        let n = self.agents.len() as f64;
        (0..self.agents.len())
            .map(|i| Vec2::new(c.x + (i as f64 - (n - 1.0) / 2.0) * self.params.line_spacing, c.y))
            .collect()
    }

    pub fn line_formed(&self) -> bool {
        self.agents
            .iter()
            .zip(self.line_slots())
            .all(|(a, s)| a.position.distance(s) <= LINE_SLOT_TOLERANCE)
    }

    /// Largest heading difference between any two unfrozen agents.
    pub fn heading_spread(&self) -> f64 {
        let live: Vec<f64> = self.agents.iter().filter(|a| !a.frozen).map(|a| a.heading).collect();
        let mut worst: f64 = 0.0;
        for (i, a) in live.iter().enumerate() {
            for b in &live[i + 1..] {
                worst = worst.max(super::angle_between(*a, *b));
            }
        }
        worst
    }

    pub fn aligned(&self) -> bool {
        self.heading_spread() < ALIGNMENT_TOLERANCE
    }

    pub fn wander(&mut self) -> TickStatus {
        let noise = Normal::new(0.0, self.params.wander_turn_stddev).expect("positive stddev");
        for i in 0..self.agents.len() {
            let turn = noise.sample(&mut self.rng);
            let agent = &mut self.agents[i];
            if !agent.frozen {
                agent.steer = Some(Steer {
                    heading: agent.heading + turn,
                    arrive_within: None,
                });
            }
        }
        TickStatus::Running
    }

    /// Steers agents inside the detection radius along the outward normal of
    /// their nearest obstacle, more sharply the closer they are.
    pub fn avoid_obstacle(&mut self) -> TickStatus {
        let r = self.params.detection_radius;
        let gain = self.params.avoidance_gain;
        let mut threatened = false;
        for agent in &mut self.agents {
            let Some(o) = nearest(&self.obstacles, agent.position) else {
                break;
            };
            let d = o.surface_distance(agent.position);
            if d > r {
                continue;
            }
            threatened = true;
            if agent.frozen {
                continue;
            }
            let away = agent.position - o.center;
            let normal = if away.length() == 0.0 {
                Vec2::from_angle(agent.heading)
            } else {
                away * (1.0 / away.length())
            };
            let push = gain * (1.0 + r / d.max(1.0));
            let v = Vec2::from_angle(agent.heading) + normal * push;
            agent.steer = Some(Steer {
                heading: v.angle(),
                arrive_within: None,
            });
        }
        progress(!threatened)
    }

    /// Arrives at the nearest target center. Agents keep converging on the
    /// tick that reports Success, so the swarm does not drift off.
    pub fn approach_target(&mut self) -> TickStatus {
        if self.targets.is_empty() {
            return TickStatus::Failure;
        }
        let done = self.target_reached();
        for agent in self.agents.iter_mut().filter(|a| !a.frozen) {
            let t = nearest_center(&self.targets, agent.position).expect("targets present");
            arrive_at(agent, t.center);
        }
        progress(done)
    }

    pub fn find_goal(&mut self) -> TickStatus {
        if self.target_reached() {
            return TickStatus::Success;
        }
        if self.target_detected() {
            self.approach_target()
        } else {
            self.wander()
        }
    }

    pub fn form_line(&mut self) -> TickStatus {
        let done = self.line_formed();
        let slots = self.line_slots();
        for (agent, slot) in self.agents.iter_mut().zip(slots) {
            if !agent.frozen {
                arrive_at(agent, slot);
            }
        }
        progress(done)
    }

    /// Turns each agent toward the circular mean heading of the unfrozen
    /// agents within `alignment_radius` (itself included).
    pub fn align_with_swarm(&mut self) -> TickStatus {
        if self.aligned() {
            return TickStatus::Success;
        }
        let radius = self.params.alignment_radius;
        let live: Vec<(Vec2, f64)> = self
            .agents
            .iter()
            .filter(|a| !a.frozen)
            .map(|a| (a.position, a.heading))
            .collect();
        for agent in self.agents.iter_mut().filter(|a| !a.frozen) {
            let sum = live
                .iter()
                .filter(|(p, _)| p.distance(agent.position) <= radius)
                .fold(Vec2::default(), |acc, (_, h)| acc + Vec2::from_angle(*h));
            if sum.length() > 1e-12 {
                agent.steer = Some(Steer {
                    heading: sum.angle(),
                    arrive_within: None,
                });
            }
        }
        TickStatus::Running
    }

    pub fn change_color(&mut self, color: AgentColor) -> TickStatus {
        for agent in &mut self.agents {
            agent.color = color;
        }
        TickStatus::Success
    }

    pub fn freeze_movement(&mut self) -> TickStatus {
        self.set_all_frozen();
        TickStatus::Success
    }
}

/// Binds whitelist leaf names to the swarm primitives.
#[derive(Clone, Copy, Debug, Default)]
pub struct SwarmBinding;

impl SwarmBinding {
    fn dispatch(name: &str, params: &Params, world: &mut SwarmWorld) -> Result<TickStatus, RuntimeFault> {
        let prim = Primitive::from_name(name).ok_or_else(|| RuntimeFault::UnknownLeaf(name.to_string()))?;
        Ok(match prim {
            Primitive::Wander => world.wander(),
            Primitive::AvoidObstacle => world.avoid_obstacle(),
            Primitive::ApproachTarget => world.approach_target(),
            Primitive::FindGoal => world.find_goal(),
            Primitive::FormLine => world.form_line(),
            Primitive::AlignWithSwarm => world.align_with_swarm(),
            Primitive::FreezeMovement => world.freeze_movement(),
            Primitive::ChangeColor => {
                let bad = |message: String| RuntimeFault::BadParams {
                    name: name.to_string(),
                    message,
                };
                let raw = params.get("color").ok_or_else(|| bad("missing `color`".into()))?;
                world.change_color(raw.parse().map_err(bad)?)
            }
            Primitive::ObstacleDetected => status(world.obstacle_detected()),
            Primitive::TargetDetected | Primitive::GoalFound => status(world.target_detected()),
            Primitive::PathClear => status(world.path_clear()),
            Primitive::TargetReached => status(world.target_reached()),
        })
    }
}

impl LeafBinding for SwarmBinding {
    type World = SwarmWorld;

    fn tick_action(&mut self, name: &str, params: &Params, world: &mut SwarmWorld) -> Result<TickStatus, RuntimeFault> {
        match Primitive::from_name(name) {
            Some(p) if !p.is_condition() => Self::dispatch(name, params, world),
            _ => Err(RuntimeFault::UnknownLeaf(name.to_string())),
        }
    }

    fn tick_condition(&mut self, name: &str, params: &Params, world: &mut SwarmWorld) -> Result<TickStatus, RuntimeFault> {
        match Primitive::from_name(name) {
            Some(p) if p.is_condition() => Self::dispatch(name, params, world),
            _ => Err(RuntimeFault::UnknownLeaf(name.to_string())),
        }
    }
}
