//! Seedable task environments.
//!
//! Four sparse gridworlds with a MiniGrid-style 7x7x3 egocentric observation
//! and two continuous surrogates (a point-mass reacher and a dense-reward
//! runner). Every environment exposes the same [`InfoRecord`] so reward
//! programs can be written against one field set.

mod continuous;
mod grid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use continuous::{LineRunner, PointReach, LINE_RUNNER_DT, REACH_SUCCESS_DISTANCE};
pub use grid::{Cell, Color, Direction, DoorState, GridEnv, GridObservation, VIEW_SIZE};

use crate::error::{contract, Error, Result};

/// Number of discrete grid actions: left, right, forward, pickup, drop, toggle, done.
pub const NUM_GRID_ACTIONS: usize = 7;

/// Discrete action indices.
pub mod action {
    pub const LEFT: u8 = 0;
    pub const RIGHT: u8 = 1;
    pub const FORWARD: u8 = 2;
    pub const PICKUP: u8 = 3;
    pub const DROP: u8 = 4;
    pub const TOGGLE: u8 = 5;
    pub const DONE: u8 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvId {
    DoorKey5,
    DoorKey8,
    LavaGapS5,
    KeyCorridorS3R1,
    PointReach,
    LineRunner,
}

impl EnvId {
    pub const ALL: [EnvId; 6] = [
        EnvId::DoorKey5,
        EnvId::DoorKey8,
        EnvId::LavaGapS5,
        EnvId::KeyCorridorS3R1,
        EnvId::PointReach,
        EnvId::LineRunner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::DoorKey5 => "DoorKey5",
            EnvId::DoorKey8 => "DoorKey8",
            EnvId::LavaGapS5 => "LavaGapS5",
            EnvId::KeyCorridorS3R1 => "KeyCorridorS3R1",
            EnvId::PointReach => "PointReach",
            EnvId::LineRunner => "LineRunner",
        }
    }

    pub fn spec(self) -> &'static EnvSpec {
        catalog_ref()
            .iter()
            .find(|s| s.env_id == self)
            .expect("every EnvId has a catalog entry")
    }

    pub fn is_grid(self) -> bool {
        matches!(self.spec().action_space, ActionSpace::Discrete(_))
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown env_id {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

/// Broad environment family; decides observation encoding and which info
/// fields exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvKind {
    /// Sparse gridworld with discrete actions.
    Grid,
    /// Continuous reaching task with a binary success criterion.
    Reach,
    /// Continuous task with a dense reward and no success criterion.
    Dense,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub kind: EnvKind,
    pub action_space: ActionSpace,
    pub max_steps: u32,
    pub has_binary_success: bool,
    pub obs_dim: usize,
    /// Closed set of event strings this environment can emit.
    pub event_vocabulary: &'static [&'static str],
    pub description_text: &'static str,
}

const GRID_EVENTS_DOORKEY: &[&str] = &["picked up yellow key", "dropped yellow key", "opened door", "reached goal"];
const GRID_EVENTS_LAVA: &[&str] = &["reached goal", "stepped in lava"];
const GRID_EVENTS_CORRIDOR: &[&str] = &[
    "picked up yellow key",
    "picked up purple ball",
    "dropped yellow key",
    "dropped purple ball",
    "opened door",
];
const REACH_EVENTS: &[&str] = &["reached target", "moved closer"];

const DOORKEY5_TEXT: &str = "DoorKey 5x5: a small walled grid split by a vertical wall. \
The agent starts on the left side together with a yellow key. A locked yellow door in the \
dividing wall leads to the right side, where a green goal square sits in the bottom-right \
corner. The agent must pick up the key, face the door and toggle it to unlock it, walk \
through, and step onto the goal. Reward is given only on reaching the goal: \
1 - 0.9 * (step_count / max_steps). Episode limit: 250 steps.";

const DOORKEY8_TEXT: &str = "DoorKey 8x8: an 8x8 walled grid split by a vertical wall at a \
random column. The agent and a yellow key start somewhere left of the wall. A locked yellow \
door at a random row of the wall leads to the right part, where a green goal square sits in \
the bottom-right corner. The agent must pick up the key, face the door and toggle it to \
unlock it, walk through, and step onto the goal. Reward is given only on reaching the goal: \
1 - 0.9 * (step_count / max_steps). Episode limit: 640 steps, so random wandering rarely \
finds the goal.";

const LAVAGAP_TEXT: &str = "LavaGap S5: a 5x5 walled grid. The agent starts in the top-left \
corner facing right. A vertical strip of lava with a single gap blocks the way to the green \
goal square in the bottom-right corner. Stepping into lava ends the episode with zero \
reward. Reward is given only on reaching the goal: 1 - 0.9 * (step_count / max_steps). \
Episode limit: 100 steps.";

const KEYCORRIDOR_TEXT: &str = "KeyCorridor S3R1: a corridor column with a side room on each \
side. The agent starts in the corridor. The left room is behind a closed (unlocked) grey door \
and holds a yellow key. The right room is behind a locked yellow door and holds a purple \
ball. The agent must fetch the key, unlock the yellow door, drop the key (it can carry only \
one object), and pick up the purple ball. Reward is given only when the ball is picked up: \
1 - 0.9 * (step_count / max_steps). Episode limit: 270 steps.";

const POINTREACH_TEXT: &str = "PointReach: a 2-D point mass starts at the origin and must \
reach a target drawn uniformly from the square [-1, 1]^2. Observation is a flat vector \
(x, y, target_x, target_y); the action is a 2-D displacement command in [-1, 1]^2 scaled by \
0.1 per step. Success means distance_to_target < 0.05, which ends the episode with reward \
1 - 0.9 * (step_count / max_steps); every other step gives zero reward. Events: \
\"reached target\" on success, \"moved closer\" when the distance shrinks. Episode limit: \
50 steps.";

const LINERUNNER_TEXT: &str = "LineRunner: a 1-D runner (double integrator with drag). \
Observation is a flat vector (position, velocity); the action is a scalar force in [-1, 1]. \
The native reward is dense: forward velocity + alive bonus (1.0) - 0.1 * force^2 at every \
step. There is no binary success criterion; performance is the mean episode return. \
Episode limit: 200 steps.";

fn catalog_ref() -> &'static [EnvSpec] {
    static CATALOG: std::sync::OnceLock<Vec<EnvSpec>> = std::sync::OnceLock::new();
    CATALOG.get_or_init(|| {
        let grid = |env_id, max_steps, events, text| EnvSpec {
            env_id,
            kind: EnvKind::Grid,
            action_space: ActionSpace::Discrete(NUM_GRID_ACTIONS),
            max_steps,
            has_binary_success: true,
            obs_dim: VIEW_SIZE * VIEW_SIZE * 3,
            event_vocabulary: events,
            description_text: text,
        };
        vec![
            grid(EnvId::DoorKey5, 250, GRID_EVENTS_DOORKEY, DOORKEY5_TEXT),
            grid(EnvId::DoorKey8, 640, GRID_EVENTS_DOORKEY, DOORKEY8_TEXT),
            grid(EnvId::LavaGapS5, 100, GRID_EVENTS_LAVA, LAVAGAP_TEXT),
            grid(EnvId::KeyCorridorS3R1, 270, GRID_EVENTS_CORRIDOR, KEYCORRIDOR_TEXT),
            EnvSpec {
                env_id: EnvId::PointReach,
                kind: EnvKind::Reach,
                action_space: ActionSpace::Continuous(2),
                max_steps: 50,
                has_binary_success: true,
                obs_dim: 4,
                event_vocabulary: REACH_EVENTS,
                description_text: POINTREACH_TEXT,
            },
            EnvSpec {
                env_id: EnvId::LineRunner,
                kind: EnvKind::Dense,
                action_space: ActionSpace::Continuous(1),
                max_steps: 200,
                has_binary_success: false,
                obs_dim: 2,
                event_vocabulary: &[],
                description_text: LINERUNNER_TEXT,
            },
        ]
    })
}

/// All six environment specs.
pub fn env_catalog() -> Vec<EnvSpec> {
    catalog_ref().to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Grid(GridObservation),
    Vector(Vec<f64>),
}

impl Observation {
    /// Flattened raw features (no normalization).
    pub fn to_features(&self) -> Vec<f64> {
        match self {
            Observation::Grid(g) => g.to_features(),
            Observation::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(u8),
    Continuous(Vec<f64>),
}

/// Per-step components of the dense runner reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub forward: f64,
    pub alive: f64,
    pub control_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoRecord {
    /// Grid coordinates; absent for continuous environments.
    pub agent_pos: Option<(i32, i32)>,
    pub carrying: String,
    pub event_text: String,
    pub step_count: u32,
    pub max_steps: u32,
    /// Reaching environments only.
    pub distance_to_target: Option<f64>,
    /// Dense runner only.
    pub velocity: Option<f64>,
    /// Dense runner only.
    pub reward_components: Option<RewardComponents>,
}

impl InfoRecord {
    pub(crate) fn new(max_steps: u32) -> Self {
        InfoRecord {
            agent_pos: None,
            carrying: "nothing".into(),
            event_text: String::new(),
            step_count: 0,
            max_steps,
            distance_to_target: None,
            velocity: None,
            reward_components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub raw_reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// True when the episode ended by solving the task.
    pub success: bool,
    pub info: InfoRecord,
}

/// Success reward shared by the sparse tasks.
pub fn success_reward(step_count: u32, max_steps: u32) -> f64 {
    1.0 - 0.9 * (step_count as f64 / max_steps as f64)
}

/// A live environment instance.
#[derive(Debug, Clone)]
pub enum Env {
    Grid(GridEnv),
    PointReach(PointReach),
    LineRunner(LineRunner),
}

impl Env {
    pub fn new(id: EnvId) -> Env {
        match id {
            EnvId::PointReach => Env::PointReach(PointReach::new()),
            EnvId::LineRunner => Env::LineRunner(LineRunner::new()),
            grid_id => Env::Grid(GridEnv::new(grid_id)),
        }
    }

    pub fn id(&self) -> EnvId {
        match self {
            Env::Grid(g) => g.id(),
            Env::PointReach(_) => EnvId::PointReach,
            Env::LineRunner(_) => EnvId::LineRunner,
        }
    }

    pub fn spec(&self) -> &'static EnvSpec {
        self.id().spec()
    }

    pub fn reset(&mut self, seed: u64) -> (Observation, InfoRecord) {
        match self {
            Env::Grid(g) => g.reset(seed),
            Env::PointReach(p) => p.reset(seed),
            Env::LineRunner(l) => l.reset(seed),
        }
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        match (self, action) {
            (Env::Grid(g), Action::Discrete(a)) => g.step(*a),
            (Env::PointReach(p), Action::Continuous(a)) => p.step(a),
            (Env::LineRunner(l), Action::Continuous(a)) => l.step(a),
            (env, a) => Err(contract(format!(
                "action {a:?} does not match the action space of {}",
                env.id()
            ))),
        }
    }
}

/// Create and reset an environment in one call.
pub fn reset(id: EnvId, seed: u64) -> (Env, Observation, InfoRecord) {
    let mut env = Env::new(id);
    let (obs, info) = env.reset(seed);
    (env, obs, info)
}
