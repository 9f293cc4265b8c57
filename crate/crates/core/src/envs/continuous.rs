use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{success_reward, EnvId, InfoRecord, Observation, RewardComponents, StepResult};
use crate::error::{contract, Result};

pub const REACH_SUCCESS_DISTANCE: f64 = 0.05;
const REACH_STEP_SCALE: f64 = 0.1;
const REACH_BOUND: f64 = 1.5;

pub const LINE_RUNNER_DT: f64 = 0.1;
const LINE_RUNNER_DRAG: f64 = 0.5;
const LINE_RUNNER_ALIVE: f64 = 1.0;
const LINE_RUNNER_CTRL_COST: f64 = 0.1;

fn check_action(a: &[f64], dim: usize) -> Result<()> {
    if a.len() != dim {
        return Err(contract(format!("expected a {dim}-dim action, got {}", a.len())));
    }
    if a.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(contract(format!("action {a:?} outside [-1, 1]")));
    }
    Ok(())
}

/// 2-D point mass moving towards a per-episode target.
#[derive(Debug, Clone)]
pub struct PointReach {
    pos: [f64; 2],
    target: [f64; 2],
    step_count: u32,
    max_steps: u32,
    done: bool,
}

impl Default for PointReach {
    fn default() -> Self {
        Self::new()
    }
}

impl PointReach {
    pub fn new() -> Self {
        PointReach {
            pos: [0.0; 2],
            target: [0.5; 2],
            step_count: 0,
            max_steps: EnvId::PointReach.spec().max_steps,
            done: true,
        }
    }

    pub fn distance(&self) -> f64 {
        ((self.pos[0] - self.target[0]).powi(2) + (self.pos[1] - self.target[1]).powi(2)).sqrt()
    }

    pub fn target(&self) -> [f64; 2] {
        self.target
    }

    pub fn reset(&mut self, seed: u64) -> (Observation, InfoRecord) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.pos = [0.0; 2];
        // Keep the start meaningfully away from the target.
        loop {
            self.target = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if self.distance() >= 4.0 * REACH_SUCCESS_DISTANCE {
                break;
            }
        }
        self.step_count = 0;
        self.done = false;
        (self.observe(), self.info(String::new()))
    }

    fn observe(&self) -> Observation {
        Observation::Vector(vec![self.pos[0], self.pos[1], self.target[0], self.target[1]])
    }

    fn info(&self, event_text: String) -> InfoRecord {
        let mut info = InfoRecord::new(self.max_steps);
        info.step_count = self.step_count;
        info.event_text = event_text;
        info.distance_to_target = Some(self.distance());
        info
    }

    pub fn step(&mut self, a: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(contract("step called on a finished episode; call reset first"));
        }
        check_action(a, 2)?;
        let before = self.distance();
        for (p, da) in self.pos.iter_mut().zip(a) {
            *p = (*p + REACH_STEP_SCALE * da).clamp(-REACH_BOUND, REACH_BOUND);
        }
        self.step_count += 1;
        let after = self.distance();
        let terminated = after < REACH_SUCCESS_DISTANCE;
        let event = if terminated {
            "reached target"
        } else if after < before {
            "moved closer"
        } else {
            ""
        };
        let truncated = !terminated && self.step_count >= self.max_steps;
        self.done = terminated || truncated;
        Ok(StepResult {
            observation: self.observe(),
            raw_reward: if terminated {
                success_reward(self.step_count, self.max_steps)
            } else {
                0.0
            },
            terminated,
            truncated,
            success: terminated,
            info: self.info(event.to_string()),
        })
    }
}

/// 1-D double integrator with linear drag and a locomotion-style dense reward.
#[derive(Debug, Clone)]
pub struct LineRunner {
    x: f64,
    v: f64,
    step_count: u32,
    max_steps: u32,
    done: bool,
}

impl Default for LineRunner {
    fn default() -> Self {
        Self::new()
    }
}

impl LineRunner {
    pub fn new() -> Self {
        LineRunner {
            x: 0.0,
            v: 0.0,
            step_count: 0,
            max_steps: EnvId::LineRunner.spec().max_steps,
            done: true,
        }
    }

    /// The seed is accepted for interface symmetry; the runner always starts at rest.
    pub fn reset(&mut self, _seed: u64) -> (Observation, InfoRecord) {
        self.x = 0.0;
        self.v = 0.0;
        self.step_count = 0;
        self.done = false;
        (self.observe(), self.info(None))
    }

    fn observe(&self) -> Observation {
        Observation::Vector(vec![self.x, self.v])
    }

    fn info(&self, components: Option<RewardComponents>) -> InfoRecord {
        let mut info = InfoRecord::new(self.max_steps);
        info.step_count = self.step_count;
        info.velocity = Some(self.v);
        info.reward_components = components;
        info
    }

    /// Reward components for a force `a` applied at velocity `v_next`.
    pub fn components(v_next: f64, a: f64) -> RewardComponents {
        RewardComponents {
            forward: v_next,
            alive: LINE_RUNNER_ALIVE,
            control_cost: LINE_RUNNER_CTRL_COST * a * a,
        }
    }

    pub fn step(&mut self, a: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(contract("step called on a finished episode; call reset first"));
        }
        check_action(a, 1)?;
        let force = a[0];
        self.v += LINE_RUNNER_DT * (force - LINE_RUNNER_DRAG * self.v);
        self.x += LINE_RUNNER_DT * self.v;
        self.step_count += 1;
        let c = Self::components(self.v, force);
        let truncated = self.step_count >= self.max_steps;
        self.done = truncated;
        Ok(StepResult {
            observation: self.observe(),
            raw_reward: c.forward + c.alive - c.control_cost,
            terminated: false,
            truncated,
            success: false,
            info: self.info(Some(c)),
        })
    }
}
