use serde::{Deserialize, Serialize};

use super::ast::{Effect, Field, RewardProgram};
use super::interp::{evaluate_in_place, EpisodeShapingState, EvalOptions, Transition};
use super::{parse, typecheck, DslError};
use crate::envs::{EnvKind, InfoRecord, RewardComponents};

/// Bump when the battery contents change.
pub const BATTERY_VERSION: u32 = 1;

/// Literal add magnitudes outside this range draw an advisory.
pub const ADVISORY_MAGNITUDE: (f64, f64) = (0.01, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Parse,
    Typecheck,
    DryRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub phase: Phase,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub errors: Vec<ValidationIssue>,
    pub advisories: Vec<String>,
}

impl ValidationReport {
    fn failed(phase: Phase, e: &DslError) -> Self {
        ValidationReport {
            ok: false,
            errors: vec![ValidationIssue {
                phase,
                message: e.to_string(),
            }],
            advisories: Vec::new(),
        }
    }

    /// Errors and advisories as prompt-ready lines.
    pub fn summary_lines(&self) -> Vec<String> {
        let phase = |p: Phase| match p {
            Phase::Parse => "parse",
            Phase::Typecheck => "typecheck",
            Phase::DryRun => "dry_run",
        };
        self.errors
            .iter()
            .map(|e| format!("{} error: {}", phase(e.phase), e.message))
            .chain(self.advisories.iter().map(|a| format!("advisory: {a}")))
            .collect()
    }
}

/// One entry of the fixed dry-run battery.
#[derive(Debug, Clone)]
pub struct BatteryEntry {
    pub label: &'static str,
    pub kind: EnvKind,
    /// Resets the shaping state before this entry.
    pub episode_start: bool,
    pub action: Option<u8>,
    pub raw_reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: InfoRecord,
}

impl BatteryEntry {
    pub fn transition(&self) -> Transition<'_> {
        Transition {
            action: self.action,
            raw_reward: self.raw_reward,
            terminated: self.terminated,
            truncated: self.truncated,
            info: &self.info,
        }
    }

    pub fn provides(&self, f: Field) -> bool {
        match f {
            Field::AgentX | Field::AgentY => self.info.agent_pos.is_some(),
            Field::Action => self.action.is_some(),
            Field::DistanceToTarget => self.info.distance_to_target.is_some(),
            Field::Velocity => self.info.velocity.is_some(),
            _ => true,
        }
    }
}

fn grid_info(pos: (i32, i32), step: u32, carrying: &str, event: &str) -> InfoRecord {
    InfoRecord {
        agent_pos: Some(pos),
        carrying: carrying.into(),
        event_text: event.into(),
        step_count: step,
        max_steps: 250,
        distance_to_target: None,
        velocity: None,
        reward_components: None,
    }
}

/// The eight synthetic transitions every program is dry-run against.
pub fn dry_run_battery() -> Vec<BatteryEntry> {
    let grid = |label, episode_start, action, raw_reward, terminated, truncated, info| BatteryEntry {
        label,
        kind: EnvKind::Grid,
        episode_start,
        action: Some(action),
        raw_reward,
        terminated,
        truncated,
        info,
    };
    let mut reach = InfoRecord {
        distance_to_target: Some(0.4),
        event_text: "moved closer".into(),
        step_count: 3,
        ..grid_info((0, 0), 0, "nothing", "")
    };
    reach.agent_pos = None;
    reach.max_steps = 50;
    let dense = InfoRecord {
        agent_pos: None,
        velocity: Some(1.5),
        max_steps: 200,
        step_count: 10,
        reward_components: Some(RewardComponents {
            forward: 1.5,
            alive: 1.0,
            control_cost: 0.1,
        }),
        ..grid_info((0, 0), 0, "nothing", "")
    };
    vec![
        grid("episode start", true, 0, 0.0, false, false, grid_info((1, 1), 1, "nothing", "")),
        grid(
            "key pickup",
            false,
            3,
            0.0,
            false,
            false,
            grid_info((1, 2), 7, "yellow key", "picked up yellow key"),
        ),
        grid(
            "door open",
            false,
            5,
            0.0,
            false,
            false,
            grid_info((2, 2), 12, "yellow key", "opened door"),
        ),
        grid(
            "goal",
            false,
            2,
            0.9172,
            true,
            false,
            grid_info((3, 3), 23, "yellow key", "reached goal"),
        ),
        grid(
            "truncation",
            true,
            1,
            0.0,
            false,
            true,
            grid_info((1, 3), 250, "nothing", ""),
        ),
        BatteryEntry {
            label: "continuous step",
            kind: EnvKind::Reach,
            episode_start: true,
            action: None,
            raw_reward: 0.0,
            terminated: false,
            truncated: false,
            info: reach,
        },
        BatteryEntry {
            label: "dense step",
            kind: EnvKind::Dense,
            episode_start: true,
            action: None,
            raw_reward: 2.4,
            terminated: false,
            truncated: false,
            info: dense,
        },
        grid(
            "no-event step",
            true,
            2,
            0.0,
            false,
            false,
            grid_info((2, 1), 50, "nothing", ""),
        ),
    ]
}

fn magnitude_advisories(program: &RewardProgram) -> Vec<String> {
    let (lo, hi) = ADVISORY_MAGNITUDE;
    let mut out = Vec::new();
    for rule in &program.rules {
        for eff in &rule.effects {
            if let Effect::Add(x) = eff {
                if let Some(v) = x.literal_num() {
                    if v.abs() < lo || v.abs() > hi {
                        out.push(format!(
                            "rule {}: bonus magnitude {v} is outside [{lo}, {hi}]",
                            rule.name
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Dry-run a parsed program on the battery. Entries that lack a referenced
/// field, or belong to a different environment family than `env`, are skipped.
pub fn dry_run(program: &RewardProgram, env: Option<EnvKind>) -> (Vec<ValidationIssue>, Vec<String>) {
    let used = program.fields_used();
    let mut errors = Vec::new();
    let mut advisories = Vec::new();
    let mut state = EpisodeShapingState::default();
    let mut ran = 0;
    for entry in dry_run_battery() {
        if entry.episode_start {
            state = EpisodeShapingState::default();
        }
        if env.is_some_and(|k| k != entry.kind) || !used.iter().all(|f| entry.provides(*f)) {
            continue;
        }
        ran += 1;
        match evaluate_in_place(program, &entry.transition(), &mut state, EvalOptions::default()) {
            Ok(out) => {
                if out.saturations > 0 {
                    advisories.push(format!(
                        "{}: {} arithmetic result(s) saturated at ±1e9",
                        entry.label, out.saturations
                    ));
                }
            }
            Err(e) => errors.push(ValidationIssue {
                phase: Phase::DryRun,
                message: format!("{}: {e}", entry.label),
            }),
        }
    }
    if ran == 0 && !program.rules.is_empty() {
        let names: Vec<&str> = used.iter().map(|f| f.name()).collect();
        errors.push(ValidationIssue {
            phase: Phase::DryRun,
            message: format!(
                "no dry-run transition provides all referenced fields ({})",
                names.join(", ")
            ),
        });
    }
    (errors, advisories)
}

/// Parse, typecheck and dry-run.
pub fn validate(text: &str, env: Option<EnvKind>) -> ValidationReport {
    match parse(text) {
        Ok(p) => validate_program(&p, env),
        Err(e @ DslError::Typecheck { .. }) => ValidationReport::failed(Phase::Typecheck, &e),
        Err(e) => ValidationReport::failed(Phase::Parse, &e),
    }
}

pub fn validate_program(program: &RewardProgram, env: Option<EnvKind>) -> ValidationReport {
    if let Err(e) = typecheck(program, env) {
        return ValidationReport::failed(Phase::Typecheck, &e);
    }
    let (errors, mut advisories) = dry_run(program, env);
    let mut all = magnitude_advisories(program);
    all.append(&mut advisories);
    ValidationReport {
        ok: errors.is_empty(),
        errors,
        advisories: all,
    }
}
