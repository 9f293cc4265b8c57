//! Offline stand-in for a language model: replays fixed program texts.

use serde::{Deserialize, Serialize};

use super::{GeneratorClient, PromptBundle};
use crate::envs::EnvKind;
use crate::error::{Error, Result};

pub const SCENARIO_NAMES: [&str; 5] = [
    "flooding-then-fix",
    "api-misuse-retry",
    "weak-then-strong",
    "good-one-shot",
    "all-invalid",
];

const GRID_FLOOD: &str = r#"(program
  (rule key_bonus
    (when (and (not (flag key_picked_up)) (contains event_text "picked up") (contains event_text "key")))
    (add 0.2)
    (set_flag key_picked_up))
  (rule door_bonus
    (when (and (not (flag door_opened)) (contains event_text "opened door")))
    (add 0.25)
    (set_flag door_opened))
  ; pays on every forward step
  (rule forward_bonus
    (when (= action 2))
    (add 0.02)))
"#;

const GRID_FIX: &str = r#"(program
  (rule key_bonus
    (when (and (not (flag key_picked_up)) (contains event_text "picked up") (contains event_text "key")))
    (add 0.2)
    (set_flag key_picked_up))
  (rule door_bonus
    (when (and (not (flag door_opened)) (contains event_text "opened door")))
    (add 0.3)
    (set_flag door_opened))
  ; once the key is held, pay for each new rightmost column
  (rule progress
    (when (and (flag key_picked_up) (> agent_x (num max_x))))
    (add 0.05)
    (set_num max_x agent_x)))
"#;

const GRID_WEAK: &str = r#"(program
  (rule started
    (when (not (flag started)))
    (add 0.01)
    (set_flag started))
  (rule halfway
    (when (and (not (flag halfway)) (> step_count 20)))
    (add 0.01)
    (set_flag halfway)))
"#;

const GRID_API_MISUSE: &str = r#"(program
  (rule face_east
    (when (and (not (flag turned)) (= agent_dir 0)))
    (add 0.1)
    (set_flag turned)))
"#;

const REACH_FLOOD: &str = r#"(program
  (rule near
    (when (< distance_to_target 3))
    (add 0.05)))
"#;

const REACH_FIX: &str = r#"(program
  (rule init
    (when (not (flag init)))
    (set_num best distance_to_target)
    (set_flag init))
  ; pay each time the best distance improves by 0.05
  (rule closer
    (when (< (+ distance_to_target 0.05) (num best)))
    (add 0.1)
    (set_num best distance_to_target)))
"#;

const REACH_WEAK: &str = r#"(program
  (rule started
    (when (not (flag started)))
    (add 0.01)
    (set_flag started)))
"#;

const REACH_API_MISUSE: &str = r#"(program
  (rule grip
    (when (and (not (flag g)) (> gripper_torque 0)))
    (add 0.1)
    (set_flag g)))
"#;

const DENSE_FLOOD: &str = r#"(program
  (rule moving
    (when (> velocity 0))
    (add 0.5)))
"#;

const DENSE_FIX: &str = r#"(program
  ; pay when velocity beats the best seen this episode
  (rule faster
    (when (> velocity (num best_v)))
    (add 0.05)
    (set_num best_v velocity)))
"#;

const DENSE_WEAK: &str = r#"(program
  (rule started
    (when (not (flag started)))
    (add 0.01)
    (set_flag started)))
"#;

const DENSE_API_MISUSE: &str = r#"(program
  (rule upright
    (when (and (not (flag u)) (> torso_height 1)))
    (add 0.1)
    (set_flag u)))
"#;

const INVALID: [&str; 4] = [
    "(program (rule broken (when (contains event_text \"key\")",
    "(program (rule r (when (> gripper_torque 0)) (add 0.1)))",
    "(program (rule r (when (contains step_count \"key\")) (add 0.1)))",
    "(program (rule r (when terminated) (add 0.1)) (rule r (when truncated) (add 0.1)))",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedScenario {
    pub name: String,
    pub programs: Vec<String>,
}

impl ScriptedScenario {
    pub fn new(name: impl Into<String>, programs: Vec<String>) -> Self {
        ScriptedScenario {
            name: name.into(),
            programs,
        }
    }

    /// One of the built-in scenarios, with programs suited to `kind`.
    /// Each has enough entries for a default-length iterative run.
    pub fn library(name: &str, kind: EnvKind) -> Result<Self> {
        let (flood, fix, weak, misuse) = match kind {
            EnvKind::Grid => (GRID_FLOOD, GRID_FIX, GRID_WEAK, GRID_API_MISUSE),
            EnvKind::Reach => (REACH_FLOOD, REACH_FIX, REACH_WEAK, REACH_API_MISUSE),
            EnvKind::Dense => (DENSE_FLOOD, DENSE_FIX, DENSE_WEAK, DENSE_API_MISUSE),
        };
        let seq: Vec<&str> = match name {
            "flooding-then-fix" => vec![flood, fix, fix, fix],
            "api-misuse-retry" => vec![misuse, fix, fix, fix, fix],
            "weak-then-strong" => vec![weak, fix, fix, fix],
            "good-one-shot" => vec![fix, fix, fix, fix],
            "all-invalid" => INVALID.to_vec(),
            other => {
                return Err(Error::Config(format!(
                    "unknown scripted scenario {other:?}; known: {}",
                    SCENARIO_NAMES.join(", ")
                )))
            }
        };
        Ok(ScriptedScenario::new(name, seq.into_iter().map(String::from).collect()))
    }

    /// `program` repeated `n` times.
    pub fn repeat(name: impl Into<String>, program: &str, n: usize) -> Self {
        ScriptedScenario::new(name, vec![program.to_string(); n])
    }
}

/// Returns the scenario's programs in order, one per call, wrapped in a
/// code block the way a chat model would.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    scenario: ScriptedScenario,
    calls: usize,
}

impl ScriptedGenerator {
    pub fn new(scenario: ScriptedScenario) -> Self {
        ScriptedGenerator { scenario, calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn scenario(&self) -> &ScriptedScenario {
        &self.scenario
    }
}

impl GeneratorClient for ScriptedGenerator {
    fn complete(&mut self, _prompt: &PromptBundle, _temperature: f64) -> Result<String> {
        let text = self.scenario.programs.get(self.calls).ok_or_else(|| {
            Error::Client(format!(
                "scripted scenario {:?} exhausted after {} calls",
                self.scenario.name, self.calls
            ))
        })?;
        self.calls += 1;
        Ok(format!("Here is the program.\n\n```\n{}\n```\n", text.trim_end()))
    }

    fn describe(&self) -> String {
        format!("scripted:{}", self.scenario.name)
    }

    fn skip_cached(&mut self, calls: usize) {
        self.calls += calls;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{lint_for_env, parse, validate, LintCategory};

    #[test]
    fn scenario_programs_behave_as_labelled() {
        for kind in [EnvKind::Grid, EnvKind::Reach, EnvKind::Dense] {
            let flood = ScriptedScenario::library("flooding-then-fix", kind).unwrap();
            let p0 = parse(&flood.programs[0]).unwrap();
            assert!(lint_for_env(&p0, Some(kind)).has(LintCategory::Flooding), "{kind:?}");
            for fix in &flood.programs[1..] {
                let p = parse(fix).unwrap();
                assert!(validate(fix, Some(kind)).ok, "{kind:?}");
                assert!(!lint_for_env(&p, Some(kind)).has(LintCategory::Flooding), "{kind:?}");
            }
            let weak = ScriptedScenario::library("weak-then-strong", kind).unwrap();
            let w = parse(&weak.programs[0]).unwrap();
            assert!(lint_for_env(&w, Some(kind)).has(LintCategory::WeakShaping), "{kind:?}");
            let misuse = ScriptedScenario::library("api-misuse-retry", kind).unwrap();
            assert!(!validate(&misuse.programs[0], Some(kind)).ok);
            for bad in ScriptedScenario::library("all-invalid", kind).unwrap().programs {
                assert!(!validate(&bad, Some(kind)).ok, "{bad}");
            }
        }
        assert!(ScriptedScenario::library("nope", EnvKind::Grid).is_err());
    }

    #[test]
    fn replay_is_deterministic_and_bounded() {
        let sc = ScriptedScenario::library("good-one-shot", EnvKind::Grid).unwrap();
        let prompt = PromptBundle {
            system_text: String::new(),
            user_text: String::new(),
            mode: super::super::PromptMode::Generation,
        };
        let mut a = ScriptedGenerator::new(sc.clone());
        let mut b = ScriptedGenerator::new(sc);
        for _ in 0..4 {
            assert_eq!(a.complete(&prompt, 0.4).unwrap(), b.complete(&prompt, 0.4).unwrap());
        }
        assert!(matches!(a.complete(&prompt, 0.4), Err(Error::Client(_))));
    }
}
