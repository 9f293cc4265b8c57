//! Hand-written shaping programs, one per environment.

use crate::dsl::{parse, RewardProgram};
use crate::envs::EnvId;

const DOORKEY: &str = r#"(program
  (rule key_bonus
    (when (and (not (flag key)) (contains event_text "picked up yellow key")))
    (add 0.2)
    (set_flag key))
  (rule door_bonus
    (when (and (not (flag door)) (contains event_text "opened door")))
    (add 0.3)
    (set_flag door)))
"#;

const LAVAGAP: &str = r#"(program
  (rule progress
    (when (> agent_x (num best_x)))
    (add 0.05)
    (set_num best_x agent_x))
  (rule lava
    (when (contains event_text "stepped in lava"))
    (add -0.1)))
"#;

// The second door rule comes first so it cannot fire on the step that
// sets the first door's flag.
const KEYCORRIDOR: &str = r#"(program
  (rule key_bonus
    (when (and (not (flag key)) (contains event_text "picked up yellow key")))
    (add 0.2)
    (set_flag key))
  (rule locked_door_bonus
    (when (and (flag grey_door) (not (flag locked_door)) (contains event_text "opened door")))
    (add 0.3)
    (set_flag locked_door))
  (rule grey_door_bonus
    (when (and (not (flag grey_door)) (contains event_text "opened door")))
    (add 0.1)
    (set_flag grey_door))
  (rule drop_key_bonus
    (when (and (flag locked_door) (not (flag dropped)) (contains event_text "dropped yellow key")))
    (add 0.1)
    (set_flag dropped)))
"#;

const POINTREACH: &str = r#"(program
  (rule init
    (when (not (flag init)))
    (set_num best distance_to_target)
    (set_flag init))
  (rule closer
    (when (< (+ distance_to_target 0.1) (num best)))
    (add 0.1)
    (set_num best distance_to_target)))
"#;

const LINERUNNER: &str = r#"(program
  (rule faster
    (when (> (- velocity 0.1) (num best_v)))
    (add 0.05)
    (set_num best_v velocity)))
"#;

pub fn reference_source(env: EnvId) -> &'static str {
    match env {
        EnvId::DoorKey5 | EnvId::DoorKey8 => DOORKEY,
        EnvId::LavaGapS5 => LAVAGAP,
        EnvId::KeyCorridorS3R1 => KEYCORRIDOR,
        EnvId::PointReach => POINTREACH,
        EnvId::LineRunner => LINERUNNER,
    }
}

/// The hand-crafted program for `env`.
pub fn reference_program(env: EnvId) -> RewardProgram {
    parse(reference_source(env)).expect("built-in programs parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{lint_for_env, validate, LintCategory};

    #[test]
    fn references_validate_without_flooding() {
        for env in EnvId::ALL {
            let kind = env.spec().kind;
            let r = validate(reference_source(env), Some(kind));
            assert!(r.ok, "{env:?}: {:?}", r.errors);
            assert!(r.advisories.is_empty(), "{env:?}: {:?}", r.advisories);
            let lint = lint_for_env(&reference_program(env), Some(kind));
            assert!(!lint.has(LintCategory::Flooding), "{env:?}");
        }
    }
}
