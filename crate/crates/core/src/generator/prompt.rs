use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticFlag, Diagnosis, ReturnTrend};
use crate::dsl::{field_available, Field, ADVISORY_MAGNITUDE};
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{contract, Result};
use crate::ppo::ProbeMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PromptMode {
    Generation,
    RefineFull,
    RefineStaticVocab,
    RefineMetricsOnly,
    RefineDense,
}

impl PromptMode {
    pub const REFINE: [PromptMode; 4] = [
        PromptMode::RefineFull,
        PromptMode::RefineStaticVocab,
        PromptMode::RefineMetricsOnly,
        PromptMode::RefineDense,
    ];

    pub fn is_refine(self) -> bool {
        self != PromptMode::Generation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub mode: PromptMode,
}

impl PromptBundle {
    /// System and user text together, for substring checks and archiving.
    pub fn full_text(&self) -> String {
        format!("{}\n\n{}", self.system_text, self.user_text)
    }
}

pub const SYSTEM_TEXT: &str = "You write reward-shaping programs in a small S-expression language. \
Reply with exactly one program inside a code block.";

/// Fixed instruction used by the metrics-only refinement mode.
pub const METRICS_ONLY_SENTENCE: &str = "the results are suboptimal; write an improved reward function";

/// Static taxonomy block shown in the full and static-vocabulary modes.
pub const FAILURE_MODES_BLOCK: &str = "# COMMON FAILURE MODES TO AVOID
1. Reward flooding: never add a bonus that can fire on every step. Gate each bonus with a flag so it fires once.
2. Action-index confusion: grid actions are indices (0=left turn, 2=forward), NOT compass directions.
3. Too-weak shaping: a +0.1 bonus may be too small to matter. Consider position-based progress tracking.";

const DENSE_GUIDANCE: &str = "# GUIDANCE FOR DENSE-REWARD TASKS
- The native reward already pays forward velocity at every step; shaping should sharpen that signal, not replace it.
- Reward improvements in velocity over the best value seen so far rather than paying on every step.
- Keep added terms small compared with the native per-step reward of about 1.";

fn signature_block(kind: EnvKind) -> String {
    let mut s = String::from(
        "# PROGRAM SIGNATURE
A program is an ordered list of rules. Each rule has a condition and effects;
effects run in order when the condition is true, and the program's adds are
summed on top of the environment's own reward.

(program
  (rule NAME
    (when CONDITION)
    (add NUMBER-EXPR)          ; add to this step's reward
    (set_flag KEY)             ; per-episode boolean, starts false
    (set_num KEY NUMBER-EXPR))) ; per-episode number, starts 0

Expressions: literals, fields, (flag KEY), (num KEY),
(contains TEXT TEXT) (case-insensitive), (= a b) (< a b) (> a b) (<= a b) (>= a b),
(and ...) (or ...) (not x), (+ a b) (- a b) (* a b) (min a b) (max a b) (abs x).
No loops, no division, no functions. Per-episode state resets every episode.
",
    );
    s.push_str("Fields available in this environment:\n");
    for f in Field::ALL {
        if field_available(f, kind) {
            let _ = writeln!(s, "  {} : {}", f.name(), field_doc(f));
        }
    }
    if kind == EnvKind::Grid {
        s.push_str(
            "Actions: 0=left (turn), 1=right (turn), 2=forward, 3=pickup, 4=drop, 5=toggle, 6=done.\n",
        );
    }
    s
}

fn field_doc(f: Field) -> &'static str {
    match f {
        Field::EventText => "text describing what happened this step, empty if nothing",
        Field::Carrying => "text name of the held object, or \"nothing\"",
        Field::AgentX => "agent column (integer)",
        Field::AgentY => "agent row (integer)",
        Field::StepCount => "steps taken so far this episode",
        Field::MaxSteps => "episode step limit",
        Field::Action => "action index taken this step",
        Field::RawReward => "the environment's own reward this step",
        Field::Terminated => "true when the episode ended by success or failure",
        Field::Truncated => "true when the episode hit the step limit",
        Field::DistanceToTarget => "distance from the point to its target",
        Field::Velocity => "current forward velocity",
    }
}

fn principles(kind: EnvKind) -> String {
    let (lo, hi) = ADVISORY_MAGNITUDE;
    let mut s = String::from("# DESIGN PRINCIPLES\n1. The environment's own reward is always kept; your program only adds to it.\n");
    match kind {
        EnvKind::Grid => s.push_str(
            "2. Give one-time bonuses (+0.1 to +0.3) for subgoals.\n\
             3. Use flags so each bonus fires only ONCE per episode.\n\
             4. Detect subgoals through event_text, e.g. (contains event_text \"picked up\").\n",
        ),
        EnvKind::Reach => s.push_str(
            "2. Prefer distance-based progress bonuses: pay when distance_to_target drops below the best distance seen so far.\n\
             3. Use (num KEY) to remember the best distance so progress is paid once per improvement.\n\
             4. event_text is secondary here; progress is measured by distance.\n",
        ),
        EnvKind::Dense => s.push_str(
            "2. Reward improvement in velocity, not mere motion.\n\
             3. Use (num KEY) to remember the best value seen so far.\n\
             4. There are no discrete events in this task.\n",
        ),
    }
    let _ = write!(
        s,
        "5. Keep bonuses small vs goal reward (~1.0); every added magnitude should lie between {lo} and {hi}.\n\
         6. The program must be self-contained and use only the fields listed above.\n"
    );
    s
}

fn header(env: &EnvSpec) -> String {
    let mut s = String::from(
        "You are an expert reward designer for reinforcement learning.\n\n\
         Given a description of an environment, write a reward-shaping program that helps a PPO agent learn faster.\n\n# ENVIRONMENT\n",
    );
    s.push_str(env.description_text);
    s.push('\n');
    if !env.event_vocabulary.is_empty() {
        s.push_str("Possible event_text values: ");
        let quoted: Vec<String> = env.event_vocabulary.iter().map(|e| format!("\"{e}\"")).collect();
        s.push_str(&quoted.join(", "));
        s.push('\n');
    }
    s.push('\n');
    s.push_str(&signature_block(env.kind));
    s.push('\n');
    s.push_str(&principles(env.kind));
    s
}

pub fn build_generation_prompt(env: &EnvSpec) -> PromptBundle {
    PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: header(env),
        mode: PromptMode::Generation,
    }
}

/// Everything a refinement prompt can draw on.
#[derive(Debug, Clone)]
pub struct RefineInputs<'a> {
    pub program_text: &'a str,
    pub metrics: &'a ProbeMetrics,
    pub diagnosis: &'a Diagnosis,
    /// First- and second-half mean return of the probe, for dense mode.
    pub trend: Option<ReturnTrend>,
}

fn results_block(m: &ProbeMetrics, with_success: bool) -> String {
    let mut s = format!("# TRAINING RESULTS\n- Episodes trained: {}\n", m.episodes);
    if with_success {
        let _ = writeln!(s, "- Success rate: {:.3}", m.success_rate);
    }
    let _ = writeln!(s, "- Mean reward: {:.3}", m.mean_reward);
    s
}

fn issue_line(flag: DiagnosticFlag, d: &Diagnosis) -> String {
    let vals = d
        .trigger_values
        .get(&flag)
        .map(|v| {
            v.iter()
                .map(|(k, x)| format!("{k}={x:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .unwrap_or_default();
    let hint = match flag {
        DiagnosticFlag::RewardHacking => "high shaped reward without task success; the agent collects bonuses instead of finishing",
        DiagnosticFlag::ShapingWeak => "both reward and success are low; the shaping signal is too small to guide exploration",
        DiagnosticFlag::Plateau => "success stopped improving partway; the agent is stuck on an intermediate subgoal",
        DiagnosticFlag::ReturnDeclining => "second-half return fell below 90% of the first half; the shaping destabilizes learning",
        DiagnosticFlag::ReturnStagnated => "return barely moved between halves; the shaping adds too little signal",
    };
    format!("- {} ({vals}): {hint}", flag.message())
}

pub fn build_refinement_prompt(env: &EnvSpec, inputs: &RefineInputs<'_>, mode: PromptMode) -> Result<PromptBundle> {
    let d = inputs.diagnosis;
    match mode {
        PromptMode::Generation => return Err(contract("refinement prompt requested in GENERATION mode")),
        PromptMode::RefineDense => {
            if let Some(f) = d.flags.iter().find(|f| !f.is_dense()) {
                return Err(contract(format!("{f} cannot be reported in REFINE_DENSE mode")));
            }
        }
        PromptMode::RefineFull | PromptMode::RefineStaticVocab => {
            if let Some(f) = d.flags.iter().find(|f| f.is_dense()) {
                return Err(contract(format!("{f} is a dense-mode flag; use REFINE_DENSE")));
            }
        }
        // Metrics-only drops diagnoses wholesale, so any flags are fine.
        PromptMode::RefineMetricsOnly => {}
    }
    let mut s = header(env);
    s.push_str("\n# CURRENT REWARD PROGRAM\n```\n");
    s.push_str(inputs.program_text.trim_end());
    s.push_str("\n```\n\n");
    match mode {
        PromptMode::RefineFull | PromptMode::RefineStaticVocab => {
            s.push_str(&results_block(inputs.metrics, true));
            if mode == PromptMode::RefineFull {
                s.push_str("\n# DIAGNOSED ISSUES\n");
                if d.flags.is_empty() {
                    s.push_str("- none\n");
                }
                for f in &d.flags {
                    s.push_str(&issue_line(*f, d));
                    s.push('\n');
                }
            }
            s.push('\n');
            s.push_str(FAILURE_MODES_BLOCK);
            s.push_str("\n\nWrite an improved reward program.\n");
        }
        PromptMode::RefineMetricsOnly => {
            s.push_str(&results_block(inputs.metrics, true));
            s.push('\n');
            s.push_str(METRICS_ONLY_SENTENCE);
            s.push('\n');
        }
        PromptMode::RefineDense => {
            s.push_str(&results_block(inputs.metrics, false));
            if let Some(t) = inputs.trend {
                let _ = writeln!(
                    s,
                    "- Mean return, first half of probe: {:.3}\n- Mean return, second half of probe: {:.3}",
                    t.first_half_mean, t.second_half_mean
                );
            }
            s.push_str("\n# RETURN TREND\n");
            if d.flags.is_empty() {
                s.push_str("- return improved between halves\n");
            }
            for f in &d.flags {
                s.push_str(&issue_line(*f, d));
                s.push('\n');
            }
            s.push('\n');
            s.push_str(DENSE_GUIDANCE);
            s.push_str("\n\nWrite an improved reward program.\n");
        }
        PromptMode::Generation => unreachable!(),
    }
    Ok(PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: s,
        mode,
    })
}

/// Re-prompt carrying the validator's complaints about the last attempt.
pub fn with_validation_feedback(prompt: &PromptBundle, rejected: &str, errors: &[String]) -> PromptBundle {
    let mut user = prompt.user_text.clone();
    user.push_str("\n# VALIDATION ERRORS\nYour previous program was rejected:\n```\n");
    user.push_str(rejected.trim_end());
    user.push_str("\n```\n");
    for e in errors {
        let _ = writeln!(user, "- {e}");
    }
    user.push_str("Return a corrected program.\n");
    PromptBundle {
        system_text: prompt.system_text.clone(),
        user_text: user,
        mode: prompt.mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{diagnose_sparse, DiagnosticConfig};
    use crate::envs::EnvId;

    fn metrics(sr: f64, mr: f64) -> ProbeMetrics {
        ProbeMetrics {
            success_rate: sr,
            mean_reward: mr,
            mean_raw_return: 0.0,
            episodes: 500,
            sr_history: vec![sr; 5],
        }
    }

    #[test]
    fn generation_prompt_contents() {
        let p = build_generation_prompt(EnvId::DoorKey8.spec());
        let t = p.full_text();
        assert!(t.contains("picked up"));
        assert!(t.contains("0=left") && t.contains("2=forward"));
        assert!(t.contains("0.01") && t.contains("0.5"));
        assert!(t.contains("Keep bonuses small vs goal reward"));
        let reach = build_generation_prompt(EnvId::PointReach.spec()).full_text();
        assert!(reach.contains("distance-based progress"));
        assert!(!reach.contains("agent_x :"));
    }

    #[test]
    fn refine_modes_respect_exclusions() {
        let m = metrics(0.1, 0.8);
        let d = diagnose_sparse(&m, &DiagnosticConfig::default()).unwrap();
        let env = EnvId::DoorKey8.spec();
        let inputs = RefineInputs {
            program_text: "(program)",
            metrics: &m,
            diagnosis: &d,
            trend: None,
        };
        let full = build_refinement_prompt(env, &inputs, PromptMode::RefineFull).unwrap().full_text();
        assert!(full.contains("REWARD HACKING DETECTED") && full.contains("Reward flooding"));
        let st = build_refinement_prompt(env, &inputs, PromptMode::RefineStaticVocab).unwrap().full_text();
        assert!(st.contains("COMMON FAILURE MODES TO AVOID") && !st.contains("DETECTED"));
        let mo = build_refinement_prompt(env, &inputs, PromptMode::RefineMetricsOnly).unwrap().full_text();
        assert!(!mo.contains("DETECTED") && !mo.contains("FAILURE MODES"));
        assert!(mo.contains(METRICS_ONLY_SENTENCE) && mo.contains("0.100") && mo.contains("0.800"));
        assert!(build_refinement_prompt(env, &inputs, PromptMode::RefineDense).is_err());
        assert!(build_refinement_prompt(env, &inputs, PromptMode::Generation).is_err());
    }

    #[test]
    fn dense_prompt_has_no_success_rate() {
        let m = metrics(0.0, 300.0);
        let d = crate::diagnostics::diagnose_dense(&[300.0, 300.0, 301.0, 301.0], &DiagnosticConfig::dense()).unwrap();
        let inputs = RefineInputs {
            program_text: "(program)",
            metrics: &m,
            diagnosis: &d,
            trend: Some(ReturnTrend {
                first_half_mean: 300.0,
                second_half_mean: 301.0,
            }),
        };
        let p = build_refinement_prompt(EnvId::LineRunner.spec(), &inputs, PromptMode::RefineDense).unwrap();
        let t = p.full_text().to_lowercase();
        assert!(!t.contains("success rate"));
        assert!(t.contains("return stagnated"));
    }

    #[test]
    fn prompts_are_deterministic() {
        let a = build_generation_prompt(EnvId::LavaGapS5.spec());
        let b = build_generation_prompt(EnvId::LavaGapS5.spec());
        assert_eq!(a, b);
    }
}
