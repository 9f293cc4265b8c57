//! Reward-shaping programs.
//!
//! A small S-expression language with no loops, recursion or user functions,
//! so every program terminates in time linear in its size. A program is an
//! ordered list of rules; each rule fires when its condition holds and then
//! adds to the reward or writes per-episode state.
//!
//! ```text
//! (program
//!   (rule key_bonus
//!     (when (and (not (flag key_picked_up)) (contains event_text "picked up")))
//!     (add 0.2)
//!     (set_flag key_picked_up)))
//! ```

mod ast;
mod interp;
mod lint;
mod parse;
mod potential;
mod print;
mod typecheck;
mod validate;

use serde::{Deserialize, Serialize};

pub use ast::{Effect, Expr, Field, Op, RewardProgram, Rule, Type};
pub use interp::{
    evaluate, evaluate_in_place, EpisodeShapingState, EvalOptions, StepShaping, Transition, SATURATION_LIMIT,
};
pub use lint::{lint, lint_for_env, lint_source, LintCategory, LintFinding, LintReport, WEAK_BONUS};
pub use parse::parse;
pub use potential::{check_potential_equivalence, milestone_program, potential, PotentialCheck};
pub use print::{print, print_expr};
pub use typecheck::{field_available, typecheck};
pub use validate::{
    dry_run, dry_run_battery, validate, validate_program, BatteryEntry, Phase, ValidationIssue, ValidationReport,
    ADVISORY_MAGNITUDE, BATTERY_VERSION,
};

pub const MAX_RULES: usize = 32;
pub const MAX_DEPTH: usize = 16;
pub const MAX_SOURCE_BYTES: usize = 64 * 1024;

/// File extension for stored programs.
pub const PROGRAM_EXTENSION: &str = "rsp";

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("typecheck error{}: {message}", rule.as_ref().map(|r| format!(" in rule {r}")).unwrap_or_default())]
    Typecheck {
        rule: Option<String>,
        /// The unknown or unavailable name, when there is one.
        name: Option<String>,
        message: String,
    },
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("runtime error in rule {rule}: {message}")]
    Runtime { rule: String, message: String },
}

/// Parse and canonicalize: the returned text is the normative formatting.
pub fn canonicalize(text: &str) -> Result<String, DslError> {
    parse(text).map(|p| print(&p))
}
