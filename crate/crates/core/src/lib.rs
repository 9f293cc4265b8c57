//! Reward-shaping programs for sparse RL tasks, with PPO training, failure
//! diagnostics, LLM-driven generation and refinement, and statistics.

pub mod analytics;
pub mod diagnostics;
pub mod dsl;
pub mod envs;
pub mod error;
pub mod generator;
pub mod orchestrator;
pub mod ppo;

pub use diagnostics::{diagnose, DiagnosticConfig, DiagnosticFlag, DiagnosticMode, Diagnosis};
pub use dsl::{parse, validate, LintCategory, RewardProgram};
pub use envs::{EnvId, EnvKind, EnvSpec};
pub use error::{Error, Result};
pub use generator::{generate_program, GeneratorClient, PromptBundle, PromptMode, ScriptedGenerator, ScriptedScenario};
pub use ppo::{evaluate_final, train, ProbeMetrics, TrainConfig, TrainRunLog};
pub use orchestrator::{
    run_best_of_n, run_condition, run_iterative, Condition, ExperimentPlan, RefinementConfig, RunRecord, RunStatus,
    CANONICAL_SEEDS,
};
pub use analytics::{crossed_anova, holm_bonferroni, summarize_batch, welch_test, BootstrapSpec, TestResult};
