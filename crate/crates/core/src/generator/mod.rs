//! Prompt construction, model clients, and the validate-and-retry loop.

mod http;
mod prompt;
mod scripted;

use serde::{Deserialize, Serialize};

pub use http::{response_text, HttpClient, ProviderConfig};
pub use prompt::{
    build_generation_prompt, build_refinement_prompt, with_validation_feedback, PromptBundle, PromptMode,
    RefineInputs, FAILURE_MODES_BLOCK, METRICS_ONLY_SENTENCE, SYSTEM_TEXT,
};
pub use scripted::{ScriptedGenerator, ScriptedScenario, SCENARIO_NAMES};

use crate::dsl::{parse, validate, RewardProgram, ValidationReport};
use crate::envs::EnvKind;
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.4;

/// Anything that turns a prompt into reply text.
pub trait GeneratorClient {
    fn complete(&mut self, prompt: &PromptBundle, temperature: f64) -> Result<String>;

    /// Short label for logs and manifests.
    fn describe(&self) -> String;

    /// Called when a run reuses `calls` earlier replies from a shared cache
    /// instead of asking. Replaying clients advance past them.
    fn skip_cached(&mut self, _calls: usize) {}
}

impl<C: GeneratorClient + ?Sized> GeneratorClient for Box<C> {
    fn complete(&mut self, prompt: &PromptBundle, temperature: f64) -> Result<String> {
        (**self).complete(prompt, temperature)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }

    fn skip_cached(&mut self, calls: usize) {
        (**self).skip_cached(calls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3 }
    }
}

/// One prompt, the raw reply, and what validation made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: PromptBundle,
    pub completion: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub program: RewardProgram,
    pub attempts: usize,
    pub exchanges: Vec<Exchange>,
}

/// The first fenced code block, or the whole reply when there is none.
pub fn extract_program(reply: &str) -> &str {
    if let Some(start) = reply.find("```") {
        let rest = &reply[start + 3..];
        // Skip an info string such as ```lisp.
        let body = rest.find('\n').map_or(rest, |nl| &rest[nl + 1..]);
        if let Some(end) = body.find("```") {
            return body[..end].trim();
        }
    }
    reply.trim()
}

/// Ask, validate, and re-ask with the validator's errors until a program
/// passes or the retry budget runs out.
pub fn generate_program(
    client: &mut dyn GeneratorClient,
    prompt: &PromptBundle,
    policy: &RetryPolicy,
    temperature: f64,
    env: EnvKind,
) -> Result<Generated> {
    let mut exchanges = Vec::new();
    let mut current = prompt.clone();
    for attempt in 1..=policy.max_retries + 1 {
        let reply = client.complete(&current, temperature)?;
        let text = extract_program(&reply).to_string();
        let report = validate(&text, Some(env));
        exchanges.push(Exchange {
            prompt: current.clone(),
            completion: reply,
            report: report.clone(),
        });
        if report.ok {
            let program = parse(&text)?;
            return Ok(Generated {
                program,
                attempts: attempt,
                exchanges,
            });
        }
        current = with_validation_feedback(prompt, &text, &report.summary_lines());
    }
    Err(Error::GenerationFailed {
        attempts: exchanges.len(),
        reports: exchanges.iter().map(|e| e.report.clone()).collect(),
        exchanges,
    })
}
