//! Experimental conditions: iterative refinement, one-shot, baselines,
//! best-of-N, budget-matched variants, seed batches and sweeps.

mod plan;
mod reference;
mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use plan::{apply_sweep_value, run_crossed, run_plan, run_sweep, ConditionSpec, CrossedBatch, CrossedSpec, ExperimentPlan, PlanOverrides, SweepAxis, SweepBatch, ThresholdParam};
pub use reference::{reference_program, reference_source};
pub use store::{list_records, load_record, plan_digest, record_dir, save_record, RunDir};

use crate::diagnostics::{diagnose, return_trend, DiagnosticConfig, DiagnosticMode, Diagnosis};
use crate::dsl::{lint_for_env, print, LintFinding, RewardProgram};
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::generator::{
    build_generation_prompt, build_refinement_prompt, generate_program, Exchange, GeneratorClient, PromptMode,
    RefineInputs, RetryPolicy, DEFAULT_TEMPERATURE,
};
use crate::ppo::{evaluate_final, train, ProbeMetrics, TrainConfig, TrainRunLog};

pub const CANONICAL_SEEDS: [u64; 10] = [42, 123, 456, 789, 1024, 2048, 3141, 4096, 5555, 7777];

/// Episodes at the end of a run that metrics are computed over.
pub const EVAL_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    NoShaping,
    OneShot,
    Iterative,
    HandCrafted,
    Rnd { coef: f64 },
    BestOfN { n: usize },
    NoShapingExtended,
    OneShotExtended,
}

impl Condition {
    pub fn needs_client(self) -> bool {
        !matches!(
            self,
            Condition::NoShaping | Condition::HandCrafted | Condition::Rnd { .. } | Condition::NoShapingExtended
        )
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::NoShaping => f.write_str("NO_SHAPING"),
            Condition::OneShot => f.write_str("ONE_SHOT"),
            Condition::Iterative => f.write_str("ITERATIVE"),
            Condition::HandCrafted => f.write_str("HAND_CRAFTED"),
            Condition::Rnd { coef } => write!(f, "RND({coef})"),
            Condition::BestOfN { n } => write!(f, "BEST_OF_N({n})"),
            Condition::NoShapingExtended => f.write_str("NO_SHAPING_EXTENDED"),
            Condition::OneShotExtended => f.write_str("ONE_SHOT_EXTENDED"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub tau: f64,
    pub max_iterations: usize,
    pub probe_episodes: usize,
    pub full_episodes: usize,
    pub prompt_mode: PromptMode,
    pub diagnostics: DiagnosticConfig,
    pub temperature: f64,
    pub retry: RetryPolicy,
    /// Trainer settings; the episode count is overridden per phase.
    pub train: TrainConfig,
}

impl RefinementConfig {
    /// Defaults for `env`. The dense task gets return-trend diagnostics
    /// and the dense prompt.
    pub fn for_env(env: EnvId) -> Self {
        let grid = env.is_grid();
        let dense = !env.spec().has_binary_success;
        RefinementConfig {
            tau: 0.95,
            max_iterations: 3,
            probe_episodes: if grid { 500 } else { 200 },
            full_episodes: if grid { 3000 } else { 1000 },
            prompt_mode: if dense { PromptMode::RefineDense } else { PromptMode::RefineFull },
            diagnostics: if dense { DiagnosticConfig::dense() } else { DiagnosticConfig::default() },
            temperature: DEFAULT_TEMPERATURE,
            retry: RetryPolicy::default(),
            train: TrainConfig::for_env(env),
        }
    }

    /// Success-based diagnostics and the full prompt, even on a dense task.
    pub fn with_sparse_diagnostics(mut self) -> Self {
        self.diagnostics = self.diagnostics.with_mode(DiagnosticMode::Sparse);
        self.diagnostics.enabled.reward_hacking = true;
        self.prompt_mode = PromptMode::RefineFull;
        self
    }

    /// K·N_p + N_f.
    pub fn iterative_budget(&self) -> usize {
        self.max_iterations * self.probe_episodes + self.full_episodes
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.probe_episodes == 0 || self.full_episodes == 0 {
            return Err(Error::Config("probe and full episode counts must be positive".into()));
        }
        if self.prompt_mode == PromptMode::Generation {
            return Err(Error::Config("refinement needs a REFINE_* prompt mode".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    /// Canonical program text; absent when generation failed.
    pub program: Option<String>,
    pub attempts: usize,
    pub exchanges: Vec<Exchange>,
    pub lint: Vec<LintFinding>,
    /// Whether the program was taken from the shared iteration-0 cache.
    #[serde(default)]
    pub reused: bool,
    pub probe: Option<ProbeMetrics>,
    pub diagnosis: Option<Diagnosis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    GenerationFailed,
    TrainingAborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: Condition,
    pub prompt_mode: Option<PromptMode>,
    pub env: EnvId,
    pub seed: u64,
    pub iterations: Vec<IterationRecord>,
    /// Best-of-N winner, as an index into `iterations`.
    pub selected: Option<usize>,
    /// Canonical text of the program used for the final run.
    pub final_program: Option<String>,
    pub final_metrics: Option<ProbeMetrics>,
    /// Kept in episodes.jsonl next to the record, not inside it.
    #[serde(skip)]
    pub final_log: Option<TrainRunLog>,
    pub total_episodes_used: usize,
    pub status: RunStatus,
    pub failure: Option<String>,
    /// Row of a crossed program × seed batch.
    #[serde(default)]
    pub program_index: Option<usize>,
    /// Success-based diagnostics were forced on a dense task.
    #[serde(default)]
    pub sparse_diagnostics: bool,
}

impl RunRecord {
    fn new(condition: Condition, env: EnvId, seed: u64) -> Self {
        RunRecord {
            condition,
            prompt_mode: None,
            env,
            seed,
            iterations: Vec::new(),
            selected: None,
            final_program: None,
            final_metrics: None,
            final_log: None,
            total_episodes_used: 0,
            status: RunStatus::Ok,
            failure: None,
            program_index: None,
            sparse_diagnostics: false,
        }
    }

    /// Condition plus prompt mode when it is not the default.
    pub fn label(&self) -> String {
        let base = condition_label(self.condition, self.prompt_mode);
        if self.sparse_diagnostics {
            format!("{base}[SPARSE_DIAG]")
        } else {
            base
        }
    }

    /// Headline number: success rate on binary-success tasks, mean raw
    /// return otherwise.
    pub fn final_value(&self) -> Option<f64> {
        let m = self.final_metrics.as_ref()?;
        Some(if self.env.spec().has_binary_success {
            m.success_rate
        } else {
            m.mean_raw_return
        })
    }

    pub fn generation_calls(&self) -> usize {
        self.iterations.iter().filter(|i| !i.reused).map(|i| i.attempts).sum()
    }

    fn fail(&mut self, e: Error) {
        self.status = match e {
            Error::TrainingAborted(_) => RunStatus::TrainingAborted,
            _ => RunStatus::GenerationFailed,
        };
        self.failure = Some(e.to_string());
    }
}

pub fn condition_label(condition: Condition, mode: Option<PromptMode>) -> String {
    match mode {
        Some(m) if condition == Condition::Iterative && m != PromptMode::RefineFull && m != PromptMode::RefineDense => {
            let tag = serde_json::to_value(m).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            format!("{condition}[{}]", tag.trim_start_matches("REFINE_"))
        }
        _ => condition.to_string(),
    }
}

/// Iteration-0 programs keyed by (env, seed), so prompt-mode controls can
/// start from the same program as the full-diagnostic run.
#[derive(Debug, Default)]
pub struct Iteration0Cache {
    entries: Mutex<BTreeMap<(EnvId, u64), IterationRecord>>,
}

impl Iteration0Cache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, env: EnvId, seed: u64) -> Option<IterationRecord> {
        self.entries.lock().unwrap().get(&(env, seed)).cloned()
    }

    fn put(&self, env: EnvId, seed: u64, rec: &IterationRecord) {
        self.entries.lock().unwrap().entry((env, seed)).or_insert_with(|| rec.clone());
    }
}

fn canonical(p: &RewardProgram) -> String {
    print(p)
}

fn generation_record(index: usize, res: Result<crate::generator::Generated>, env: EnvId) -> (IterationRecord, Result<RewardProgram>) {
    match res {
        Ok(g) => {
            let lint = lint_for_env(&g.program, Some(env.spec().kind)).findings;
            (
                IterationRecord {
                    index,
                    program: Some(canonical(&g.program)),
                    attempts: g.attempts,
                    exchanges: g.exchanges,
                    lint,
                    reused: false,
                    probe: None,
                    diagnosis: None,
                },
                Ok(g.program),
            )
        }
        Err(Error::GenerationFailed {
            attempts,
            reports,
            exchanges,
        }) => (
            IterationRecord {
                index,
                program: None,
                attempts,
                exchanges: exchanges.clone(),
                lint: Vec::new(),
                reused: false,
                probe: None,
                diagnosis: None,
            },
            Err(Error::GenerationFailed {
                attempts,
                reports,
                exchanges,
            }),
        ),
        Err(e) => (
            IterationRecord {
                index,
                program: None,
                attempts: 0,
                exchanges: Vec::new(),
                lint: Vec::new(),
                reused: false,
                probe: None,
                diagnosis: None,
            },
            Err(e),
        ),
    }
}

fn first_program(
    env: EnvId,
    client: &mut dyn GeneratorClient,
    cfg: &RefinementConfig,
    seed: u64,
    cache: Option<&Iteration0Cache>,
) -> (IterationRecord, Result<RewardProgram>) {
    if let Some(hit) = cache.and_then(|c| c.get(env, seed)) {
        if let Some(text) = &hit.program {
            if let Ok(p) = crate::dsl::parse(text) {
                client.skip_cached(hit.attempts);
                let rec = IterationRecord {
                    reused: true,
                    probe: None,
                    diagnosis: None,
                    ..hit
                };
                return (rec, Ok(p));
            }
        }
    }
    let prompt = build_generation_prompt(env.spec());
    let res = generate_program(client, &prompt, &cfg.retry, cfg.temperature, env.spec().kind);
    let (rec, prog) = generation_record(0, res, env);
    if let (Some(c), Ok(_)) = (cache, &prog) {
        c.put(env, seed, &rec);
    }
    (rec, prog)
}

/// Probe metrics, diagnosis and per-episode raw returns.
type ProbeOutcome = (ProbeMetrics, Diagnosis, Vec<f64>);

fn probe(env: EnvId, program: &RewardProgram, cfg: &RefinementConfig, seed: u64) -> Result<ProbeOutcome> {
    let log = train(env, Some(program), &cfg.train.clone().with_episodes(cfg.probe_episodes), seed)?;
    let metrics = evaluate_final(&log, EVAL_WINDOW)?;
    let returns = log.raw_returns();
    let diagnosis = diagnose(&metrics, &returns, &cfg.diagnostics)?;
    Ok((metrics, diagnosis, returns))
}

fn full_train(rec: &mut RunRecord, env: EnvId, program: Option<&RewardProgram>, train_cfg: &TrainConfig, episodes: usize, seed: u64) -> Result<()> {
    let log = train(env, program, &train_cfg.clone().with_episodes(episodes), seed)?;
    rec.total_episodes_used += episodes;
    rec.final_metrics = Some(evaluate_final(&log, EVAL_WINDOW)?);
    rec.final_program = program.map(canonical);
    rec.final_log = Some(log);
    Ok(())
}

/// Generate, probe, diagnose and refine up to K times, then train the last
/// program from scratch for the full budget.
pub fn run_iterative(env: EnvId, client: &mut dyn GeneratorClient, cfg: &RefinementConfig, seed: u64) -> Result<RunRecord> {
    run_iterative_cached(env, client, cfg, seed, None)
}

pub fn run_iterative_cached(
    env: EnvId,
    client: &mut dyn GeneratorClient,
    cfg: &RefinementConfig,
    seed: u64,
    cache: Option<&Iteration0Cache>,
) -> Result<RunRecord> {
    cfg.validate()?;
    let mut rec = RunRecord::new(Condition::Iterative, env, seed);
    rec.prompt_mode = Some(cfg.prompt_mode);
    let spec = env.spec();
    let (it0, first) = first_program(env, client, cfg, seed, cache);
    rec.iterations.push(it0);
    let mut program = match first {
        Ok(p) => p,
        Err(e) => {
            rec.fail(e);
            return Ok(rec);
        }
    };
    // Training is deterministic, so an unchanged program re-probes to the
    // same outcome. The episodes are still charged to the budget.
    let mut probed: BTreeMap<String, ProbeOutcome> = BTreeMap::new();
    for k in 0..cfg.max_iterations {
        let key = canonical(&program);
        let outcome = match probed.get(&key) {
            Some(x) => Ok(x.clone()),
            None => probe(env, &program, cfg, seed),
        };
        let (metrics, diagnosis, returns) = match outcome {
            Ok(x) => x,
            Err(e) => {
                rec.fail(e);
                return Ok(rec);
            }
        };
        probed.entry(key).or_insert_with(|| (metrics.clone(), diagnosis.clone(), returns.clone()));
        rec.total_episodes_used += cfg.probe_episodes;
        let it = rec.iterations.last_mut().expect("current iteration");
        it.probe = Some(metrics.clone());
        it.diagnosis = Some(diagnosis.clone());
        if spec.has_binary_success && metrics.success_rate >= cfg.tau {
            break;
        }
        let text = canonical(&program);
        let trend = return_trend(&returns).ok();
        let inputs = RefineInputs {
            program_text: &text,
            metrics: &metrics,
            diagnosis: &diagnosis,
            trend,
        };
        let prompt = build_refinement_prompt(spec, &inputs, cfg.prompt_mode)?;
        let res = generate_program(client, &prompt, &cfg.retry, cfg.temperature, spec.kind);
        let (it, next) = generation_record(k + 1, res, env);
        rec.iterations.push(it);
        match next {
            Ok(p) => program = p,
            Err(e) => {
                rec.fail(e);
                return Ok(rec);
            }
        }
    }
    if let Err(e) = full_train(&mut rec, env, Some(&program), &cfg.train, cfg.full_episodes, seed) {
        rec.fail(e);
    }
    Ok(rec)
}

/// One generation, then the full budget (plus K·N_p when `extended`).
pub fn run_one_shot(env: EnvId, client: &mut dyn GeneratorClient, cfg: &RefinementConfig, seed: u64, extended: bool) -> Result<RunRecord> {
    cfg.validate()?;
    let cond = if extended { Condition::OneShotExtended } else { Condition::OneShot };
    let mut rec = RunRecord::new(cond, env, seed);
    let prompt = build_generation_prompt(env.spec());
    let res = generate_program(client, &prompt, &cfg.retry, cfg.temperature, env.spec().kind);
    let (it, prog) = generation_record(0, res, env);
    rec.iterations.push(it);
    match prog {
        Ok(p) => {
            let eps = if extended { cfg.iterative_budget() } else { cfg.full_episodes };
            if let Err(e) = full_train(&mut rec, env, Some(&p), &cfg.train, eps, seed) {
                rec.fail(e);
            }
        }
        Err(e) => rec.fail(e),
    }
    Ok(rec)
}

/// Baselines that need no generator: no shaping, hand-crafted, RND.
pub fn run_baseline(env: EnvId, condition: Condition, cfg: &RefinementConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    let mut rec = RunRecord::new(condition, env, seed);
    let mut train_cfg = cfg.train.clone();
    let (program, episodes) = match condition {
        Condition::NoShaping => (None, cfg.full_episodes),
        Condition::NoShapingExtended => (None, cfg.iterative_budget()),
        Condition::HandCrafted => (Some(reference_program(env)), cfg.full_episodes),
        Condition::Rnd { coef } => {
            if !(coef >= 0.0 && coef.is_finite()) {
                return Err(Error::Config(format!("RND coefficient {coef} must be finite and non-negative")));
            }
            train_cfg.rnd_coef = coef;
            (None, cfg.full_episodes)
        }
        other => return Err(Error::Config(format!("{other} needs a generator client"))),
    };
    if let Err(e) = full_train(&mut rec, env, program.as_ref(), &train_cfg, episodes, seed) {
        rec.fail(e);
    }
    Ok(rec)
}

/// Index of the best probe: highest sr, then highest mr, then lowest index.
pub fn select_best(candidates: &[(usize, f64, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &(i, sr, mr) in candidates {
        best = match best {
            Some((_, bsr, bmr)) if sr > bsr || (sr == bsr && mr > bmr) => Some((i, sr, mr)),
            None => Some((i, sr, mr)),
            keep => keep,
        };
    }
    best.map(|b| b.0)
}

/// N independent generations, each valid one probed; the probe winner is
/// trained for the full budget.
pub fn run_best_of_n(env: EnvId, client: &mut dyn GeneratorClient, n: usize, cfg: &RefinementConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Config("best-of-N needs n >= 1".into()));
    }
    let mut rec = RunRecord::new(Condition::BestOfN { n }, env, seed);
    let prompt = build_generation_prompt(env.spec());
    let mut programs = Vec::new();
    let mut scored = Vec::new();
    for i in 0..n {
        let res = generate_program(client, &prompt, &cfg.retry, cfg.temperature, env.spec().kind);
        let (mut it, prog) = generation_record(i, res, env);
        match prog {
            Ok(p) => match probe(env, &p, cfg, seed) {
                Ok((m, d, _)) => {
                    rec.total_episodes_used += cfg.probe_episodes;
                    scored.push((i, m.success_rate, m.mean_reward));
                    it.probe = Some(m);
                    it.diagnosis = Some(d);
                    programs.push(Some(p));
                }
                Err(e) => {
                    rec.fail(e);
                    rec.iterations.push(it);
                    return Ok(rec);
                }
            },
            // Client errors end the run; validation failures only drop
            // the candidate.
            Err(Error::GenerationFailed { .. }) => programs.push(None),
            Err(e) => {
                rec.iterations.push(it);
                rec.fail(e);
                return Ok(rec);
            }
        }
        rec.iterations.push(it);
    }
    let Some(winner) = select_best(&scored) else {
        rec.status = RunStatus::GenerationFailed;
        rec.failure = Some(format!("all {n} candidates failed validation"));
        return Ok(rec);
    };
    rec.selected = Some(winner);
    let p = programs[winner].take().expect("winner has a program");
    if let Err(e) = full_train(&mut rec, env, Some(&p), &cfg.train, cfg.full_episodes, seed) {
        rec.fail(e);
    }
    Ok(rec)
}

/// Builds a fresh client for each (env, seed).
pub type ClientFactory<'a> = dyn Fn(EnvId, u64) -> Result<Box<dyn GeneratorClient + Send>> + Sync + 'a;

/// One record per seed. Seeds run on up to `parallelism` threads; a failing
/// seed does not stop the batch.
pub fn run_condition(
    env: EnvId,
    condition: Condition,
    seeds: &[u64],
    make_client: &ClientFactory<'_>,
    cfg: &RefinementConfig,
    cache: Option<&Iteration0Cache>,
    parallelism: usize,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let one = |seed: u64| -> RunRecord {
        let res = if condition.needs_client() {
            make_client(env, seed).and_then(|mut c| match condition {
                Condition::Iterative => run_iterative_cached(env, c.as_mut(), cfg, seed, cache),
                Condition::OneShot => run_one_shot(env, c.as_mut(), cfg, seed, false),
                Condition::OneShotExtended => run_one_shot(env, c.as_mut(), cfg, seed, true),
                Condition::BestOfN { n } => run_best_of_n(env, c.as_mut(), n, cfg, seed),
                _ => unreachable!(),
            })
        } else {
            run_baseline(env, condition, cfg, seed)
        };
        res.unwrap_or_else(|e| {
            let mut r = RunRecord::new(condition, env, seed);
            r.fail(e);
            r
        })
    };
    let workers = parallelism.clamp(1, seeds.len().max(1));
    if workers == 1 {
        return Ok(seeds.iter().map(|&s| one(s)).collect());
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<RunRecord>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(one(seeds[i]));
            });
        }
    });
    Ok(slots.into_iter().map(|s| s.into_inner().unwrap().expect("every seed ran")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{ScriptedGenerator, ScriptedScenario};

    fn quick(env: EnvId) -> RefinementConfig {
        let mut c = RefinementConfig::for_env(env);
        c.probe_episodes = 20;
        c.full_episodes = 30;
        c
    }

    fn scripted(name: &str, env: EnvId) -> ScriptedGenerator {
        ScriptedGenerator::new(ScriptedScenario::library(name, env.spec().kind).unwrap())
    }

    #[test]
    fn defaults() {
        let g = RefinementConfig::for_env(EnvId::DoorKey8);
        assert_eq!((g.tau, g.max_iterations, g.probe_episodes, g.full_episodes), (0.95, 3, 500, 3000));
        assert_eq!(g.iterative_budget(), 4500);
        let c = RefinementConfig::for_env(EnvId::PointReach);
        assert_eq!((c.probe_episodes, c.full_episodes), (200, 1000));
        let d = RefinementConfig::for_env(EnvId::LineRunner);
        assert_eq!(d.prompt_mode, PromptMode::RefineDense);
        assert_eq!(d.diagnostics.mode, DiagnosticMode::Dense);
        let s = d.with_sparse_diagnostics();
        assert_eq!(s.diagnostics.mode, DiagnosticMode::Sparse);
        assert!(s.diagnostics.enabled.reward_hacking);
    }

    #[test]
    fn early_stop_makes_no_further_calls() {
        let mut cfg = quick(EnvId::DoorKey5);
        cfg.tau = 0.0;
        let mut g = scripted("good-one-shot", EnvId::DoorKey5);
        let r = run_iterative(EnvId::DoorKey5, &mut g, &cfg, 42).unwrap();
        assert_eq!(g.calls(), 1);
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.total_episodes_used, 20 + 30);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.final_log.as_ref().unwrap().episodes.len(), 30);
    }

    #[test]
    fn never_reaching_tau_uses_whole_budget() {
        let mut cfg = quick(EnvId::DoorKey8);
        cfg.tau = 1.0;
        let mut g = scripted("flooding-then-fix", EnvId::DoorKey8);
        let r = run_iterative(EnvId::DoorKey8, &mut g, &cfg, 1).unwrap();
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.iterations.len(), 4);
        assert_eq!(r.total_episodes_used, cfg.iterative_budget());
        assert_eq!(r.iterations[3].probe, None);
        assert_eq!(r.final_program, r.iterations[3].program);
        // the repeated fix program is probed once and charged twice
        assert_eq!(r.iterations[1].program, r.iterations[2].program);
        assert_eq!(r.iterations[1].probe, r.iterations[2].probe);
    }

    #[test]
    fn generation_failure_is_recorded() {
        let mut g = scripted("all-invalid", EnvId::DoorKey5);
        let r = run_iterative(EnvId::DoorKey5, &mut g, &quick(EnvId::DoorKey5), 1).unwrap();
        assert_eq!(r.status, RunStatus::GenerationFailed);
        assert_eq!(r.iterations[0].attempts, 4);
        assert_eq!(r.total_episodes_used, 0);
        let mut g = scripted("api-misuse-retry", EnvId::DoorKey5);
        let mut cfg = quick(EnvId::DoorKey5);
        cfg.tau = 0.0;
        let r = run_iterative(EnvId::DoorKey5, &mut g, &cfg, 1).unwrap();
        assert_eq!(r.iterations[0].attempts, 2);
    }

    #[test]
    fn best_of_n_tie_break() {
        assert_eq!(select_best(&[(0, 0.2, 0.0), (1, 0.9, 0.0), (2, 0.5, 0.0)]), Some(1));
        assert_eq!(select_best(&[(0, 0.5, 0.1), (1, 0.5, 0.3)]), Some(1));
        assert_eq!(select_best(&[(0, 0.5, 0.3), (1, 0.5, 0.3)]), Some(0));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn best_of_one_is_one_shot_plus_probe() {
        let cfg = quick(EnvId::DoorKey5);
        let mut g = scripted("good-one-shot", EnvId::DoorKey5);
        let r = run_best_of_n(EnvId::DoorKey5, &mut g, 1, &cfg, 3).unwrap();
        assert_eq!(r.selected, Some(0));
        assert_eq!(r.total_episodes_used, 50);
        let mut g = scripted("good-one-shot", EnvId::DoorKey5);
        let o = run_one_shot(EnvId::DoorKey5, &mut g, &cfg, 3, false).unwrap();
        assert_eq!(o.final_metrics, r.final_metrics);
    }

    #[test]
    fn baselines_and_budgets() {
        let cfg = quick(EnvId::DoorKey5);
        let r = run_baseline(EnvId::DoorKey5, Condition::NoShapingExtended, &cfg, 1).unwrap();
        assert_eq!(r.total_episodes_used, 3 * 20 + 30);
        let r = run_baseline(EnvId::DoorKey5, Condition::Rnd { coef: 0.1 }, &cfg, 1).unwrap();
        assert_eq!(r.final_log.unwrap().config.rnd_coef, 0.1);
        let r = run_baseline(EnvId::DoorKey5, Condition::HandCrafted, &cfg, 1).unwrap();
        assert!(r.final_program.is_some());
        assert!(run_baseline(EnvId::DoorKey5, Condition::OneShot, &cfg, 1).is_err());
    }

    #[test]
    fn condition_batches_are_isolated_and_reproducible() {
        let cfg = quick(EnvId::DoorKey5);
        let factory = |env: EnvId, _seed: u64| -> Result<Box<dyn GeneratorClient + Send>> {
            Ok(Box::new(ScriptedGenerator::new(ScriptedScenario::library("good-one-shot", env.spec().kind)?)))
        };
        let a = run_condition(EnvId::DoorKey5, Condition::OneShot, &[1, 2], &factory, &cfg, None, 2).unwrap();
        let b = run_condition(EnvId::DoorKey5, Condition::OneShot, &[1, 2], &factory, &cfg, None, 1).unwrap();
        let json = |rs: &[RunRecord]| serde_json::to_string(rs).unwrap();
        assert_eq!(json(&a), json(&b));
        assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2]);
        let n = run_condition(EnvId::DoorKey5, Condition::NoShaping, &[1, 2], &factory, &cfg, None, 1).unwrap();
        assert!(n.iter().all(|r| r.final_program.is_none()));
    }

    #[test]
    fn iteration0_cache_shares_the_first_program() {
        let cfg = quick(EnvId::DoorKey8);
        let cache = Iteration0Cache::new();
        let mut g = scripted("flooding-then-fix", EnvId::DoorKey8);
        let full = run_iterative_cached(EnvId::DoorKey8, &mut g, &cfg, 5, Some(&cache)).unwrap();
        let mut static_cfg = cfg.clone();
        static_cfg.prompt_mode = PromptMode::RefineStaticVocab;
        let mut g2 = scripted("flooding-then-fix", EnvId::DoorKey8);
        let st = run_iterative_cached(EnvId::DoorKey8, &mut g2, &static_cfg, 5, Some(&cache)).unwrap();
        assert!(st.iterations[0].reused);
        assert_eq!(st.iterations[0].program, full.iterations[0].program);
        assert_eq!(st.iterations[1].program, full.iterations[1].program);
        assert_eq!(st.label(), "ITERATIVE[STATIC_VOCAB]");
        let p = &st.iterations[1].exchanges[0].prompt.user_text;
        assert!(!p.contains("DETECTED"));
    }
}
