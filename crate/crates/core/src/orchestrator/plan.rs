//! Declarative experiment plans, sweeps and crossed program × seed batches.

use serde::{Deserialize, Serialize};

use super::{
    condition_label, run_condition, ClientFactory, Condition, Iteration0Cache, IterationRecord, RefinementConfig,
    RunRecord, RunStatus, CANONICAL_SEEDS, EVAL_WINDOW,
};
use crate::diagnostics::DiagnosticConfig;
use crate::dsl::{lint_for_env, parse, print, validate, RewardProgram};
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::generator::{build_generation_prompt, generate_program, PromptMode};
use crate::ppo::{evaluate_final, train};

fn default_seeds() -> Vec<u64> {
    CANONICAL_SEEDS.to_vec()
}

fn default_parallelism() -> usize {
    1
}

/// A condition plus its refinement variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub condition: Condition,
    #[serde(default)]
    pub prompt_mode: Option<PromptMode>,
    /// Success-based diagnostics on a dense task.
    #[serde(default)]
    pub sparse_diagnostics: bool,
}

impl ConditionSpec {
    pub fn new(condition: Condition) -> Self {
        ConditionSpec {
            condition,
            prompt_mode: None,
            sparse_diagnostics: false,
        }
    }

    pub fn label(&self) -> String {
        let base = condition_label(self.condition, self.prompt_mode);
        if self.sparse_diagnostics {
            format!("{base}[SPARSE_DIAG]")
        } else {
            base
        }
    }

    pub fn config_for(&self, env: EnvId, overrides: &PlanOverrides) -> RefinementConfig {
        let mut cfg = RefinementConfig::for_env(env);
        if self.sparse_diagnostics {
            cfg = cfg.with_sparse_diagnostics();
        }
        overrides.apply(&mut cfg);
        if let Some(m) = self.prompt_mode {
            cfg.prompt_mode = m;
        }
        cfg
    }
}

/// Values that replace the per-environment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanOverrides {
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub probe_episodes: Option<usize>,
    #[serde(default)]
    pub full_episodes: Option<usize>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_retries: Option<usize>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticConfig>,
}

impl PlanOverrides {
    pub fn apply(&self, cfg: &mut RefinementConfig) {
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.probe_episodes {
            cfg.probe_episodes = v;
        }
        if let Some(v) = self.full_episodes {
            cfg.full_episodes = v;
        }
        if let Some(v) = self.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = self.max_retries {
            cfg.retry.max_retries = v;
        }
        if let Some(d) = &self.diagnostics {
            cfg.diagnostics = *d;
        }
    }
}

/// L programs × R seeds, each cell trained once with its program fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossedSpec {
    pub env: EnvId,
    /// Literal program texts. When empty, `generate` programs are drawn
    /// from the client instead.
    #[serde(default)]
    pub programs: Vec<String>,
    #[serde(default)]
    pub generate: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub name: String,
    pub envs: Vec<EnvId>,
    #[serde(default)]
    pub conditions: Vec<ConditionSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub overrides: PlanOverrides,
    /// Condition label pairs to test against each other in reports.
    #[serde(default)]
    pub comparisons: Vec<(String, String)>,
    #[serde(default)]
    pub tolerate_failures: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub crossed: Option<CrossedSpec>,
    #[serde(default)]
    pub sweep: Option<SweepAxis>,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text).map_err(|e| Error::Config(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.envs.is_empty() && self.crossed.is_none() {
            return Err(Error::Config("plan names no environments".into()));
        }
        if self.seeds.is_empty() && !self.conditions.is_empty() {
            return Err(Error::Config("plan has conditions but no seeds".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for c in &self.conditions {
            if !labels.insert(c.label()) {
                return Err(Error::Config(format!("condition {} listed twice", c.label())));
            }
            match c.condition {
                Condition::BestOfN { n: 0 } => return Err(Error::Config("BEST_OF_N needs n >= 1".into())),
                Condition::Rnd { coef } if !(coef >= 0.0 && coef.is_finite()) => {
                    return Err(Error::Config(format!("RND coefficient {coef} is invalid")))
                }
                _ => {}
            }
            if c.prompt_mode.is_some() && c.condition != Condition::Iterative {
                return Err(Error::Config(format!("prompt_mode only applies to ITERATIVE, not {}", c.condition)));
            }
            for &env in &self.envs {
                c.config_for(env, &self.overrides).validate()?;
            }
        }
        for (a, b) in &self.comparisons {
            for l in [a, b] {
                if !labels.contains(l) {
                    return Err(Error::Config(format!("comparison names unknown condition {l}")));
                }
            }
        }
        if let Some(x) = &self.crossed {
            let l = if x.programs.is_empty() { x.generate } else { x.programs.len() };
            if l < 2 || x.seeds.len() < 2 {
                return Err(Error::Config("crossed batch needs at least 2 programs and 2 seeds".into()));
            }
            for p in &x.programs {
                let r = validate(p, Some(x.env.spec().kind));
                if !r.ok {
                    return Err(Error::Config(format!("crossed program invalid: {}", r.summary_lines().join("; "))));
                }
            }
        }
        if let Some(axis) = &self.sweep {
            axis.validate()?;
        }
        Ok(())
    }

    /// Replaces the seed list, e.g. from an environment override.
    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }
}

/// Run every (env, condition) batch in plan order. Prompt-mode variants of
/// the iterative condition share their first program per (env, seed).
pub fn run_plan(plan: &ExperimentPlan, make_client: &ClientFactory<'_>) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let cache = Iteration0Cache::new();
    let mut out = Vec::new();
    for &env in &plan.envs {
        for spec in &plan.conditions {
            let cfg = spec.config_for(env, &plan.overrides);
            let mut batch = run_condition(env, spec.condition, &plan.seeds, make_client, &cfg, Some(&cache), plan.parallelism)?;
            if spec.sparse_diagnostics {
                for r in &mut batch {
                    r.sparse_diagnostics = true;
                }
            }
            out.extend(batch);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdParam {
    RhMr,
    RhSr,
    SwMr,
    SwSr,
    PlateauDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum SweepAxis {
    Threshold { param: ThresholdParam, values: Vec<f64> },
    ProbeLength { values: Vec<usize> },
    RndCoef { values: Vec<f64> },
    /// Names among "RH", "SW", "LP".
    DetectorRemoval { detectors: Vec<String> },
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Threshold { values, .. } | SweepAxis::RndCoef { values } => values.len(),
            SweepAxis::ProbeLength { values } => values.len(),
            SweepAxis::DetectorRemoval { detectors } => detectors.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        match self {
            SweepAxis::Threshold { values, .. } | SweepAxis::RndCoef { values } => {
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::Config(format!("sweep value {v} must be finite and non-negative")));
                }
            }
            SweepAxis::ProbeLength { values } => {
                if values.contains(&0) {
                    return Err(Error::Config("probe length must be positive".into()));
                }
            }
            SweepAxis::DetectorRemoval { detectors } => {
                if let Some(d) = detectors.iter().find(|d| !matches!(d.as_str(), "RH" | "SW" | "LP")) {
                    return Err(Error::Config(format!("unknown detector {d}; use RH, SW or LP")));
                }
            }
        }
        Ok(())
    }

    /// Label of the i-th batch.
    pub fn value_label(&self, i: usize) -> String {
        match self {
            SweepAxis::Threshold { param, values } => format!("{param:?}={}", values[i]),
            SweepAxis::ProbeLength { values } => format!("probe={}", values[i]),
            SweepAxis::RndCoef { values } => format!("rnd={}", values[i]),
            SweepAxis::DetectorRemoval { detectors } => format!("-{}", detectors[i]),
        }
    }
}

/// Apply the i-th value of `axis` to a refinement config.
pub fn apply_sweep_value(axis: &SweepAxis, i: usize, cfg: &mut RefinementConfig) {
    match axis {
        SweepAxis::Threshold { param, values } => {
            let v = values[i];
            let d = &mut cfg.diagnostics;
            match param {
                ThresholdParam::RhMr => d.rh_mr_cutoff = v,
                ThresholdParam::RhSr => d.rh_sr_cutoff = v,
                ThresholdParam::SwMr => d.sw_mr_cutoff = v,
                ThresholdParam::SwSr => d.sw_sr_cutoff = v,
                ThresholdParam::PlateauDelta => d.plateau.delta_cutoff = v,
            }
        }
        SweepAxis::ProbeLength { values } => cfg.probe_episodes = values[i],
        SweepAxis::RndCoef { .. } => {}
        SweepAxis::DetectorRemoval { detectors } => {
            let e = &mut cfg.diagnostics.enabled;
            match detectors[i].as_str() {
                "RH" => e.reward_hacking = false,
                "SW" => e.shaping_weak = false,
                _ => e.plateau = false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBatch {
    pub label: String,
    pub records: Vec<RunRecord>,
}

/// One batch per axis value. The RND axis runs RND(c) in place of the
/// plan's conditions; every other axis reruns the plan's conditions with
/// one setting changed.
pub fn run_sweep(axis: &SweepAxis, base: &ExperimentPlan, make_client: &ClientFactory<'_>) -> Result<Vec<SweepBatch>> {
    axis.validate()?;
    base.validate()?;
    let mut out = Vec::with_capacity(axis.len());
    for i in 0..axis.len() {
        let cache = Iteration0Cache::new();
        let mut records = Vec::new();
        for &env in &base.envs {
            let specs = match axis {
                SweepAxis::RndCoef { values } => vec![ConditionSpec::new(Condition::Rnd { coef: values[i] })],
                _ => base.conditions.clone(),
            };
            for spec in specs {
                let mut cfg = spec.config_for(env, &base.overrides);
                apply_sweep_value(axis, i, &mut cfg);
                let mut batch = run_condition(env, spec.condition, &base.seeds, make_client, &cfg, Some(&cache), base.parallelism)?;
                for r in &mut batch {
                    r.sparse_diagnostics = spec.sparse_diagnostics;
                }
                records.extend(batch);
            }
        }
        out.push(SweepBatch {
            label: axis.value_label(i),
            records,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossedBatch {
    pub env: EnvId,
    pub programs: Vec<String>,
    pub seeds: Vec<u64>,
    /// Row per program, column per seed.
    pub cells: Vec<Vec<RunRecord>>,
}

impl CrossedBatch {
    /// Final metric per cell; None where a run failed.
    pub fn table(&self) -> Vec<Vec<Option<f64>>> {
        self.cells.iter().map(|row| row.iter().map(|r| r.final_value()).collect()).collect()
    }
}

/// Train each program with each seed. Generated programs come from one
/// fresh client per program index.
pub fn run_crossed(spec: &CrossedSpec, overrides: &PlanOverrides, make_client: &ClientFactory<'_>) -> Result<CrossedBatch> {
    let env = spec.env;
    let mut cfg = RefinementConfig::for_env(env);
    overrides.apply(&mut cfg);
    let episodes = spec.episodes.unwrap_or(cfg.full_episodes);
    let mut programs: Vec<(RewardProgram, IterationRecord)> = Vec::new();
    if spec.programs.is_empty() {
        for l in 0..spec.generate {
            let mut client = make_client(env, l as u64)?;
            let prompt = build_generation_prompt(env.spec());
            let g = generate_program(client.as_mut(), &prompt, &cfg.retry, cfg.temperature, env.spec().kind)?;
            let rec = IterationRecord {
                index: 0,
                program: Some(print(&g.program)),
                attempts: g.attempts,
                exchanges: g.exchanges,
                lint: lint_for_env(&g.program, Some(env.spec().kind)).findings,
                reused: false,
                probe: None,
                diagnosis: None,
            };
            programs.push((g.program, rec));
        }
    } else {
        for text in &spec.programs {
            let p = parse(text)?;
            let rec = IterationRecord {
                index: 0,
                program: Some(print(&p)),
                attempts: 0,
                exchanges: Vec::new(),
                lint: lint_for_env(&p, Some(env.spec().kind)).findings,
                reused: false,
                probe: None,
                diagnosis: None,
            };
            programs.push((p, rec));
        }
    }
    let train_cfg = cfg.train.clone().with_episodes(episodes);
    let mut cells = Vec::with_capacity(programs.len());
    for (l, (program, it)) in programs.iter().enumerate() {
        let mut row = Vec::with_capacity(spec.seeds.len());
        for &seed in &spec.seeds {
            let mut rec = RunRecord::new(Condition::OneShot, env, seed);
            rec.program_index = Some(l);
            rec.iterations.push(it.clone());
            match train(env, Some(program), &train_cfg, seed).and_then(|log| {
                let m = evaluate_final(&log, EVAL_WINDOW)?;
                Ok((log, m))
            }) {
                Ok((log, m)) => {
                    rec.total_episodes_used = episodes;
                    rec.final_metrics = Some(m);
                    rec.final_program = it.program.clone();
                    rec.final_log = Some(log);
                }
                Err(e) => {
                    rec.status = RunStatus::TrainingAborted;
                    rec.failure = Some(e.to_string());
                }
            }
            row.push(rec);
        }
        cells.push(row);
    }
    Ok(CrossedBatch {
        env,
        programs: programs.into_iter().map(|(_, it)| it.program.unwrap_or_default()).collect(),
        seeds: spec.seeds.clone(),
        cells,
    })
}
