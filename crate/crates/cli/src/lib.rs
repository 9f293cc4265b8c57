//! Command implementations behind the `rewardlab` binary.

pub mod report;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rewardlab_core::analytics::BootstrapSpec;
use rewardlab_core::dsl::{lint_source, validate};
use rewardlab_core::envs::{EnvId, EnvKind};
use rewardlab_core::generator::{GeneratorClient, HttpClient, ProviderConfig, ScriptedGenerator, ScriptedScenario};
use rewardlab_core::orchestrator::{run_crossed, run_plan, run_sweep, save_record, ExperimentPlan, RunDir, RunRecord, RunStatus};
use rewardlab_core::Error as CoreError;

pub const ARTIFACT_VERSION: u32 = 1;
pub const SEED_LIST_VAR: &str = "REWARDLAB_SEED_LIST";

pub mod exit {
    pub const OK: i32 = 0;
    /// Some runs failed and the plan does not tolerate failures.
    pub const RUN_FAILED: i32 = 1;
    pub const INVALID_INPUT: i32 = 2;
    pub const AUTH: i32 = 3;
    pub const INCOMPLETE: i32 = 4;
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Exit {
    fn new(code: i32, error: impl Into<anyhow::Error>) -> Self {
        Exit { code, error: error.into() }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Exit {
    Exit::new(exit::INVALID_INPUT, e)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientSpec {
    Scripted(String),
    Http(PathBuf),
}

impl ClientSpec {
    /// `scripted:<scenario>` or `http` (needs a provider file).
    pub fn parse(text: &str, provider: Option<&Path>) -> Result<Self> {
        if let Some(name) = text.strip_prefix("scripted:") {
            ScriptedScenario::library(name, EnvKind::Grid)?;
            return Ok(ClientSpec::Scripted(name.to_string()));
        }
        if text == "http" {
            let p = provider.ok_or_else(|| anyhow!("--client http needs --provider <file>"))?;
            return Ok(ClientSpec::Http(p.to_path_buf()));
        }
        bail!("unknown client {text:?}; use scripted:<scenario> or http")
    }

    pub fn describe(&self) -> String {
        match self {
            ClientSpec::Scripted(n) => format!("scripted:{n}"),
            ClientSpec::Http(p) => format!("http:{}", p.display()),
        }
    }
}

/// Per-(env, seed) client builder. HTTP credentials are checked once, up
/// front, so a missing key fails before any training starts.
pub struct Clients {
    spec: Option<ClientSpec>,
    provider: Option<ProviderConfig>,
}

impl Clients {
    pub fn new(spec: Option<ClientSpec>) -> std::result::Result<Self, Exit> {
        let provider = match &spec {
            Some(ClientSpec::Http(path)) => {
                let cfg = ProviderConfig::load(path).map_err(invalid)?;
                HttpClient::new(cfg.clone()).map_err(|e| match e {
                    CoreError::Auth(_) => Exit::new(exit::AUTH, e),
                    other => invalid(other),
                })?;
                Some(cfg)
            }
            _ => None,
        };
        Ok(Clients { spec, provider })
    }

    pub fn make(&self, env: EnvId, _seed: u64) -> rewardlab_core::Result<Box<dyn GeneratorClient + Send>> {
        match (&self.spec, &self.provider) {
            (Some(ClientSpec::Scripted(name)), _) => {
                Ok(Box::new(ScriptedGenerator::new(ScriptedScenario::library(name, env.spec().kind)?)))
            }
            (Some(ClientSpec::Http(_)), Some(cfg)) => Ok(Box::new(HttpClient::new(cfg.clone())?)),
            _ => Err(CoreError::Config("this plan needs a generator; pass --client".into())),
        }
    }
}

pub fn seeds_from_env() -> Result<Option<Vec<u64>>> {
    match std::env::var(SEED_LIST_VAR) {
        Ok(s) if !s.trim().is_empty() => {
            let seeds = s
                .split(',')
                .map(|x| x.trim().parse::<u64>().with_context(|| format!("{SEED_LIST_VAR}: bad seed {x:?}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(seeds))
        }
        _ => Ok(None),
    }
}

pub fn load_plan(path: &Path) -> std::result::Result<ExperimentPlan, Exit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)?;
    let mut plan = ExperimentPlan::from_json(&text).map_err(invalid)?;
    if let Some(seeds) = seeds_from_env().map_err(invalid)? {
        plan = plan.with_seeds(seeds);
        plan.validate().map_err(invalid)?;
    }
    Ok(plan)
}

fn needs_client(plan: &ExperimentPlan) -> bool {
    plan.conditions.iter().any(|c| c.condition.needs_client())
        || plan.crossed.as_ref().is_some_and(|x| x.programs.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub env: EnvId,
    pub seed: u64,
    pub status: RunStatus,
    pub path: String,
    /// sha256 of record.json.
    pub record_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub plan_digest: String,
    pub client: Option<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub runs: Vec<ManifestEntry>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn file_digest(path: &Path) -> Result<String> {
    let h = Sha256::digest(fs::read(path)?);
    Ok(h.iter().map(|b| format!("{b:02x}")).collect())
}

fn persist(root: &Path, sub: &Path, recs: &[RunRecord], runs: &mut Vec<ManifestEntry>) -> Result<()> {
    let base = root.join(sub);
    for r in recs {
        let dir = save_record(&base, r)?;
        runs.push(ManifestEntry {
            label: r.label(),
            env: r.env,
            seed: r.seed,
            status: r.status,
            path: dir.strip_prefix(root).unwrap_or(&dir).to_string_lossy().replace('\\', "/"),
            record_digest: file_digest(&dir.join("record.json"))?,
        });
    }
    Ok(())
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub code: i32,
}

fn finish(dir: RunDir, client: Option<&ClientSpec>, started: u64, mut runs: Vec<ManifestEntry>, tolerate: bool) -> Result<RunOutcome> {
    runs.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION,
        plan_digest: dir.digest.clone(),
        client: client.map(ClientSpec::describe),
        started_unix: started,
        finished_unix: now(),
        runs,
    };
    fs::write(dir.root.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let all_ok = manifest.runs.iter().all(|r| r.status == RunStatus::Ok);
    let code = if all_ok || tolerate { exit::OK } else { exit::RUN_FAILED };
    Ok(RunOutcome {
        dir: dir.root,
        manifest,
        code,
    })
}

/// Executes the plan's condition batches and crossed batch.
pub fn cmd_run(plan: &ExperimentPlan, out: &Path, client: Option<ClientSpec>, parallelism: Option<usize>) -> std::result::Result<RunOutcome, Exit> {
    let mut plan = plan.clone();
    if let Some(p) = parallelism {
        plan.parallelism = p.max(1);
    }
    if needs_client(&plan) && client.is_none() {
        return Err(invalid(anyhow!("this plan needs a generator; pass --client")));
    }
    let clients = Clients::new(client.clone())?;
    let started = now();
    let factory = |env: EnvId, seed: u64| clients.make(env, seed);
    let body = || -> Result<RunOutcome> {
        let dir = RunDir::create(out, &plan)?;
        let mut runs = Vec::new();
        let records = run_plan(&plan, &factory)?;
        persist(&dir.root, Path::new(""), &records, &mut runs)?;
        if let Some(spec) = &plan.crossed {
            let batch = run_crossed(spec, &plan.overrides, &factory)?;
            let cells: Vec<RunRecord> = batch.cells.into_iter().flatten().collect();
            persist(&dir.root, Path::new(""), &cells, &mut runs)?;
        }
        finish(dir, client.as_ref(), started, runs, plan.tolerate_failures)
    };
    body().map_err(|e| match e.downcast_ref::<CoreError>() {
        Some(CoreError::Config(_)) => invalid(e),
        Some(CoreError::Auth(_)) => Exit::new(exit::AUTH, e),
        _ => Exit::new(exit::RUN_FAILED, e),
    })
}

/// One batch per value of the plan's sweep axis, under `sweep/<value>/`.
pub fn cmd_sweep(plan: &ExperimentPlan, out: &Path, client: Option<ClientSpec>, parallelism: Option<usize>) -> std::result::Result<RunOutcome, Exit> {
    let mut plan = plan.clone();
    if let Some(p) = parallelism {
        plan.parallelism = p.max(1);
    }
    let axis = plan.sweep.clone().ok_or_else(|| invalid(anyhow!("plan has no sweep axis")))?;
    let rnd = matches!(axis, rewardlab_core::orchestrator::SweepAxis::RndCoef { .. });
    if !rnd && needs_client(&plan) && client.is_none() {
        return Err(invalid(anyhow!("this plan needs a generator; pass --client")));
    }
    let clients = Clients::new(client.clone())?;
    let started = now();
    let factory = |env: EnvId, seed: u64| clients.make(env, seed);
    let body = || -> Result<RunOutcome> {
        let dir = RunDir::create(out, &plan)?;
        let mut runs = Vec::new();
        for batch in run_sweep(&axis, &plan, &factory)? {
            let sub = PathBuf::from("sweep").join(sanitize(&batch.label));
            persist(&dir.root, &sub, &batch.records, &mut runs)?;
        }
        finish(dir, client.as_ref(), started, runs, plan.tolerate_failures)
    };
    body().map_err(|e| Exit::new(exit::RUN_FAILED, e))
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '=' { c } else { '_' }).collect()
}

pub fn cmd_report(run_dir: &Path, out: &Path) -> std::result::Result<report::ReportBundle, Exit> {
    let loaded = report::load_run_dir(run_dir).map_err(invalid)?;
    report::write_report(&loaded, out).map_err(|e| Exit::new(exit::RUN_FAILED, e))
}

pub fn cmd_decompose(run_dir: &Path, out: &Path, spec: &BootstrapSpec) -> std::result::Result<report::DecompositionOut, Exit> {
    let loaded = report::load_run_dir(run_dir).map_err(invalid)?;
    match report::decompose(&loaded, spec) {
        Ok(Some(d)) => {
            fs::create_dir_all(out).map_err(invalid)?;
            let text = serde_json::to_string_pretty(&d).map_err(invalid)?;
            fs::write(out.join("decomposition.json"), text).map_err(invalid)?;
            Ok(d)
        }
        Ok(None) => Err(invalid(anyhow!("{} holds no crossed batch", run_dir.display()))),
        Err(e) if e.is::<report::IncompleteTable>() => Err(Exit::new(exit::INCOMPLETE, e)),
        Err(e) => Err(Exit::new(exit::RUN_FAILED, e)),
    }
}

fn read_program(path: &Path) -> std::result::Result<String, Exit> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)
}

/// Lint findings, one per line. Unparseable input is invalid.
pub fn cmd_lint(path: &Path, env: Option<EnvId>) -> std::result::Result<Vec<String>, Exit> {
    let text = read_program(path)?;
    let report = lint_source(&text, env.map(|e| e.spec().kind)).map_err(invalid)?;
    Ok(report
        .findings
        .iter()
        .map(|f| format!("{} [{}] {}", f.category.as_str(), f.rule_name, f.message))
        .collect())
}

/// Validation errors and advisories; an invalid program exits 2.
pub fn cmd_validate(path: &Path, env: Option<EnvId>) -> std::result::Result<Vec<String>, Exit> {
    let text = read_program(path)?;
    let r = validate(&text, env.map(|e| e.spec().kind));
    let lines = r.summary_lines();
    if r.ok {
        Ok(lines)
    } else {
        Err(invalid(anyhow!("{}", lines.join("\n"))))
    }
}
