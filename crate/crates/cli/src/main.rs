use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rewardlab_cli::{cmd_decompose, cmd_lint, cmd_report, cmd_run, cmd_sweep, cmd_validate, exit, load_plan, ClientSpec, Exit};
use rewardlab_core::analytics::BootstrapSpec;
use rewardlab_core::envs::EnvId;

#[derive(Parser)]
#[command(name = "rewardlab", version, about = "Reward-shaping experiments: run, report, decompose")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment plan (JSON).
    plan: PathBuf,
    /// Parent directory for the content-addressed run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    parallelism: Option<usize>,
    /// scripted:<scenario> or http
    #[arg(long)]
    client: Option<String>,
    /// Provider settings for the http client (TOML or JSON).
    #[arg(long)]
    provider: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute every condition batch in a plan.
    Run(RunArgs),
    /// Execute the plan's sweep axis, one batch per value.
    Sweep(RunArgs),
    /// Summary tables, tests and plots from a run directory.
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variance decomposition of a crossed program × seed batch.
    Decompose {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Static lint findings for a program.
    Lint {
        program: PathBuf,
        #[arg(long, value_parser = parse_env)]
        env: Option<EnvId>,
    },
    /// Full validation: parse, type check, dry run.
    Validate {
        program: PathBuf,
        #[arg(long, value_parser = parse_env)]
        env: Option<EnvId>,
    },
}

fn parse_env(s: &str) -> Result<EnvId, String> {
    EnvId::ALL
        .into_iter()
        .find(|e| e.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown env {s}; known: {}", EnvId::ALL.map(|e| e.name()).join(", ")))
}

fn client_of(a: &RunArgs) -> Result<Option<ClientSpec>, Exit> {
    a.client
        .as_deref()
        .map(|c| ClientSpec::parse(c, a.provider.as_deref()))
        .transpose()
        .map_err(|e| Exit { code: exit::INVALID_INPUT, error: e })
}

fn run(cli: Cli) -> Result<i32, Exit> {
    match cli.cmd {
        Cmd::Run(a) => {
            let plan = load_plan(&a.plan)?;
            let o = cmd_run(&plan, &a.out, client_of(&a)?, a.parallelism)?;
            let failed = o.manifest.runs.iter().filter(|r| r.status != rewardlab_core::RunStatus::Ok).count();
            println!("{} runs ({failed} failed) in {}", o.manifest.runs.len(), o.dir.display());
            Ok(o.code)
        }
        Cmd::Sweep(a) => {
            let plan = load_plan(&a.plan)?;
            let o = cmd_sweep(&plan, &a.out, client_of(&a)?, a.parallelism)?;
            println!("{} sweep runs in {}", o.manifest.runs.len(), o.dir.display());
            Ok(o.code)
        }
        Cmd::Report { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.join("report"));
            let b = cmd_report(&run_dir, &out)?;
            println!("{} summary rows, {} tests, {} plots in {}", b.summary_rows, b.tests.len(), b.svgs.len(), out.display());
            for g in &b.gaps {
                eprintln!("gap: {g}");
            }
            Ok(exit::OK)
        }
        Cmd::Decompose { run_dir, out, resamples, seed } => {
            let out = out.unwrap_or_else(|| run_dir.join("report"));
            let d = cmd_decompose(&run_dir, &out, &BootstrapSpec { resamples, seed })?;
            match d.crossed.shares {
                Some(s) => println!("program {:.3}  seed {:.3}  residual {:.3}", s.llm, s.rl, s.residual),
                None => println!("all cells equal; no variance to attribute"),
            }
            Ok(exit::OK)
        }
        Cmd::Lint { program, env } => {
            for line in cmd_lint(&program, env)? {
                println!("{line}");
            }
            Ok(exit::OK)
        }
        Cmd::Validate { program, env } => {
            let lines = cmd_validate(&program, env)?;
            println!("ok");
            for l in lines {
                println!("{l}");
            }
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code as u8)
        }
    }
}
