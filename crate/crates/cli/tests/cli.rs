use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rewardlab_cli::{cmd_decompose, cmd_report, cmd_run, exit, ClientSpec, Clients, RunManifest};
use rewardlab_core::analytics::BootstrapSpec;
use rewardlab_core::envs::EnvId;
use rewardlab_core::orchestrator::ExperimentPlan;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rewardlab"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_dir_of(out: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

const TWO_SEEDS: &str = r#"{"envs":["DoorKey5"],"seeds":[1,2],
  "conditions":[{"condition":"NO_SHAPING"}],
  "overrides":{"full_episodes":12}}"#;

#[test]
fn run_writes_one_record_per_seed_and_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.json", TWO_SEEDS);
    let out = tmp.path().join("runs");
    let st = bin().arg("run").arg(&plan).arg("--out").arg(&out).arg("--client").arg("scripted:good-one-shot").status().unwrap();
    assert_eq!(st.code(), Some(0));
    let dir = run_dir_of(&out);
    for seed in [1, 2] {
        assert!(dir.join(format!("runs/NO_SHAPING/DoorKey5/{seed}/record.json")).is_file());
        assert!(dir.join(format!("runs/NO_SHAPING/DoorKey5/{seed}/episodes.jsonl")).is_file());
    }
    let m1: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m1.runs.len(), 2);

    let st = bin().arg("run").arg(&plan).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let m2: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let digests = |m: &RunManifest| m.runs.iter().map(|r| r.record_digest.clone()).collect::<Vec<_>>();
    assert_eq!(digests(&m1), digests(&m2));
    assert_eq!(m1.plan_digest, m2.plan_digest);
}

#[test]
fn http_client_without_key_exits_3_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.json", r#"{"envs":["DoorKey5"],"seeds":[1],"conditions":[{"condition":"ONE_SHOT"}]}"#);
    let provider = write(
        tmp.path(),
        "provider.toml",
        "endpoint = \"http://127.0.0.1:9/v1/chat\"\nmodel = \"m\"\napi_key_env = \"REWARDLAB_TEST_UNSET_KEY\"\n",
    );
    let out = tmp.path().join("runs");
    let o = bin()
        .arg("run")
        .arg(&plan)
        .arg("--out")
        .arg(&out)
        .arg("--client")
        .arg("http")
        .arg("--provider")
        .arg(&provider)
        .env_remove("REWARDLAB_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn invalid_plan_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.json", r#"{"envs":["DoorKey5"],"conditions":[{"condition":{"BEST_OF_N":{"n":0}}}]}"#);
    let o = bin().arg("run").arg(&plan).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let plan = write(tmp.path(), "p2.json", r#"{"envs":["DoorKey5"],"seeds":[1],"conditions":[{"condition":"ONE_SHOT"}]}"#);
    let o = bin().arg("run").arg(&plan).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "missing client");
    let o = bin().arg("run").arg(&plan).arg("--client").arg("scripted:nope").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_list_override() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.json", TWO_SEEDS);
    let out = tmp.path().join("runs");
    let st = bin().arg("run").arg(&plan).arg("--out").arg(&out).env("REWARDLAB_SEED_LIST", "5").status().unwrap();
    assert_eq!(st.code(), Some(0));
    let dir = run_dir_of(&out);
    assert!(dir.join("runs/NO_SHAPING/DoorKey5/5/record.json").is_file());
    assert!(!dir.join("runs/NO_SHAPING/DoorKey5/1").exists());
    let st = bin().arg("run").arg(&plan).arg("--out").arg(&out).env("REWARDLAB_SEED_LIST", "x").status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn report_tests_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let plan: ExperimentPlan = ExperimentPlan::from_json(
        r#"{"envs":["DoorKey5"],"seeds":[1,2,3],
        "conditions":[{"condition":"NO_SHAPING"},{"condition":"HAND_CRAFTED"}],
        "comparisons":[["HAND_CRAFTED","NO_SHAPING"]],
        "overrides":{"full_episodes":15}}"#,
    )
    .unwrap();
    let o = cmd_run(&plan, tmp.path(), None, Some(2)).unwrap();
    assert_eq!(o.code, exit::OK);
    let r1 = tmp.path().join("r1");
    let r2 = tmp.path().join("r2");
    let b = cmd_report(&o.dir, &r1).unwrap();
    cmd_report(&o.dir, &r2).unwrap();
    assert_eq!(b.summary_rows, 2);
    assert_eq!(b.tests.len(), 1);
    assert_eq!(b.tests[0].family, "grid");
    for f in ["summary.csv", "tests.csv", "report.md", "curves_DoorKey5.svg"] {
        assert_eq!(fs::read(r1.join(f)).unwrap(), fs::read(r2.join(f)).unwrap(), "{f}");
    }
    // CSV values round-trip to the records.
    let summary = fs::read_to_string(r1.join("summary.csv")).unwrap();
    let loaded = rewardlab_cli::report::load_run_dir(&o.dir).unwrap();
    for rec in &loaded.records {
        let v = rec.final_value().unwrap();
        let token = format!("{}:", rec.seed);
        let line = summary.lines().find(|l| l.contains(&rec.label())).unwrap();
        let got: f64 = line
            .split(' ')
            .chain(line.split(','))
            .find_map(|t| t.trim_matches('"').strip_prefix(&token).and_then(|x| x.split(['"', ' ']).next()?.parse().ok()))
            .unwrap();
        assert!((got - v).abs() < 1e-9);
    }
}

#[test]
fn partial_run_dir_reports_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::from_json(TWO_SEEDS).unwrap();
    let o = cmd_run(&plan, tmp.path(), None, None).unwrap();
    fs::remove_dir_all(o.dir.join("runs/NO_SHAPING/DoorKey5/2")).unwrap();
    let st = bin().arg("report").arg(&o.dir).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let b = cmd_report(&o.dir, &tmp.path().join("rep")).unwrap();
    assert!(b.gaps.iter().any(|g| g.contains("missing seeds [2]")), "{:?}", b.gaps);
}

fn crossed_plan(l: usize, r: usize) -> ExperimentPlan {
    let progs: Vec<String> = (0..l)
        .map(|i| {
            format!(
                "(program (rule r (when (and (not (flag k)) (contains event_text \"picked up\"))) (add {}) (set_flag k)))",
                0.05 + 0.05 * i as f64
            )
        })
        .collect();
    let seeds: Vec<u64> = (1..=r as u64).collect();
    let json = serde_json::json!({
        "envs": [], "seeds": [],
        "crossed": {"env": "DoorKey5", "programs": progs, "seeds": seeds, "episodes": 8}
    });
    ExperimentPlan::from_json(&json.to_string()).unwrap()
}

#[test]
fn decompose_complete_and_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cmd_run(&crossed_plan(2, 2), tmp.path(), None, None).unwrap();
    let spec = BootstrapSpec { resamples: 200, seed: 1 };
    let d = cmd_decompose(&o.dir, &tmp.path().join("d"), &spec).unwrap();
    assert_eq!((d.crossed.programs, d.crossed.seeds), (2, 2));
    if let Some(s) = d.crossed.shares {
        assert!((s.llm + s.rl + s.residual - 1.0).abs() < 1e-9);
    }
    assert!(tmp.path().join("d/decomposition.json").is_file());

    fs::remove_dir_all(o.dir.join("runs/CROSSED/p1/DoorKey5/2")).unwrap();
    let out = bin().arg("decompose").arg(&o.dir).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(program 1, seed 2)"), "{err}");
}

#[test]
fn lint_and_validate_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let flood = write(tmp.path(), "flood.rsp", "(program (rule step (when (= action 2)) (add 0.02)))");
    let o = bin().arg("lint").arg(&flood).arg("--env").arg("doorkey8").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FLOODING"));
    let bad = write(tmp.path(), "bad.rsp", "(program (rule r (when (> gripper_torque 0)) (add 0.1)))");
    assert_eq!(bin().arg("validate").arg(&bad).status().unwrap().code(), Some(2));
    let good = write(tmp.path(), "good.rsp", "(program (rule r (when terminated) (add 0.1)))");
    assert_eq!(bin().arg("validate").arg(&good).status().unwrap().code(), Some(0));
}

/// The scripted client never builds a network client.
#[test]
fn scripted_clients_stay_offline() {
    let c = Clients::new(Some(ClientSpec::Scripted("good-one-shot".into()))).unwrap();
    for env in EnvId::ALL {
        assert!(c.make(env, 1).unwrap().describe().starts_with("scripted:"));
    }
    assert!(Clients::new(None).unwrap().make(EnvId::DoorKey5, 1).is_err());
}
