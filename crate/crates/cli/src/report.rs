//! Tables, Markdown and plots recomputed from a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use rewardlab_core::analytics::{
    anchored_decomposition, crossed_anova_with_ci, curve_band, holm_bonferroni, summarize_batch, welch_test,
    AnchoredDecomposition, BatchSummary, BootstrapSpec, CrossedDecomposition,
};
use rewardlab_core::envs::EnvId;
use rewardlab_core::orchestrator::{list_records, load_record, ExperimentPlan, RunRecord};

use crate::svg::{curves_svg, Series};

pub struct Loaded {
    pub plan: Option<ExperimentPlan>,
    pub records: Vec<RunRecord>,
}

pub fn load_run_dir(dir: &Path) -> Result<Loaded> {
    let plan = match fs::read_to_string(dir.join("plan.json")) {
        Ok(t) => Some(serde_json::from_str(&t).context("plan.json")?),
        Err(_) => None,
    };
    let mut records = Vec::new();
    for d in list_records(dir)? {
        records.push(load_record(&d).with_context(|| format!("{}", d.display()))?);
    }
    Ok(Loaded { plan, records })
}

/// Grid tasks and continuous tasks are corrected as separate families.
pub fn family(env: EnvId) -> &'static str {
    if env.is_grid() {
        "grid"
    } else {
        "continuous"
    }
}

fn groups(records: &[RunRecord]) -> BTreeMap<(EnvId, String), Vec<RunRecord>> {
    let mut g: BTreeMap<(EnvId, String), Vec<RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.program_index.is_none()) {
        g.entry((r.env, r.label())).or_default().push(r.clone());
    }
    for v in g.values_mut() {
        v.sort_by_key(|r| r.seed);
    }
    g
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    env: String,
    condition: String,
    n: usize,
    mean: f64,
    std: f64,
    missing: String,
    values: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestRow {
    pub family: String,
    pub env: String,
    pub a: String,
    pub b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub delta: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub p_corr: f64,
    pub reject: bool,
    pub d: f64,
}

#[derive(Debug, Serialize)]
pub struct DecompositionOut {
    pub env: EnvId,
    pub programs: Vec<String>,
    pub seeds: Vec<u64>,
    pub table: Vec<Vec<f64>>,
    pub crossed: CrossedDecomposition,
    pub anchored: AnchoredDecomposition,
}

#[derive(Debug, Default)]
pub struct ReportBundle {
    pub summary_rows: usize,
    pub tests: Vec<TestRow>,
    pub svgs: Vec<String>,
    pub gaps: Vec<String>,
    pub decomposition: bool,
}

/// Missing (program, seed) cells of a crossed batch.
#[derive(Debug)]
pub struct IncompleteTable(pub Vec<(usize, u64)>);

impl std::fmt::Display for IncompleteTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cells: Vec<String> = self.0.iter().map(|(p, s)| format!("(program {p}, seed {s})")).collect();
        write!(f, "incomplete crossed table; missing {}", cells.join(", "))
    }
}

impl std::error::Error for IncompleteTable {}

pub fn decompose(loaded: &Loaded, spec: &BootstrapSpec) -> Result<Option<DecompositionOut>> {
    let cells: Vec<&RunRecord> = loaded.records.iter().filter(|r| r.program_index.is_some()).collect();
    let crossed = loaded.plan.as_ref().and_then(|p| p.crossed.clone());
    if cells.is_empty() && crossed.is_none() {
        return Ok(None);
    }
    let env = crossed.as_ref().map(|c| c.env).or_else(|| cells.first().map(|r| r.env)).expect("crossed env");
    let mut seeds: Vec<u64> = match &crossed {
        Some(c) => c.seeds.clone(),
        None => cells.iter().map(|r| r.seed).collect(),
    };
    seeds.sort_unstable();
    seeds.dedup();
    let l = match &crossed {
        Some(c) if !c.programs.is_empty() => c.programs.len(),
        Some(c) => c.generate,
        None => cells.iter().filter_map(|r| r.program_index).max().map_or(0, |m| m + 1),
    };
    let mut table = vec![vec![None; seeds.len()]; l];
    let mut programs = vec![String::new(); l];
    for r in &cells {
        let (Some(i), Some(j)) = (r.program_index, seeds.iter().position(|&s| s == r.seed)) else { continue };
        if i < l {
            table[i][j] = r.final_value();
            programs[i] = r.final_program.clone().unwrap_or_default();
        }
    }
    let missing: Vec<(usize, u64)> = (0..l)
        .flat_map(|i| seeds.iter().enumerate().map(move |(j, &s)| (i, j, s)))
        .filter(|&(i, j, _)| table[i][j].is_none())
        .map(|(i, _, s)| (i, s))
        .collect();
    if !missing.is_empty() {
        return Err(IncompleteTable(missing).into());
    }
    let table: Vec<Vec<f64>> = table.into_iter().map(|row| row.into_iter().map(Option::unwrap).collect()).collect();
    let crossed = crossed_anova_with_ci(&table, spec)?;
    // Anchors: program 0 across seeds, seed 0 across programs. The main
    // batch is the one-shot batch for the env when the run has one.
    let fixed_program = table[0].clone();
    let fixed_seed: Vec<f64> = table.iter().map(|row| row[0]).collect();
    let main: Vec<f64> = {
        let g = groups(&loaded.records);
        match g.get(&(env, "ONE_SHOT".to_string())) {
            Some(rs) if rs.len() >= 2 => rs.iter().filter_map(RunRecord::final_value).collect(),
            _ => table.iter().flatten().copied().collect(),
        }
    };
    let anchored = anchored_decomposition(&fixed_program, &fixed_seed, &main, Some(spec))?;
    Ok(Some(DecompositionOut {
        env,
        programs,
        seeds,
        table,
        crossed,
        anchored,
    }))
}

fn fmt_values(s: &BatchSummary) -> String {
    s.values.iter().map(|v| format!("{}:{}", v.seed, v.value)).collect::<Vec<_>>().join(" ")
}

pub fn write_report(loaded: &Loaded, out: &Path) -> Result<ReportBundle> {
    fs::create_dir_all(out)?;
    let mut bundle = ReportBundle::default();
    let groups = groups(&loaded.records);
    let expected: Vec<u64> = loaded.plan.as_ref().map(|p| p.seeds.clone()).unwrap_or_default();

    let mut summaries: BTreeMap<(EnvId, String), BatchSummary> = BTreeMap::new();
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    for ((env, label), recs) in &groups {
        let mut s = summarize_batch(recs)?;
        for &seed in &expected {
            if !recs.iter().any(|r| r.seed == seed) {
                s.missing.push(seed);
            }
        }
        s.missing.sort_unstable();
        if !s.missing.is_empty() {
            bundle.gaps.push(format!("{} {label}: missing seeds {:?}", env.name(), s.missing));
        }
        w.serialize(SummaryRow {
            env: env.name().into(),
            condition: label.clone(),
            n: s.n,
            mean: s.mean,
            std: s.std,
            missing: s.missing.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
            values: fmt_values(&s),
        })?;
        bundle.summary_rows += 1;
        summaries.insert((*env, label.clone()), s);
    }
    w.flush()?;

    // Planned comparisons, per env, Holm-corrected within each family.
    let comparisons = loaded.plan.as_ref().map(|p| p.comparisons.clone()).unwrap_or_default();
    let envs: Vec<EnvId> = summaries.keys().map(|k| k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut rows: Vec<TestRow> = Vec::new();
    for &env in &envs {
        for (a, b) in &comparisons {
            let (Some(sa), Some(sb)) = (summaries.get(&(env, a.clone())), summaries.get(&(env, b.clone()))) else {
                bundle.gaps.push(format!("{} {a} vs {b}: a condition has no records", env.name()));
                continue;
            };
            let xa: Vec<f64> = sa.values.iter().map(|v| v.value).collect();
            let xb: Vec<f64> = sb.values.iter().map(|v| v.value).collect();
            match welch_test(&xa, &xb) {
                Ok(t) => rows.push(TestRow {
                    family: family(env).into(),
                    env: env.name().into(),
                    a: a.clone(),
                    b: b.clone(),
                    n_a: t.n_a,
                    n_b: t.n_b,
                    delta: t.delta,
                    t: t.t,
                    df: t.df,
                    p: t.p,
                    p_corr: f64::NAN,
                    reject: false,
                    d: t.cohens_d,
                }),
                Err(e) => bundle.gaps.push(format!("{} {a} vs {b}: {e}", env.name())),
            }
        }
    }
    for fam in ["grid", "continuous"] {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].family == fam).collect();
        let h = holm_bonferroni(&idx.iter().map(|&i| rows[i].p).collect::<Vec<_>>())?;
        for (k, &i) in idx.iter().enumerate() {
            rows[i].p_corr = h.adjusted[k];
            rows[i].reject = h.reject[k];
        }
    }
    let mut w = csv::Writer::from_path(out.join("tests.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    bundle.tests = rows;

    for &env in &envs {
        let series: Vec<Series> = summaries
            .iter()
            .filter(|(k, s)| k.0 == env && !s.curves.is_empty())
            .map(|(k, s)| {
                let (mean, std) = curve_band(&s.curves);
                Series {
                    label: k.1.clone(),
                    mean,
                    std,
                }
            })
            .collect();
        let y = if env.spec().has_binary_success { "success rate" } else { "episode return" };
        let name = format!("curves_{}.svg", env.name());
        fs::write(out.join(&name), curves_svg(env.name(), y, &series))?;
        bundle.svgs.push(name);
    }

    let decomposition = match decompose(loaded, &BootstrapSpec::default()) {
        Ok(Some(d)) => {
            fs::write(out.join("decomposition.json"), serde_json::to_string_pretty(&d)?)?;
            bundle.decomposition = true;
            Some(d)
        }
        Ok(None) => None,
        Err(e) => {
            bundle.gaps.push(e.to_string());
            None
        }
    };

    fs::write(out.join("report.md"), markdown(&summaries, &bundle, decomposition.as_ref()))?;
    Ok(bundle)
}

fn markdown(summaries: &BTreeMap<(EnvId, String), BatchSummary>, bundle: &ReportBundle, dec: Option<&DecompositionOut>) -> String {
    let mut md = String::from("# Results\n\nFinal-window metric per seed, mean ± sample std.\n\n");
    md.push_str("| env | condition | n | mean ± std |\n|---|---|---|---|\n");
    for ((env, label), s) in summaries {
        let note = if s.single() { " (n = 1)" } else { "" };
        let _ = writeln!(md, "| {} | {label} | {} | {:.3} ± {:.3}{note} |", env.name(), s.n, s.mean, s.std);
    }
    if !bundle.tests.is_empty() {
        md.push_str("\n## Comparisons\n\nWelch t-test, Holm-corrected within each family.\n\n");
        md.push_str("| family | env | a | b | Δ | p | p (Holm) | d |\n|---|---|---|---|---|---|---|---|\n");
        for t in &bundle.tests {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {:+.3} | {:.4} | {:.4}{} | {:.2} |",
                t.family,
                t.env,
                t.a,
                t.b,
                t.delta,
                t.p,
                t.p_corr,
                if t.reject { " *" } else { "" },
                t.d
            );
        }
    }
    if let Some(d) = dec {
        md.push_str("\n## Variance decomposition\n\n");
        if let Some(s) = d.crossed.shares {
            let _ = writeln!(
                md,
                "Crossed {}×{} on {}: program {:.2}, seed {:.2}, residual {:.2}.",
                d.crossed.programs,
                d.crossed.seeds,
                d.env.name(),
                s.llm,
                s.rl,
                s.residual
            );
        }
        let _ = writeln!(
            md,
            "Anchored: seed std {:.3}, program std {:.3} (ratios are not shares).",
            d.anchored.rl_std, d.anchored.llm_std
        );
    }
    if !bundle.gaps.is_empty() {
        md.push_str("\n## Gaps\n\n");
        for g in &bundle.gaps {
            let _ = writeln!(md, "- {g}");
        }
    }
    for s in &bundle.svgs {
        let _ = writeln!(md, "\n![{s}]({s})");
    }
    md
}
