//! Content-addressed run directories.
//!
//! ```text
//! <out>/<digest>/plan.json
//! <out>/<digest>/runs/<label>/<env>/<seed>/record.json
//!                                          episodes.jsonl
//!                                          prompts/iter<k>_attempt<a>.txt
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::RunRecord;
use crate::error::Result;
use crate::ppo::TrainRunLog;

/// Hex sha256 of the value's compact JSON form.
pub fn plan_digest<T: Serialize>(plan: &T) -> Result<String> {
    let bytes = serde_json::to_vec(plan)?;
    let h = Sha256::digest(&bytes);
    Ok(h.iter().map(|b| format!("{b:02x}")).collect())
}

/// File-system safe form of a condition label.
fn slug(label: &str) -> String {
    let mut s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    while s.ends_with('_') {
        s.pop();
    }
    s
}

pub fn record_dir(root: &Path, rec: &RunRecord) -> PathBuf {
    let mut label = slug(&rec.label());
    if let Some(l) = rec.program_index {
        label = format!("CROSSED/p{l}");
    }
    root.join("runs").join(label).join(rec.env.name()).join(rec.seed.to_string())
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    pub digest: String,
}

impl RunDir {
    /// `<out>/<first 16 hex digits of the plan digest>`, with plan.json written.
    pub fn create<T: Serialize>(out: &Path, plan: &T) -> Result<Self> {
        let digest = plan_digest(plan)?;
        let root = out.join(&digest[..16]);
        fs::create_dir_all(&root)?;
        fs::write(root.join("plan.json"), serde_json::to_string_pretty(plan)?)?;
        Ok(RunDir { root, digest })
    }

    /// An existing directory.
    pub fn open(root: &Path) -> Self {
        let digest = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        RunDir {
            root: root.to_path_buf(),
            digest,
        }
    }

    pub fn plan_path(&self) -> PathBuf {
        self.root.join("plan.json")
    }
}

pub fn save_record(root: &Path, rec: &RunRecord) -> Result<PathBuf> {
    let dir = record_dir(root, rec);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("record.json"), serde_json::to_string_pretty(rec)?)?;
    if let Some(log) = &rec.final_log {
        let f = BufWriter::new(fs::File::create(dir.join("episodes.jsonl"))?);
        log.write_jsonl(f)?;
    }
    let prompts = dir.join("prompts");
    for it in &rec.iterations {
        for (a, ex) in it.exchanges.iter().enumerate() {
            fs::create_dir_all(&prompts)?;
            let mut f = BufWriter::new(fs::File::create(prompts.join(format!("iter{}_attempt{}.txt", it.index, a + 1)))?);
            writeln!(f, "=== SYSTEM ===\n{}\n=== USER ===\n{}\n=== COMPLETION ===\n{}", ex.prompt.system_text, ex.prompt.user_text, ex.completion)?;
        }
    }
    Ok(dir)
}

/// Reads record.json and, when present, episodes.jsonl.
pub fn load_record(dir: &Path) -> Result<RunRecord> {
    let mut rec: RunRecord = serde_json::from_str(&fs::read_to_string(dir.join("record.json"))?)?;
    let ep = dir.join("episodes.jsonl");
    if ep.exists() {
        rec.final_log = Some(TrainRunLog::read_jsonl(BufReader::new(fs::File::open(ep)?))?);
    }
    Ok(rec)
}

/// Every record.json under `root/runs`, in sorted path order.
pub fn list_records(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let runs = root.join("runs");
    if !runs.exists() {
        return Ok(out);
    }
    let mut stack = vec![runs];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                if p.join("record.json").is_file() {
                    out.push(p.clone());
                }
                stack.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}
