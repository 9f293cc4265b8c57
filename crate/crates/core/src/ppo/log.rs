use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::envs::EnvId;
use crate::error::{contract, Error, Result};

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// Learning-curve smoothing window for an environment.
pub fn smoothing_window(env: EnvId) -> usize {
    if env.is_grid() {
        100
    } else {
        50
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub raw_return: f64,
    pub shaped_return: f64,
    pub success: bool,
    pub steps: u32,
    /// Sum of unscaled novelty bonuses, when RND is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunLog {
    pub env_id: EnvId,
    pub seed: u64,
    pub config: TrainConfig,
    /// Canonical text of the shaping program, if any.
    pub program: Option<String>,
    pub episodes: Vec<EpisodeRecord>,
    /// Saturation advisories raised by the program during training.
    pub advisories: u64,
    pub wall_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    env_id: EnvId,
    seed: u64,
    config: TrainConfig,
    program: Option<String>,
    advisories: u64,
    wall_time_s: f64,
}

impl TrainRunLog {
    /// Equality ignoring wall time.
    pub fn same_run(&self, other: &TrainRunLog) -> bool {
        TrainRunLog {
            wall_time_s: 0.0,
            ..self.clone()
        } == TrainRunLog {
            wall_time_s: 0.0,
            ..other.clone()
        }
    }

    pub fn successes(&self) -> Vec<bool> {
        self.episodes.iter().map(|e| e.success).collect()
    }

    pub fn raw_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.raw_return).collect()
    }

    /// Header line followed by one JSON object per episode.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            schema_version: LOG_SCHEMA_VERSION,
            env_id: self.env_id,
            seed: self.seed,
            config: self.config.clone(),
            program: self.program.clone(),
            advisories: self.advisories,
            wall_time_s: self.wall_time_s,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for e in &self.episodes {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<TrainRunLog> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| contract("empty run log"))??;
        let h: Header = serde_json::from_str(&first)?;
        if h.schema_version != LOG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "run log schema {} is not supported (expected {LOG_SCHEMA_VERSION})",
                h.schema_version
            )));
        }
        let mut episodes = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                episodes.push(serde_json::from_str(&line)?);
            }
        }
        Ok(TrainRunLog {
            env_id: h.env_id,
            seed: h.seed,
            config: h.config,
            program: h.program,
            episodes,
            advisories: h.advisories,
            wall_time_s: h.wall_time_s,
        })
    }
}

/// Trailing mean with a window that grows to `window` at the start.
pub fn rolling_mean(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub success_rate: f64,
    /// Mean shaped episode return over the same window.
    pub mean_reward: f64,
    /// Mean raw episode return over the same window.
    pub mean_raw_return: f64,
    pub episodes: usize,
    /// Smoothed success indicator over the whole run.
    pub sr_history: Vec<f64>,
}

/// Metrics over the most recent `window` episodes (or all, if fewer).
pub fn evaluate_final(log: &TrainRunLog, window: usize) -> Result<ProbeMetrics> {
    if log.episodes.is_empty() {
        return Err(contract("evaluate_final needs at least one episode"));
    }
    let n = log.episodes.len();
    let tail = &log.episodes[n - window.clamp(1, n)..];
    let k = tail.len() as f64;
    let succ: Vec<f64> = log.episodes.iter().map(|e| f64::from(u8::from(e.success))).collect();
    Ok(ProbeMetrics {
        success_rate: tail.iter().filter(|e| e.success).count() as f64 / k,
        mean_reward: tail.iter().map(|e| e.shaped_return).sum::<f64>() / k,
        mean_raw_return: tail.iter().map(|e| e.raw_return).sum::<f64>() / k,
        episodes: n,
        sr_history: rolling_mean(&succ, smoothing_window(log.env_id)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_with(successes: &[bool]) -> TrainRunLog {
        TrainRunLog {
            env_id: EnvId::DoorKey5,
            seed: 1,
            config: TrainConfig::for_env(EnvId::DoorKey5),
            program: None,
            episodes: successes
                .iter()
                .map(|&s| EpisodeRecord {
                    raw_return: if s { 0.9 } else { 0.0 },
                    shaped_return: if s { 1.2 } else { 0.1 },
                    success: s,
                    steps: 10,
                    intrinsic_return: None,
                })
                .collect(),
            advisories: 0,
            wall_time_s: 1.5,
        }
    }

    #[test]
    fn final_window_counts() {
        let mut s = vec![false; 2900];
        s.extend(vec![true; 100]);
        assert_eq!(evaluate_final(&log_with(&s), 100).unwrap().success_rate, 1.0);
        let s: Vec<bool> = (0..100).map(|i| i < 37).collect();
        let m = evaluate_final(&log_with(&s), 100).unwrap();
        assert!((m.success_rate - 0.37).abs() < 1e-12);
        assert!((m.mean_reward - (0.37 * 1.2 + 0.63 * 0.1)).abs() < 1e-12);
        let m = evaluate_final(&log_with(&[true, false, true]), 100).unwrap();
        assert!((m.success_rate - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.sr_history.len(), 3);
        assert!(evaluate_final(&log_with(&[]), 100).is_err());
    }

    #[test]
    fn rolling_mean_matches_naive() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 7) % 5) as f64).collect();
        let r = rolling_mean(&xs, 8);
        for i in 0..xs.len() {
            let lo = i.saturating_sub(7);
            let naive = xs[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64;
            assert!((r[i] - naive).abs() < 1e-9);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let log = log_with(&[true, false, true]);
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"schema_version\":1"));
        let back = TrainRunLog::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, log);
    }
}
