//! Threshold detectors over probe metrics.
//!
//! Sparse mode looks at success rate and mean shaped reward; dense mode
//! compares the first and second halves of the per-episode return series.
//! All comparisons are strict, so a metric sitting exactly on a cutoff
//! never fires.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::ppo::ProbeMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticFlag {
    RewardHacking,
    ShapingWeak,
    Plateau,
    ReturnDeclining,
    ReturnStagnated,
}

impl DiagnosticFlag {
    pub const ALL: [DiagnosticFlag; 5] = [
        DiagnosticFlag::RewardHacking,
        DiagnosticFlag::ShapingWeak,
        DiagnosticFlag::Plateau,
        DiagnosticFlag::ReturnDeclining,
        DiagnosticFlag::ReturnStagnated,
    ];

    /// Warning string shown to the generator. Part of the prompt contract.
    pub fn message(self) -> &'static str {
        match self {
            DiagnosticFlag::RewardHacking => "REWARD HACKING DETECTED",
            DiagnosticFlag::ShapingWeak => "SHAPING TOO WEAK",
            DiagnosticFlag::Plateau => "PLATEAU DETECTED",
            DiagnosticFlag::ReturnDeclining => "RETURN DECLINING",
            DiagnosticFlag::ReturnStagnated => "RETURN STAGNATED",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticFlag::RewardHacking => "REWARD_HACKING",
            DiagnosticFlag::ShapingWeak => "SHAPING_WEAK",
            DiagnosticFlag::Plateau => "PLATEAU",
            DiagnosticFlag::ReturnDeclining => "RETURN_DECLINING",
            DiagnosticFlag::ReturnStagnated => "RETURN_STAGNATED",
        }
    }

    pub fn is_dense(self) -> bool {
        matches!(self, DiagnosticFlag::ReturnDeclining | DiagnosticFlag::ReturnStagnated)
    }
}

impl fmt::Display for DiagnosticFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticMode {
    Sparse,
    Dense,
}

/// Per-detector switches, for component-removal runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detectors {
    pub reward_hacking: bool,
    pub shaping_weak: bool,
    pub plateau: bool,
}

impl Default for Detectors {
    fn default() -> Self {
        Detectors {
            reward_hacking: true,
            shaping_weak: true,
            plateau: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauThresholds {
    pub sr_low: f64,
    pub sr_high: f64,
    pub min_episodes: usize,
    pub delta_cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseThresholds {
    pub decline_factor: f64,
    pub stagnate_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    pub rh_mr_cutoff: f64,
    pub rh_sr_cutoff: f64,
    pub sw_mr_cutoff: f64,
    pub sw_sr_cutoff: f64,
    pub plateau: PlateauThresholds,
    pub dense: DenseThresholds,
    pub enabled: Detectors,
    pub mode: DiagnosticMode,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        DiagnosticConfig {
            rh_mr_cutoff: 0.5,
            rh_sr_cutoff: 0.2,
            sw_mr_cutoff: 0.1,
            sw_sr_cutoff: 0.1,
            plateau: PlateauThresholds {
                sr_low: 0.1,
                sr_high: 0.7,
                min_episodes: 1000,
                delta_cutoff: 0.05,
            },
            dense: DenseThresholds {
                decline_factor: 0.9,
                stagnate_factor: 0.05,
            },
            enabled: Detectors::default(),
            mode: DiagnosticMode::Sparse,
        }
    }
}

impl DiagnosticConfig {
    /// Dense-reward defaults. Reward-hacking detection is off in this mode.
    pub fn dense() -> Self {
        DiagnosticConfig::default().with_mode(DiagnosticMode::Dense)
    }

    pub fn with_mode(mut self, mode: DiagnosticMode) -> Self {
        self.mode = mode;
        if mode == DiagnosticMode::Dense {
            self.enabled.reward_hacking = false;
        }
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub flags: Vec<DiagnosticFlag>,
    /// Metric values behind each fired flag.
    pub trigger_values: BTreeMap<DiagnosticFlag, BTreeMap<String, f64>>,
    pub messages: Vec<String>,
}

impl Diagnosis {
    fn fire(&mut self, flag: DiagnosticFlag, values: &[(&str, f64)]) {
        self.flags.push(flag);
        self.messages.push(flag.message().to_string());
        self.trigger_values
            .insert(flag, values.iter().map(|(k, v)| (k.to_string(), *v)).collect());
    }

    pub fn has(&self, flag: DiagnosticFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnTrend {
    pub first_half_mean: f64,
    pub second_half_mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// First-half vs second-half mean return. Odd counts drop the middle episode.
pub fn return_trend(returns: &[f64]) -> Result<ReturnTrend> {
    if returns.len() < 2 {
        return Err(contract(format!(
            "return trend needs at least 2 episodes, got {}",
            returns.len()
        )));
    }
    let h = returns.len() / 2;
    Ok(ReturnTrend {
        first_half_mean: mean(&returns[..h]),
        second_half_mean: mean(&returns[returns.len() - h..]),
    })
}

/// Share of the history at each end used by [`sr_improvement`].
pub const IMPROVEMENT_FRACTION: f64 = 0.2;

/// Mean of the last `fraction` of the history minus mean of the first.
/// Each segment has at least one entry; an empty history gives 0.
pub fn sr_improvement(sr_history: &[f64], fraction: f64) -> f64 {
    let n = sr_history.len();
    if n == 0 {
        return 0.0;
    }
    let k = ((n as f64 * fraction).floor() as usize).clamp(1, n);
    mean(&sr_history[n - k..]) - mean(&sr_history[..k])
}

pub fn diagnose_sparse(metrics: &ProbeMetrics, config: &DiagnosticConfig) -> Result<Diagnosis> {
    if config.mode != DiagnosticMode::Sparse {
        return Err(contract("diagnose_sparse called with a dense-mode config"));
    }
    let (sr, mr) = (metrics.success_rate, metrics.mean_reward);
    let mut d = Diagnosis::default();
    if config.enabled.reward_hacking && mr > config.rh_mr_cutoff && sr < config.rh_sr_cutoff {
        d.fire(DiagnosticFlag::RewardHacking, &[("mr", mr), ("sr", sr)]);
    }
    if config.enabled.shaping_weak && sr < config.sw_sr_cutoff && mr < config.sw_mr_cutoff {
        d.fire(DiagnosticFlag::ShapingWeak, &[("mr", mr), ("sr", sr)]);
    }
    let p = &config.plateau;
    if config.enabled.plateau && p.sr_low < sr && sr < p.sr_high && metrics.episodes > p.min_episodes {
        let delta = sr_improvement(&metrics.sr_history, IMPROVEMENT_FRACTION);
        if delta < p.delta_cutoff {
            d.fire(
                DiagnosticFlag::Plateau,
                &[("sr", sr), ("episodes", metrics.episodes as f64), ("delta_sr", delta)],
            );
        }
    }
    Ok(d)
}

pub fn diagnose_dense(returns: &[f64], config: &DiagnosticConfig) -> Result<Diagnosis> {
    if config.mode != DiagnosticMode::Dense {
        return Err(contract("diagnose_dense called with a sparse-mode config"));
    }
    let t = return_trend(returns)?;
    let (r1, r2) = (t.first_half_mean, t.second_half_mean);
    let vals = [("r1", r1), ("r2", r2)];
    let mut d = Diagnosis::default();
    if r2 < config.dense.decline_factor * r1 {
        d.fire(DiagnosticFlag::ReturnDeclining, &vals);
    } else if (r2 - r1).abs() < config.dense.stagnate_factor * r1.abs() {
        d.fire(DiagnosticFlag::ReturnStagnated, &vals);
    }
    Ok(d)
}

/// Dispatch on the config's mode.
pub fn diagnose(metrics: &ProbeMetrics, returns: &[f64], config: &DiagnosticConfig) -> Result<Diagnosis> {
    match config.mode {
        DiagnosticMode::Sparse => diagnose_sparse(metrics, config),
        DiagnosticMode::Dense => diagnose_dense(returns, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(mr: f64, sr: f64, episodes: usize) -> ProbeMetrics {
        ProbeMetrics {
            success_rate: sr,
            mean_reward: mr,
            mean_raw_return: 0.0,
            episodes,
            sr_history: vec![sr; 10],
        }
    }

    fn flags(mr: f64, sr: f64, eps: usize) -> Vec<DiagnosticFlag> {
        diagnose_sparse(&m(mr, sr, eps), &DiagnosticConfig::default()).unwrap().flags
    }

    #[test]
    fn sparse_examples() {
        use DiagnosticFlag::*;
        assert_eq!(flags(0.6, 0.1, 500), vec![RewardHacking]);
        assert_eq!(flags(0.05, 0.05, 500), vec![ShapingWeak]);
        assert!(flags(0.05, 0.5, 500).is_empty());
        assert_eq!(flags(2000.0, 0.0, 200), vec![RewardHacking]);
        assert_eq!(flags(0.05, 0.5, 1500), vec![Plateau]);
        // Cutoffs are strict.
        assert!(flags(0.5, 0.1, 500).is_empty());
        assert!(flags(0.6, 0.2, 500).is_empty());
        assert!(flags(0.05, 0.5, 1000).is_empty());
    }

    #[test]
    fn trigger_values_and_messages() {
        let d = diagnose_sparse(&m(0.6, 0.1, 500), &DiagnosticConfig::default()).unwrap();
        assert_eq!(d.messages, vec!["REWARD HACKING DETECTED".to_string()]);
        assert_eq!(d.trigger_values[&DiagnosticFlag::RewardHacking]["mr"], 0.6);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"REWARD_HACKING\""));
    }

    #[test]
    fn plateau_needs_flat_history() {
        let mut metrics = m(0.0, 0.5, 1500);
        metrics.sr_history = (0..100).map(|i| i as f64 / 200.0).collect();
        let d = diagnose_sparse(&metrics, &DiagnosticConfig::default()).unwrap();
        assert!(!d.has(DiagnosticFlag::Plateau));
    }

    #[test]
    fn dense_examples() {
        let cfg = DiagnosticConfig::dense();
        assert!(!cfg.enabled.reward_hacking);
        let halves = |a: f64, b: f64| diagnose_dense(&[a, a, b, b], &cfg).unwrap().flags;
        assert_eq!(halves(100.0, 80.0), vec![DiagnosticFlag::ReturnDeclining]);
        assert_eq!(halves(100.0, 102.0), vec![DiagnosticFlag::ReturnStagnated]);
        assert!(halves(100.0, 150.0).is_empty());
        assert!(diagnose_dense(&[1.0], &cfg).is_err());
        assert!(diagnose_sparse(&m(0.6, 0.1, 500), &cfg).is_err());
    }

    #[test]
    fn odd_counts_drop_the_middle() {
        let t = return_trend(&[1.0, 2.0, 1000.0, 4.0, 6.0]).unwrap();
        assert_eq!(t.first_half_mean, 1.5);
        assert_eq!(t.second_half_mean, 5.0);
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(sr_improvement(&[0.4; 50], 0.2), 0.0);
        let ramp: Vec<f64> = (0..=100).map(|i| i as f64 * 0.005).collect();
        assert!(sr_improvement(&ramp, 0.2) > 0.05);
        // 10 entries: first 2 average 0.15, last 2 average 0.85.
        let h = [0.1, 0.2, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.8, 0.9];
        assert!((sr_improvement(&h, 0.2) - 0.7).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dense_never_reports_hacking(rs in prop::collection::vec(-1e4f64..1e4, 2..60)) {
            let d = diagnose_dense(&rs, &DiagnosticConfig::dense()).unwrap();
            prop_assert!(!d.has(DiagnosticFlag::RewardHacking));
            prop_assert!(d.flags.len() <= 1);
        }

        #[test]
        fn disabling_removes_only_that_flag(mr in -1.0f64..2.0, sr in 0.0f64..1.0, eps in 0usize..3000, which in 0usize..3) {
            let base = DiagnosticConfig::default();
            let mut cfg = base;
            let target = match which {
                0 => { cfg.enabled.reward_hacking = false; DiagnosticFlag::RewardHacking }
                1 => { cfg.enabled.shaping_weak = false; DiagnosticFlag::ShapingWeak }
                _ => { cfg.enabled.plateau = false; DiagnosticFlag::Plateau }
            };
            let full = diagnose_sparse(&m(mr, sr, eps), &base).unwrap().flags;
            let cut = diagnose_sparse(&m(mr, sr, eps), &cfg).unwrap().flags;
            let expected: Vec<_> = full.into_iter().filter(|f| *f != target).collect();
            prop_assert_eq!(cut, expected);
        }
    }
}
