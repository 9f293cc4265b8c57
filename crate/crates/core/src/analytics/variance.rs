//! Variance attribution between reward programs and training seeds.

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, bootstrap_table_ci, BootstrapSpec, Interval};
use super::stats::{sample_std, sample_var};
use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSquares {
    pub rows: f64,
    pub cols: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub llm: f64,
    pub rl: f64,
    pub residual: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.llm + self.rl + self.residual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareIntervals {
    pub llm: Interval,
    pub rl: Interval,
    pub residual: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossedDecomposition {
    pub programs: usize,
    pub seeds: usize,
    pub mean_squares: MeanSquares,
    /// Before clamping.
    pub raw: Components,
    /// Negative components clamped to zero.
    pub components: Components,
    /// Clamped components over their sum. None when every cell is equal.
    pub shares: Option<Components>,
    pub ci: Option<ShareIntervals>,
}

fn check_table(table: &[Vec<f64>]) -> Result<(usize, usize)> {
    let l = table.len();
    let r = table.first().map_or(0, Vec::len);
    if l < 2 || r < 2 {
        return Err(contract(format!("crossed table needs at least 2×2, got {l}×{r}")));
    }
    if let Some(i) = table.iter().position(|row| row.len() != r) {
        return Err(contract(format!("crossed table row {i} has {} cells, expected {r}", table[i].len())));
    }
    if table.iter().flatten().any(|x| !x.is_finite()) {
        return Err(contract("crossed table has a non-finite cell"));
    }
    Ok((l, r))
}

/// Two-way mean squares, one observation per cell.
pub fn mean_squares(table: &[Vec<f64>]) -> Result<MeanSquares> {
    let (l, r) = check_table(table)?;
    let (lf, rf) = (l as f64, r as f64);
    let grand = table.iter().flatten().sum::<f64>() / (lf * rf);
    let row_means: Vec<f64> = table.iter().map(|row| row.iter().sum::<f64>() / rf).collect();
    let col_means: Vec<f64> = (0..r).map(|j| table.iter().map(|row| row[j]).sum::<f64>() / lf).collect();
    let ss_rows = rf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = lf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_err = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            ss_err += (x - row_means[i] - col_means[j] + grand).powi(2);
        }
    }
    Ok(MeanSquares {
        rows: ss_rows / (lf - 1.0),
        cols: ss_cols / (rf - 1.0),
        err: ss_err / ((lf - 1.0) * (rf - 1.0)),
    })
}

fn shares_of(c: &Components) -> Option<Components> {
    let t = c.total();
    // Relative to the table's own scale, an all-equal table has t == 0 up
    // to rounding.
    (t > 0.0).then(|| Components {
        llm: c.llm / t,
        rl: c.rl / t,
        residual: c.residual / t,
    })
}

fn decompose(table: &[Vec<f64>]) -> Result<CrossedDecomposition> {
    let (l, r) = check_table(table)?;
    let ms = mean_squares(table)?;
    let raw = Components {
        llm: (ms.rows - ms.err) / r as f64,
        rl: (ms.cols - ms.err) / l as f64,
        residual: ms.err,
    };
    let components = Components {
        llm: raw.llm.max(0.0),
        rl: raw.rl.max(0.0),
        residual: raw.residual.max(0.0),
    };
    Ok(CrossedDecomposition {
        programs: l,
        seeds: r,
        mean_squares: ms,
        raw,
        components,
        shares: shares_of(&components),
        ci: None,
    })
}

/// Random-effects variance components for an L×R program × seed table.
pub fn crossed_anova(table: &[Vec<f64>]) -> Result<CrossedDecomposition> {
    decompose(table)
}

/// `crossed_anova` plus row/column bootstrap intervals on the shares.
pub fn crossed_anova_with_ci(table: &[Vec<f64>], spec: &BootstrapSpec) -> Result<CrossedDecomposition> {
    let mut d = decompose(table)?;
    let stat = |t: &[Vec<f64>]| {
        let s = decompose(t).ok()?.shares?;
        Some([s.llm, s.rl, s.residual])
    };
    // A table of identical cells has no shares and no resample will either.
    if d.shares.is_some() {
        let [llm, rl, residual] = bootstrap_table_ci(table, stat, spec)?;
        d.ci = Some(ShareIntervals { llm, rl, residual });
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredDecomposition {
    /// Std across seeds with the program held fixed.
    pub rl_std: f64,
    /// Std across programs with the seed held fixed.
    pub llm_std: f64,
    /// Variance of the matching main-condition batch.
    pub total_var: f64,
    /// Component variance over total variance. Not shares; may exceed 1.
    pub rl_ratio: Option<f64>,
    pub llm_ratio: Option<f64>,
    pub rl_std_ci: Option<Interval>,
    pub llm_std_ci: Option<Interval>,
}

/// Single-anchor estimates. The two components share an anchor cell and
/// are not orthogonal.
pub fn anchored_decomposition(
    fixed_program: &[f64],
    fixed_seed: &[f64],
    main_batch: &[f64],
    spec: Option<&BootstrapSpec>,
) -> Result<AnchoredDecomposition> {
    if fixed_program.len() < 2 || fixed_seed.len() < 2 {
        return Err(contract("anchored decomposition needs at least 2 runs per anchor"));
    }
    let total_var = sample_var(main_batch);
    let rl_std = sample_std(fixed_program);
    let llm_std = sample_std(fixed_seed);
    let ratio = |s: f64| (total_var > 0.0).then(|| s * s / total_var);
    let std_stat = |xs: &[f64]| Some(sample_std(xs));
    let (rl_std_ci, llm_std_ci) = match spec {
        Some(s) => (Some(bootstrap_ci(fixed_program, std_stat, s)?), Some(bootstrap_ci(fixed_seed, std_stat, s)?)),
        None => (None, None),
    };
    Ok(AnchoredDecomposition {
        rl_std,
        llm_std,
        total_var,
        rl_ratio: ratio(rl_std),
        llm_ratio: ratio(llm_std),
        rl_std_ci,
        llm_std_ci,
    })
}
