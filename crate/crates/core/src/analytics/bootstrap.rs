//! Percentile bootstrap over samples and over two-way tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

pub const DEFAULT_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        BootstrapSpec {
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

impl BootstrapSpec {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapSpec {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolated quantile of sorted values.
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let pos = q * (xs.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < xs.len() {
        xs[i] + frac * (xs[i + 1] - xs[i])
    } else {
        xs[i]
    }
}

/// Draw `spec.resamples` statistics. Draw `k` uses its own RNG stream, so
/// results do not depend on evaluation order. Undefined statistics are
/// redrawn, up to ten times the resample count in total.
fn collect<F>(spec: &BootstrapSpec, mut draw: F) -> Result<Vec<f64>>
where
    F: FnMut(&mut ChaCha8Rng) -> Option<f64>,
{
    if spec.resamples == 0 {
        return Err(contract("bootstrap needs at least one resample"));
    }
    let cap = spec.resamples * 10;
    let mut stats = Vec::with_capacity(spec.resamples);
    let mut k = 0u64;
    while stats.len() < spec.resamples {
        if k as usize >= cap {
            return Err(contract(format!(
                "statistic undefined on too many resamples ({} of {cap})",
                cap - stats.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k);
        k += 1;
        if let Some(v) = draw(&mut rng).filter(|v| v.is_finite()) {
            stats.push(v);
        }
    }
    stats.sort_by(f64::total_cmp);
    Ok(stats)
}

fn interval(sorted: &[f64]) -> Interval {
    Interval {
        lo: quantile_sorted(sorted, 0.025),
        hi: quantile_sorted(sorted, 0.975),
    }
}

/// 95% percentile interval of `statistic` over resamples of `data`.
pub fn bootstrap_ci<F>(data: &[f64], statistic: F, spec: &BootstrapSpec) -> Result<Interval>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    if data.is_empty() {
        return Err(contract("bootstrap_ci needs data"));
    }
    let n = data.len();
    let mut buf = vec![0.0; n];
    let stats = collect(spec, |rng| {
        for b in buf.iter_mut() {
            *b = data[rng.random_range(0..n)];
        }
        statistic(&buf)
    })?;
    Ok(interval(&stats))
}

/// Rows and columns resampled independently with replacement.
pub fn resample_table(table: &[Vec<f64>], rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let l = table.len();
    let r = table[0].len();
    let rows: Vec<usize> = (0..l).map(|_| rng.random_range(0..l)).collect();
    let cols: Vec<usize> = (0..r).map(|_| rng.random_range(0..r)).collect();
    rows.iter().map(|&i| cols.iter().map(|&j| table[i][j]).collect()).collect()
}

/// 95% percentile intervals for several statistics of one table, all
/// computed on the same row/column resamples.
pub fn bootstrap_table_ci<F, const K: usize>(table: &[Vec<f64>], statistic: F, spec: &BootstrapSpec) -> Result<[Interval; K]>
where
    F: Fn(&[Vec<f64>]) -> Option<[f64; K]>,
{
    if table.is_empty() || table[0].is_empty() {
        return Err(contract("bootstrap_table_ci needs a non-empty table"));
    }
    let mut per: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.resamples); K];
    let mut k = 0u64;
    let cap = spec.resamples * 10;
    while per[0].len() < spec.resamples {
        if k as usize >= cap {
            return Err(contract("statistic undefined on too many table resamples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k);
        k += 1;
        let t = resample_table(table, &mut rng);
        if let Some(vals) = statistic(&t).filter(|v| v.iter().all(|x| x.is_finite())) {
            for (p, v) in per.iter_mut().zip(vals) {
                p.push(v);
            }
        }
    }
    Ok(std::array::from_fn(|i| {
        per[i].sort_by(f64::total_cmp);
        interval(&per[i])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::stats::mean;

    fn m(xs: &[f64]) -> Option<f64> {
        Some(mean(xs))
    }

    #[test]
    fn constant_data_gives_point_interval() {
        let d = [0.7; 12];
        let i = bootstrap_ci(&d, m, &BootstrapSpec::with_seed(3)).unwrap();
        let point = m(&d).unwrap();
        assert_eq!((i.lo, i.hi), (point, point));
    }

    #[test]
    fn deterministic_given_seed() {
        let d: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = BootstrapSpec::with_seed(11);
        assert_eq!(bootstrap_ci(&d, m, &s).unwrap(), bootstrap_ci(&d, m, &s).unwrap());
        let other = bootstrap_ci(&d, m, &BootstrapSpec::with_seed(12)).unwrap();
        assert_ne!(bootstrap_ci(&d, m, &s).unwrap(), other);
    }

    #[test]
    fn undefined_statistics_are_redrawn_then_capped() {
        let d = [0.0, 1.0];
        let spec = BootstrapSpec { resamples: 50, seed: 1 };
        // Undefined when every draw is the same value, half the time.
        let i = bootstrap_ci(&d, |x| (x[0] != x[1]).then_some(0.5), &spec).unwrap();
        assert_eq!((i.lo, i.hi), (0.5, 0.5));
        assert!(bootstrap_ci(&d, |_| None, &spec).is_err());
        assert!(bootstrap_ci(&[], m, &spec).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.0);
        assert_eq!(quantile_sorted(&xs, 0.1), 0.4);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }
}
