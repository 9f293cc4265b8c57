//! Two-sample tests and multiple-comparison correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{contract, Result};

/// Floor on per-sample variances so degenerate samples give finite t.
pub const VARIANCE_FLOOR: f64 = 1e-12;

pub const ALPHA: f64 = 0.05;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance, n−1 denominator; 0 for fewer than two values.
pub fn sample_var(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_var(xs).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// mean(a) − mean(b)
    pub delta: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub cohens_d: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Cohen's d with the pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0);
    let delta = mean(a) - mean(b);
    if delta == 0.0 {
        return 0.0;
    }
    delta / pooled.max(VARIANCE_FLOOR).sqrt()
}

/// Two-sided Welch t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(contract(format!("welch_test needs two samples of size >= 2, got {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(contract("welch_test got a non-finite value"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let delta = mean(a) - mean(b);
    let qa = sample_var(a).max(VARIANCE_FLOOR) / na;
    let qb = sample_var(b).max(VARIANCE_FLOOR) / nb;
    let se2 = qa + qb;
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let t = delta / se2.sqrt();
    let p = if delta == 0.0 {
        1.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| contract(format!("t distribution: {e}")))?;
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        delta,
        t,
        df,
        p,
        cohens_d: cohens_d(a, b),
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    /// In input order.
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

/// Holm step-down adjustment; a hypothesis is rejected when its adjusted
/// p-value is strictly below `ALPHA`.
pub fn holm_bonferroni(p_values: &[f64]) -> Result<HolmResult> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(contract(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let v = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(v);
        adjusted[i] = running;
    }
    let reject = adjusted.iter().map(|&p| p < ALPHA).collect();
    Ok(HolmResult { adjusted, reject })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welch_examples() {
        let a = [0.3, 0.1, 0.7, 0.2];
        let r = welch_test(&a, &a).unwrap();
        assert_eq!((r.delta, r.p, r.cohens_d), (0.0, 1.0, 0.0));

        let r = welch_test(&[0.0; 3], &[1.0; 3]).unwrap();
        assert!(r.p < 1e-6 && r.p.is_finite(), "{r:?}");

        let r = welch_test(&[0.5; 4], &[0.5; 5]).unwrap();
        assert_eq!((r.p, r.cohens_d), (1.0, 0.0));

        assert!(welch_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    // Frozen from scipy.stats.ttest_ind(a, b, equal_var=False).
    #[test]
    fn welch_matches_reference() {
        let r = welch_test(&[0.1, 0.2, 0.3, 0.4], &[0.3, 0.4, 0.5, 0.6]).unwrap();
        assert!((r.t - -2.1908902300206643).abs() < 1e-9, "{}", r.t);
        assert!((r.p - 0.07098765432098764).abs() < 1e-9, "{}", r.p);
        assert!((r.df - 6.0).abs() < 1e-9);
        assert!((r.cohens_d - -1.5491933384829668).abs() < 1e-9);
    }

    #[test]
    fn holm_examples() {
        let h = holm_bonferroni(&[0.03]).unwrap();
        assert_eq!((h.adjusted[0], h.reject[0]), (0.03, true));
        // sorted 0.01, 0.03, 0.04 -> 3*0.01, 2*0.03, max(0.06, 1*0.04)
        let h = holm_bonferroni(&[0.01, 0.04, 0.03]).unwrap();
        let want = [0.03, 0.06, 0.06];
        for (x, w) in h.adjusted.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
        assert_eq!(h.reject, vec![true, false, false]);
        let h = holm_bonferroni(&[1.0, 1.0]).unwrap();
        assert_eq!(h.adjusted, vec![1.0, 1.0]);
        assert_eq!(h.reject, vec![false, false]);
        assert!(holm_bonferroni(&[1.5]).is_err());
        assert!(holm_bonferroni(&[]).unwrap().adjusted.is_empty());
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 2..12)
    }

    proptest! {
        #[test]
        fn welch_symmetry_and_shift(a in sample(), b in sample(), c in -50.0f64..50.0) {
            let ab = welch_test(&a, &b).unwrap();
            let ba = welch_test(&b, &a).unwrap();
            prop_assert!((ab.delta + ba.delta).abs() < 1e-9);
            prop_assert!((ab.cohens_d + ba.cohens_d).abs() < 1e-9);
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
            let sa: Vec<f64> = a.iter().map(|x| x + c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + c).collect();
            let s = welch_test(&sa, &sb).unwrap();
            if sample_var(&a) > 1e-6 || sample_var(&b) > 1e-6 {
                prop_assert!((s.t - ab.t).abs() < 1e-6 * (1.0 + ab.t.abs()));
                prop_assert!((s.p - ab.p).abs() < 1e-6);
            }
        }

        #[test]
        fn holm_never_lowers_and_keeps_rank(ps in prop::collection::vec(0.0f64..=1.0, 1..15)) {
            let h = holm_bonferroni(&ps).unwrap();
            for i in 0..ps.len() {
                prop_assert!(h.adjusted[i] >= ps[i]);
                prop_assert!(h.adjusted[i] <= 1.0);
                for j in 0..ps.len() {
                    if ps[i] < ps[j] {
                        prop_assert!(h.adjusted[i] <= h.adjusted[j]);
                    }
                }
            }
        }
    }
}
