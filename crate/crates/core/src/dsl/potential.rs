//! One-time milestone bonuses as an undiscounted potential difference.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::{Effect, Expr, Field, Op, RewardProgram, Rule};
use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialCheck {
    pub total_shaping: f64,
    pub potential_delta: f64,
    pub equal: bool,
}

/// Φ(m) = Σ b_i · m_i for the set of achieved milestones.
pub fn potential(bonuses: &BTreeMap<String, f64>, achieved: &BTreeSet<&str>) -> f64 {
    achieved.iter().map(|m| bonuses[*m]).sum()
}

/// `trajectory[t]` names the milestone first reached at step t, if any.
pub fn check_potential_equivalence(
    bonuses: &BTreeMap<String, f64>,
    trajectory: &[Option<String>],
) -> Result<PotentialCheck> {
    let mut achieved: BTreeSet<&str> = BTreeSet::new();
    let mut total = 0.0;
    for (t, m) in trajectory.iter().enumerate() {
        let Some(m) = m.as_deref() else { continue };
        let Some(b) = bonuses.get(m) else {
            return Err(contract(format!("step {t}: unknown milestone {m:?}")));
        };
        if !achieved.insert(m) {
            return Err(contract(format!("step {t}: milestone {m:?} fired twice")));
        }
        total += b;
    }
    let delta = potential(bonuses, &achieved) - potential(bonuses, &BTreeSet::new());
    Ok(PotentialCheck {
        total_shaping: total,
        potential_delta: delta,
        equal: (total - delta).abs() <= 1e-12 * total.abs().max(1.0),
    })
}

/// The reward program that pays each milestone once, keyed on an exact
/// `event_text` match.
pub fn milestone_program(bonuses: &BTreeMap<String, f64>) -> RewardProgram {
    let rules = bonuses
        .iter()
        .enumerate()
        .map(|(i, (m, b))| {
            let flag = format!("milestone_{i}");
            Rule {
                name: format!("bonus_{i}"),
                condition: Expr::Op(
                    Op::And,
                    vec![
                        Expr::Op(Op::Not, vec![Expr::Flag(flag.clone())]),
                        Expr::Op(Op::Eq, vec![Expr::Field(Field::EventText), Expr::Str(m.clone())]),
                    ],
                ),
                effects: vec![Effect::Add(Expr::Num(*b)), Effect::SetFlag(flag)],
            }
        })
        .collect();
    RewardProgram::from_rules(rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bonuses(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn traj(len: usize, fires: &[(usize, &str)]) -> Vec<Option<String>> {
        let mut t = vec![None; len];
        for (i, m) in fires {
            t[*i] = Some(m.to_string());
        }
        t
    }

    #[test]
    fn key_and_door() {
        let b = bonuses(&[("key", 0.2), ("door", 0.3)]);
        let r = check_potential_equivalence(&b, &traj(40, &[(5, "key"), (17, "door")])).unwrap();
        assert!((r.total_shaping - 0.5).abs() < 1e-12);
        assert!(r.equal);
    }

    #[test]
    fn nothing_fired() {
        let b = bonuses(&[("key", 0.2)]);
        let r = check_potential_equivalence(&b, &traj(10, &[])).unwrap();
        assert_eq!((r.total_shaping, r.potential_delta, r.equal), (0.0, 0.0, true));
    }

    #[test]
    fn length_invariant() {
        let b = bonuses(&[("key", 0.2)]);
        for len in [1usize, 10, 1000] {
            let r = check_potential_equivalence(&b, &traj(len, &[(len - 1, "key")])).unwrap();
            assert!((r.total_shaping - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn repeat_is_contract_violation() {
        let b = bonuses(&[("key", 0.2)]);
        assert!(check_potential_equivalence(&b, &traj(5, &[(1, "key"), (3, "key")])).is_err());
        assert!(check_potential_equivalence(&b, &traj(5, &[(1, "door")])).is_err());
    }

    #[test]
    fn generated_program_parses() {
        let p = milestone_program(&bonuses(&[("opened door", 0.3), ("picked up yellow key", 0.2)]));
        assert_eq!(crate::dsl::parse(&p.source_text).unwrap(), p);
        assert!(crate::dsl::lint(&p).is_clean());
    }
}
