//! Static checks for the three one-shot failure modes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Expr, Field, Op, RewardProgram, Rule};
use super::{parse, typecheck, DslError};
use crate::envs::{EnvKind, NUM_GRID_ACTIONS};

/// Every add literal below this magnitude counts as weak.
pub const WEAK_BONUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LintCategory {
    #[serde(rename = "FLOODING")]
    Flooding,
    #[serde(rename = "API_MISUSE")]
    ApiMisuse,
    #[serde(rename = "WEAK_SHAPING")]
    WeakShaping,
}

impl LintCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            LintCategory::Flooding => "FLOODING",
            LintCategory::ApiMisuse => "API_MISUSE",
            LintCategory::WeakShaping => "WEAK_SHAPING",
        }
    }
}

impl fmt::Display for LintCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintFinding {
    pub category: LintCategory,
    pub rule_name: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub findings: Vec<LintFinding>,
}

impl LintReport {
    pub fn has(&self, c: LintCategory) -> bool {
        self.findings.iter().any(|f| f.category == c)
    }

    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn categories(&self) -> Vec<LintCategory> {
        let mut c: Vec<_> = self.findings.iter().map(|f| f.category).collect();
        c.sort();
        c.dedup();
        c
    }
}

fn is_event_predicate(e: &Expr) -> bool {
    let nonempty_lit = |x: &Expr| matches!(x, Expr::Str(s) if !s.is_empty());
    match e {
        Expr::Op(Op::Contains, a) => matches!(a[0], Expr::Field(Field::EventText)) && nonempty_lit(&a[1]),
        Expr::Op(Op::Eq, a) => {
            (matches!(a[0], Expr::Field(Field::EventText)) && nonempty_lit(&a[1]))
                || (matches!(a[1], Expr::Field(Field::EventText)) && nonempty_lit(&a[0]))
        }
        _ => false,
    }
}

fn is_terminal_predicate(e: &Expr) -> bool {
    let terminal = |x: &Expr| matches!(x, Expr::Field(Field::Terminated | Field::Truncated));
    match e {
        x if terminal(x) => true,
        Expr::Op(Op::Eq, a) => {
            (terminal(&a[0]) && matches!(a[1], Expr::Bool(true)))
                || (terminal(&a[1]) && matches!(a[0], Expr::Bool(true)))
        }
        _ => false,
    }
}

/// A conjunct that can hold on only finitely many steps of an episode.
fn is_gate(rule: &Rule, conj: &Expr) -> bool {
    match conj {
        // One-time guard: the rule consumes its own flag.
        Expr::Op(Op::Not, a) => matches!(&a[0], Expr::Flag(k) if rule.sets_flag(k)),
        // Strict record comparison against a number the rule itself raises.
        Expr::Op(Op::Lt | Op::Gt, a) => a.iter().any(|x| matches!(x, Expr::NumVar(k) if rule.sets_num(k))),
        other => is_event_predicate(other) || is_terminal_predicate(other),
    }
}

fn may_be_positive(x: &Expr) -> bool {
    x.literal_num().is_none_or(|v| v > 0.0)
}

fn rule_is_gated(rule: &Rule) -> bool {
    rule.condition.conjuncts().into_iter().any(|c| is_gate(rule, c))
}

fn is_event_or_position_gated(rule: &Rule) -> bool {
    let mut hit = false;
    rule.condition.visit(&mut |e| {
        hit |= matches!(e, Expr::Field(f) if *f == Field::EventText || *f == Field::Carrying || f.is_position());
    });
    hit
}

fn action_index_misuse(rule: &Rule) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |e: &Expr| {
        if let Expr::Op(op, a) = e {
            if op.is_comparison() {
                for (x, y) in [(&a[0], &a[1]), (&a[1], &a[0])] {
                    if matches!(x, Expr::Field(Field::Action)) {
                        if let Some(v) = y.literal_num() {
                            if v.fract() != 0.0 || v < 0.0 || v >= NUM_GRID_ACTIONS as f64 {
                                out.push(format!(
                                    "action is compared with {v}, but valid action indices are 0..{}",
                                    NUM_GRID_ACTIONS - 1
                                ));
                            }
                        }
                    }
                }
            }
        }
    };
    rule.condition.visit(&mut check);
    for eff in &rule.effects {
        if let super::ast::Effect::Add(x) | super::ast::Effect::SetNum(_, x) = eff {
            x.visit(&mut check);
        }
    }
    out
}

fn typecheck_finding(e: &DslError) -> LintFinding {
    let rule_name = match e {
        DslError::Typecheck { rule: Some(r), .. } => r.clone(),
        _ => String::new(),
    };
    LintFinding {
        category: LintCategory::ApiMisuse,
        rule_name,
        message: e.to_string(),
    }
}

/// Lint a parsed program. With `env`, field availability is checked too.
pub fn lint_for_env(program: &RewardProgram, env: Option<EnvKind>) -> LintReport {
    let mut findings = Vec::new();
    if let Err(e) = typecheck(program, env) {
        findings.push(typecheck_finding(&e));
    }
    for rule in &program.rules {
        for message in action_index_misuse(rule) {
            findings.push(LintFinding {
                category: LintCategory::ApiMisuse,
                rule_name: rule.name.clone(),
                message,
            });
        }
        if rule.adds().any(may_be_positive) && !rule_is_gated(rule) {
            findings.push(LintFinding {
                category: LintCategory::Flooding,
                rule_name: rule.name.clone(),
                message: "positive bonus can fire on every step: the condition has no one-time flag guard, \
                          event predicate, terminal predicate or record comparison"
                    .into(),
            });
        }
    }
    let adding: Vec<&Rule> = program.rules.iter().filter(|r| r.adds().next().is_some()).collect();
    let all_small = adding
        .iter()
        .flat_map(|r| r.adds())
        .all(|x| x.literal_num().is_some_and(|v| v.abs() < WEAK_BONUS));
    if !adding.is_empty() && all_small && !adding.iter().any(|r| is_event_or_position_gated(r)) {
        findings.push(LintFinding {
            category: LintCategory::WeakShaping,
            rule_name: adding[0].name.clone(),
            message: format!(
                "every bonus is below {WEAK_BONUS} and none is tied to an event or position; \
                 shaping is unlikely to change behaviour"
            ),
        });
    }
    LintReport { findings }
}

pub fn lint(program: &RewardProgram) -> LintReport {
    lint_for_env(program, None)
}

/// Lint source text. Unknown fields and operators become API_MISUSE findings;
/// syntax errors are returned as errors.
pub fn lint_source(text: &str, env: Option<EnvKind>) -> Result<LintReport, DslError> {
    match parse(text) {
        Ok(p) => Ok(lint_for_env(&p, env)),
        Err(e @ DslError::Typecheck { .. }) => Ok(LintReport {
            findings: vec![typecheck_finding(&e)],
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(src: &str) -> Vec<LintCategory> {
        lint(&parse(src).unwrap()).categories()
    }

    #[test]
    fn forward_bonus_floods() {
        assert_eq!(
            cats("(program (rule fwd (when (= action 2)) (add 0.02)))"),
            vec![LintCategory::Flooding, LintCategory::WeakShaping]
        );
        assert_eq!(cats("(program (rule fwd (when (= action 2)) (add 0.1)))"), vec![LintCategory::Flooding]);
    }

    #[test]
    fn one_time_key_bonus_is_clean() {
        let src = r#"(program (rule key_bonus
            (when (and (not (flag key_picked_up)) (contains event_text "picked up")))
            (add 0.2) (set_flag key_picked_up)))"#;
        assert!(cats(src).is_empty());
    }

    #[test]
    fn foreign_flag_guard_still_floods() {
        // Holding-key bonus guarded by a flag some other rule sets.
        let src = r#"(program
          (rule door (when (and (not (flag door_opened)) (contains event_text "opened door")))
            (add 0.25) (set_flag door_opened))
          (rule hold (when (and (not (flag door_opened)) (contains carrying "key"))) (add 0.01)))"#;
        let r = lint(&parse(src).unwrap());
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].category, LintCategory::Flooding);
        assert_eq!(r.findings[0].rule_name, "hold");
    }

    #[test]
    fn record_progress_is_gated() {
        let src = "(program (rule prog (when (> agent_x (num best_x))) (add 0.05) (set_num best_x agent_x)))";
        assert!(cats(src).is_empty());
    }

    #[test]
    fn penalties_do_not_flood() {
        let src = "(program (rule late (when (> step_count 200)) (add -0.05)))";
        assert!(!cats(src).contains(&LintCategory::Flooding));
    }

    #[test]
    fn disjunction_is_not_a_gate() {
        let src = r#"(program (rule r (when (or (contains event_text "goal") (= action 2))) (add 0.2)))"#;
        assert_eq!(cats(src), vec![LintCategory::Flooding]);
    }

    #[test]
    fn bad_action_index() {
        let src = r#"(program (rule r (when (and (= action 9) (contains event_text "opened"))) (add 0.2)))"#;
        let r = lint(&parse(src).unwrap());
        assert_eq!(r.categories(), vec![LintCategory::ApiMisuse]);
        assert_eq!(r.findings[0].rule_name, "r");
    }

    #[test]
    fn unknown_field_through_source() {
        let r = lint_source("(program (rule grip (when (> gripper_torque 1)) (add 0.1)))", None).unwrap();
        assert_eq!(r.categories(), vec![LintCategory::ApiMisuse]);
        assert_eq!(r.findings[0].rule_name, "grip");
        assert!(lint_source("(program (rule", None).is_err());
    }

    #[test]
    fn env_field_misuse() {
        let p = parse("(program (rule v (when (and terminated (> velocity 1))) (add 0.2)))").unwrap();
        assert!(lint_for_env(&p, Some(EnvKind::Dense)).is_clean());
        assert!(lint_for_env(&p, Some(EnvKind::Grid)).has(LintCategory::ApiMisuse));
    }

    #[test]
    fn weak_shaping_needs_all_small_and_ungated() {
        let src = "(program (rule a (when (> step_count 5)) (add 0.01)) (rule b (when terminated) (add 0.01)))";
        assert!(cats(src).contains(&LintCategory::WeakShaping));
        let src = r#"(program (rule a (when (and (not (flag k)) (contains event_text "key"))) (add 0.01) (set_flag k)))"#;
        assert!(cats(src).is_empty());
    }
}
