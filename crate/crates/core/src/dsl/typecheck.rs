use super::ast::{Effect, Expr, Field, Op, RewardProgram, Type};
use super::DslError;
use crate::envs::EnvKind;

/// Whether an environment family populates `field`.
pub fn field_available(field: Field, kind: EnvKind) -> bool {
    match field {
        Field::AgentX | Field::AgentY | Field::Action => kind == EnvKind::Grid,
        Field::DistanceToTarget => kind == EnvKind::Reach,
        Field::Velocity => kind == EnvKind::Dense,
        _ => true,
    }
}

struct Checker<'a> {
    rule: &'a str,
    env: Option<EnvKind>,
}

impl Checker<'_> {
    fn err(&self, message: String, name: Option<String>) -> DslError {
        DslError::Typecheck {
            rule: Some(self.rule.to_string()),
            name,
            message,
        }
    }

    fn expect(&self, e: &Expr, want: Type, ctx: &str) -> Result<(), DslError> {
        let got = self.infer(e)?;
        if got != want {
            return Err(self.err(
                format!("{ctx} expects a {want}, got a {got} ({})", super::print_expr(e)),
                None,
            ));
        }
        Ok(())
    }

    fn infer(&self, e: &Expr) -> Result<Type, DslError> {
        Ok(match e {
            Expr::Num(_) | Expr::NumVar(_) => Type::Num,
            Expr::Bool(_) | Expr::Flag(_) => Type::Bool,
            Expr::Str(_) => Type::Str,
            Expr::Field(f) => {
                if let Some(kind) = self.env {
                    if !field_available(*f, kind) {
                        return Err(self.err(
                            format!("field {:?} is not provided by {kind:?} environments", f.name()),
                            Some(f.name().to_string()),
                        ));
                    }
                }
                f.ty()
            }
            Expr::Op(op, args) => {
                let sym = op.symbol();
                match op {
                    Op::Contains => {
                        for a in args {
                            self.expect(a, Type::Str, sym)?;
                        }
                        Type::Bool
                    }
                    Op::Eq => {
                        let l = self.infer(&args[0])?;
                        let r = self.infer(&args[1])?;
                        if l != r {
                            return Err(self.err(format!("= compares a {l} with a {r}"), None));
                        }
                        Type::Bool
                    }
                    Op::Lt | Op::Gt | Op::Le | Op::Ge => {
                        for a in args {
                            self.expect(a, Type::Num, sym)?;
                        }
                        Type::Bool
                    }
                    Op::And | Op::Or | Op::Not => {
                        for a in args {
                            self.expect(a, Type::Bool, sym)?;
                        }
                        Type::Bool
                    }
                    Op::Add | Op::Sub | Op::Mul | Op::Min | Op::Max | Op::Abs => {
                        for a in args {
                            self.expect(a, Type::Num, sym)?;
                        }
                        Type::Num
                    }
                }
            }
        })
    }
}

/// Check types and, when `env` is given, that every referenced field exists
/// in that environment family.
pub fn typecheck(program: &RewardProgram, env: Option<EnvKind>) -> Result<(), DslError> {
    for rule in &program.rules {
        let c = Checker { rule: &rule.name, env };
        c.expect(&rule.condition, Type::Bool, "when")?;
        for eff in &rule.effects {
            match eff {
                Effect::Add(x) => c.expect(x, Type::Num, "add")?,
                Effect::SetNum(_, x) => c.expect(x, Type::Num, "set_num")?,
                Effect::SetFlag(_) => {}
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn check(src: &str, env: Option<EnvKind>) -> Result<(), DslError> {
        typecheck(&parse(src).unwrap(), env)
    }

    #[test]
    fn well_typed_programs_pass() {
        let src = r#"(program (rule r (when (and (contains carrying "key") (> (+ agent_x 1) (num best))))
                      (add (* 0.1 (abs (- agent_x 2)))) (set_num best agent_x)))"#;
        assert!(check(src, None).is_ok());
        assert!(check(src, Some(EnvKind::Grid)).is_ok());
    }

    #[test]
    fn type_mismatches_rejected() {
        assert!(check("(program (rule r (when (+ 1 2)) (add 0.1)))", None).is_err());
        assert!(check(r#"(program (rule r (when (= agent_x "a")) (add 0.1)))"#, None).is_err());
        assert!(check("(program (rule r (when true) (add terminated)))", None).is_err());
        assert!(check("(program (rule r (when (contains event_text 3)) (add 0.1)))", None).is_err());
    }

    #[test]
    fn env_field_availability() {
        let src = "(program (rule r (when (> velocity 1)) (add 0.1)))";
        assert!(check(src, Some(EnvKind::Dense)).is_ok());
        let err = check(src, Some(EnvKind::Grid)).unwrap_err();
        assert!(matches!(err, DslError::Typecheck { name: Some(ref n), .. } if n == "velocity"));
        let src = "(program (rule r (when (= action 2)) (add 0.1)))";
        assert!(check(src, Some(EnvKind::Reach)).is_err());
    }
}
