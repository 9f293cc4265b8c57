use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{Effect, Expr, Field, Op, RewardProgram};
use super::DslError;
use crate::envs::InfoRecord;

/// Arithmetic results are saturated to this magnitude.
pub const SATURATION_LIMIT: f64 = 1e9;

/// One environment transition as seen by a reward program.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    /// Discrete action index; `None` for continuous action spaces.
    pub action: Option<u8>,
    pub raw_reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: &'a InfoRecord,
}

/// Per-episode persistent state written by `set_flag` / `set_num`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeShapingState {
    pub flags: BTreeMap<String, bool>,
    pub numbers: BTreeMap<String, f64>,
}

impl EpisodeShapingState {
    pub fn flag(&self, k: &str) -> bool {
        self.flags.get(k).copied().unwrap_or(false)
    }

    pub fn num(&self, k: &str) -> f64 {
        self.numbers.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Clamp the per-step sum of add-effects to [-1, 1].
    pub clamp_shaping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepShaping {
    /// raw_reward plus the added shaping.
    pub shaped_reward: f64,
    /// Sum of fired add-effects (after the optional clamp).
    pub shaping: f64,
    /// How many arithmetic results were saturated this step.
    pub saturations: u32,
}

#[derive(Debug, Clone, Copy)]
enum Value<'a> {
    Num(f64),
    Bool(bool),
    Str(&'a str),
}

struct Ctx<'a, 's> {
    t: &'s Transition<'a>,
    state: &'s EpisodeShapingState,
    rule: &'s str,
    saturations: u32,
}

fn contains_ignore_case(hay: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return true;
    }
    let (h, n) = (hay.as_bytes(), needle.as_bytes());
    h.len() >= n.len() && h.windows(n.len()).any(|w| w.eq_ignore_ascii_case(n))
}

impl<'a> Ctx<'a, '_> {
    fn runtime(&self, message: String) -> DslError {
        DslError::Runtime {
            rule: self.rule.to_string(),
            message,
        }
    }

    fn sat(&mut self, v: f64) -> f64 {
        if v.is_nan() {
            self.saturations += 1;
            0.0
        } else if v.abs() > SATURATION_LIMIT {
            self.saturations += 1;
            SATURATION_LIMIT.copysign(v)
        } else {
            v
        }
    }

    fn field(&mut self, f: Field) -> Result<Value<'a>, DslError> {
        let info: &'a InfoRecord = self.t.info;
        let missing = |s: &Self| s.runtime(format!("field {:?} is not available in this transition", f.name()));
        let v = match f {
            Field::EventText => return Ok(Value::Str(&info.event_text)),
            Field::Carrying => return Ok(Value::Str(&info.carrying)),
            Field::Terminated => return Ok(Value::Bool(self.t.terminated)),
            Field::Truncated => return Ok(Value::Bool(self.t.truncated)),
            Field::AgentX => info.agent_pos.map(|p| p.0 as f64),
            Field::AgentY => info.agent_pos.map(|p| p.1 as f64),
            Field::StepCount => Some(info.step_count as f64),
            Field::MaxSteps => Some(info.max_steps as f64),
            Field::Action => self.t.action.map(f64::from),
            Field::RawReward => Some(self.t.raw_reward),
            Field::DistanceToTarget => info.distance_to_target,
            Field::Velocity => info.velocity,
        };
        match v {
            Some(x) => Ok(Value::Num(self.sat(x))),
            None => Err(missing(self)),
        }
    }

    fn num(&mut self, e: &'a Expr) -> Result<f64, DslError> {
        match self.eval(e)? {
            Value::Num(v) => Ok(v),
            _ => Err(self.runtime(format!("expected a number from {}", super::print_expr(e)))),
        }
    }

    fn boolean(&mut self, e: &'a Expr) -> Result<bool, DslError> {
        match self.eval(e)? {
            Value::Bool(v) => Ok(v),
            _ => Err(self.runtime(format!("expected a boolean from {}", super::print_expr(e)))),
        }
    }

    fn eval(&mut self, e: &'a Expr) -> Result<Value<'a>, DslError> {
        Ok(match e {
            Expr::Num(v) => Value::Num(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Str(s) => Value::Str(s),
            Expr::Field(f) => self.field(*f)?,
            Expr::Flag(k) => Value::Bool(self.state.flag(k)),
            Expr::NumVar(k) => Value::Num(self.state.num(k)),
            Expr::Op(op, args) => match op {
                Op::And => {
                    for a in args {
                        if !self.boolean(a)? {
                            return Ok(Value::Bool(false));
                        }
                    }
                    Value::Bool(true)
                }
                Op::Or => {
                    for a in args {
                        if self.boolean(a)? {
                            return Ok(Value::Bool(true));
                        }
                    }
                    Value::Bool(false)
                }
                Op::Not => Value::Bool(!self.boolean(&args[0])?),
                Op::Contains => match (self.eval(&args[0])?, self.eval(&args[1])?) {
                    (Value::Str(h), Value::Str(n)) => Value::Bool(contains_ignore_case(h, n)),
                    _ => return Err(self.runtime("contains expects two strings".into())),
                },
                Op::Eq => match (self.eval(&args[0])?, self.eval(&args[1])?) {
                    (Value::Num(a), Value::Num(b)) => Value::Bool(a == b),
                    (Value::Bool(a), Value::Bool(b)) => Value::Bool(a == b),
                    (Value::Str(a), Value::Str(b)) => Value::Bool(a == b),
                    _ => return Err(self.runtime("= compares values of different types".into())),
                },
                Op::Lt | Op::Gt | Op::Le | Op::Ge => {
                    let a = self.num(&args[0])?;
                    let b = self.num(&args[1])?;
                    Value::Bool(match op {
                        Op::Lt => a < b,
                        Op::Gt => a > b,
                        Op::Le => a <= b,
                        _ => a >= b,
                    })
                }
                Op::Add | Op::Mul | Op::Min | Op::Max => {
                    let mut acc = self.num(&args[0])?;
                    for a in &args[1..] {
                        let v = self.num(a)?;
                        acc = match op {
                            Op::Add => acc + v,
                            Op::Mul => acc * v,
                            Op::Min => acc.min(v),
                            _ => acc.max(v),
                        };
                        acc = self.sat(acc);
                    }
                    Value::Num(acc)
                }
                Op::Sub => {
                    let a = self.num(&args[0])?;
                    let v = match args.get(1) {
                        Some(b) => a - self.num(b)?,
                        None => -a,
                    };
                    Value::Num(self.sat(v))
                }
                Op::Abs => Value::Num(self.num(&args[0])?.abs()),
            },
        })
    }
}

/// Evaluate every rule in order against `t`, mutating `state` in place.
/// Later rules observe state written by earlier ones.
pub fn evaluate_in_place(
    program: &RewardProgram,
    t: &Transition<'_>,
    state: &mut EpisodeShapingState,
    opts: EvalOptions,
) -> Result<StepShaping, DslError> {
    let mut shaping = 0.0;
    let mut saturations = 0;
    for rule in &program.rules {
        let mut ctx = Ctx {
            t,
            state,
            rule: &rule.name,
            saturations: 0,
        };
        let fired = ctx.boolean(&rule.condition)?;
        saturations += ctx.saturations;
        if !fired {
            continue;
        }
        for eff in &rule.effects {
            let mut ctx = Ctx {
                t,
                state,
                rule: &rule.name,
                saturations: 0,
            };
            match eff {
                Effect::Add(x) => {
                    let v = ctx.num(x)?;
                    shaping = ctx.sat(shaping + v);
                    saturations += ctx.saturations;
                }
                Effect::SetFlag(k) => {
                    state.flags.insert(k.clone(), true);
                }
                Effect::SetNum(k, x) => {
                    let v = ctx.num(x)?;
                    saturations += ctx.saturations;
                    state.numbers.insert(k.clone(), v);
                }
            }
        }
    }
    if opts.clamp_shaping {
        shaping = shaping.clamp(-1.0, 1.0);
    }
    Ok(StepShaping {
        shaped_reward: t.raw_reward + shaping,
        shaping,
        saturations,
    })
}

/// Pure evaluation: returns the shaped reward and a new state, leaving the
/// input state untouched.
pub fn evaluate(
    program: &RewardProgram,
    t: &Transition<'_>,
    state: &EpisodeShapingState,
) -> Result<(f64, EpisodeShapingState), DslError> {
    let mut next = state.clone();
    let out = evaluate_in_place(program, t, &mut next, EvalOptions::default())?;
    Ok((out.shaped_reward, next))
}
