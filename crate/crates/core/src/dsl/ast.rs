use std::fmt;

use serde::{Deserialize, Serialize};

/// Fields readable from a transition. The set is closed: anything else is a
/// typecheck error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    EventText,
    Carrying,
    AgentX,
    AgentY,
    StepCount,
    MaxSteps,
    Action,
    RawReward,
    Terminated,
    Truncated,
    DistanceToTarget,
    Velocity,
}

impl Field {
    pub const ALL: [Field; 12] = [
        Field::EventText,
        Field::Carrying,
        Field::AgentX,
        Field::AgentY,
        Field::StepCount,
        Field::MaxSteps,
        Field::Action,
        Field::RawReward,
        Field::Terminated,
        Field::Truncated,
        Field::DistanceToTarget,
        Field::Velocity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::EventText => "event_text",
            Field::Carrying => "carrying",
            Field::AgentX => "agent_x",
            Field::AgentY => "agent_y",
            Field::StepCount => "step_count",
            Field::MaxSteps => "max_steps",
            Field::Action => "action",
            Field::RawReward => "raw_reward",
            Field::Terminated => "terminated",
            Field::Truncated => "truncated",
            Field::DistanceToTarget => "distance_to_target",
            Field::Velocity => "velocity",
        }
    }

    pub fn from_name(s: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn ty(self) -> Type {
        match self {
            Field::EventText | Field::Carrying => Type::Str,
            Field::Terminated | Field::Truncated => Type::Bool,
            _ => Type::Num,
        }
    }

    pub fn is_position(self) -> bool {
        matches!(self, Field::AgentX | Field::AgentY | Field::DistanceToTarget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Type {
    Num,
    Bool,
    Str,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Num => "number",
            Type::Bool => "boolean",
            Type::Str => "string",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Contains,
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
    Not,
    Add,
    Sub,
    Mul,
    Min,
    Max,
    Abs,
}

impl Op {
    pub const ALL: [Op; 15] = [
        Op::Contains,
        Op::Eq,
        Op::Lt,
        Op::Gt,
        Op::Le,
        Op::Ge,
        Op::And,
        Op::Or,
        Op::Not,
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Min,
        Op::Max,
        Op::Abs,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Contains => "contains",
            Op::Eq => "=",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Min => "min",
            Op::Max => "max",
            Op::Abs => "abs",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|o| o.symbol() == s)
    }

    /// Allowed argument counts as (min, max).
    pub fn arity(self) -> (usize, usize) {
        match self {
            Op::Not | Op::Abs => (1, 1),
            Op::Sub => (1, 2),
            Op::Contains | Op::Eq | Op::Lt | Op::Gt | Op::Le | Op::Ge => (2, 2),
            Op::And | Op::Or | Op::Add | Op::Mul | Op::Min | Op::Max => (2, usize::MAX),
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Op::Eq | Op::Lt | Op::Gt | Op::Le | Op::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Str(String),
    Field(Field),
    /// `(flag k)`: persistent per-episode boolean, false when unset.
    Flag(String),
    /// `(num k)`: persistent per-episode number, 0 when unset.
    NumVar(String),
    Op(Op, Vec<Expr>),
}

impl Expr {
    pub fn depth(&self) -> usize {
        match self {
            Expr::Op(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// Pre-order walk.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        if let Expr::Op(_, args) = self {
            for a in args {
                a.visit(f);
            }
        }
    }

    pub fn mentions_field(&self, field: Field) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Field(f) if *f == field));
        hit
    }

    /// Top-level conjuncts: `(and a (and b c))` yields `[a, b, c]`.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Op(Op::And, args) => args.iter().flat_map(Expr::conjuncts).collect(),
            other => vec![other],
        }
    }

    /// Literal numeric value, seeing through unary minus.
    pub fn literal_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Op(Op::Sub, args) if args.len() == 1 => args[0].literal_num().map(|v| -v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Effect {
    Add(Expr),
    SetFlag(String),
    SetNum(String, Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub condition: Expr,
    pub effects: Vec<Effect>,
}

impl Rule {
    pub fn sets_flag(&self, key: &str) -> bool {
        self.effects.iter().any(|e| matches!(e, Effect::SetFlag(k) if k == key))
    }

    pub fn sets_num(&self, key: &str) -> bool {
        self.effects.iter().any(|e| matches!(e, Effect::SetNum(k, _) if k == key))
    }

    pub fn adds(&self) -> impl Iterator<Item = &Expr> {
        self.effects.iter().filter_map(|e| match e {
            Effect::Add(x) => Some(x),
            _ => None,
        })
    }
}

/// A parsed reward-shaping program. Equality compares rules only; the
/// original source text is kept for auditing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardProgram {
    pub rules: Vec<Rule>,
    pub source_text: String,
}

impl PartialEq for RewardProgram {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl RewardProgram {
    pub fn from_rules(rules: Vec<Rule>) -> RewardProgram {
        let mut p = RewardProgram {
            rules,
            source_text: String::new(),
        };
        p.source_text = super::print(&p);
        p
    }

    pub fn empty() -> RewardProgram {
        RewardProgram::from_rules(Vec::new())
    }

    pub fn fields_used(&self) -> Vec<Field> {
        let mut out = Vec::new();
        let mut push = |e: &Expr| {
            if let Expr::Field(f) = e {
                if !out.contains(f) {
                    out.push(*f);
                }
            }
        };
        for r in &self.rules {
            r.condition.visit(&mut push);
            for e in &r.effects {
                match e {
                    Effect::Add(x) | Effect::SetNum(_, x) => x.visit(&mut push),
                    Effect::SetFlag(_) => {}
                }
            }
        }
        out
    }
}
