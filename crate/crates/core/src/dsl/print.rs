use std::fmt::Write;

use super::ast::{Effect, Expr, RewardProgram};

fn push_str_lit(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn push_num(out: &mut String, v: f64) {
    // Display for f64 is the shortest string that round-trips.
    let _ = write!(out, "{v}");
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(v) => push_num(out, *v),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Str(s) => push_str_lit(out, s),
        Expr::Field(f) => out.push_str(f.name()),
        Expr::Flag(k) => {
            let _ = write!(out, "(flag {k})");
        }
        Expr::NumVar(k) => {
            let _ = write!(out, "(num {k})");
        }
        Expr::Op(op, args) => {
            out.push('(');
            out.push_str(op.symbol());
            for a in args {
                out.push(' ');
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

/// Canonical formatting: one rule per block, one effect per line.
pub fn print(program: &RewardProgram) -> String {
    if program.rules.is_empty() {
        return "(program)\n".to_string();
    }
    let mut out = String::from("(program");
    for rule in &program.rules {
        let _ = write!(out, "\n  (rule {}\n    (when ", rule.name);
        write_expr(&mut out, &rule.condition);
        out.push(')');
        for eff in &rule.effects {
            out.push_str("\n    ");
            match eff {
                Effect::Add(x) => {
                    out.push_str("(add ");
                    write_expr(&mut out, x);
                    out.push(')');
                }
                Effect::SetFlag(k) => {
                    let _ = write!(out, "(set_flag {k})");
                }
                Effect::SetNum(k, x) => {
                    let _ = write!(out, "(set_num {k} ");
                    write_expr(&mut out, x);
                    out.push(')');
                }
            }
        }
        out.push(')');
    }
    out.push_str(")\n");
    out
}
