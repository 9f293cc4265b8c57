//! S-expression reader and program parser.

use super::ast::{Effect, Expr, Field, Op, RewardProgram, Rule};
use super::{DslError, MAX_DEPTH, MAX_RULES, MAX_SOURCE_BYTES};

#[derive(Debug, Clone, PartialEq)]
enum Atom {
    Num(f64),
    Str(String),
    Sym(String),
}

#[derive(Debug, Clone, PartialEq)]
enum SExp {
    Atom(Atom, Pos),
    List(Vec<SExp>, Pos),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pos {
    line: usize,
    col: usize,
}

impl SExp {
    fn pos(&self) -> Pos {
        match self {
            SExp::Atom(_, p) | SExp::List(_, p) => *p,
        }
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> DslError {
    DslError::Syntax {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self, depth: usize) -> Result<SExp, DslError> {
        self.skip_trivia();
        let start = self.pos();
        match self.chars.peek().copied() {
            None => Err(syntax(start, "unexpected end of input")),
            Some(')') => Err(syntax(start, "unexpected ')'")),
            Some('(') => {
                // Program/rule/effect wrappers sit above expression depth.
                if depth > MAX_DEPTH + 4 {
                    return Err(syntax(start, format!("nesting deeper than {MAX_DEPTH}")));
                }
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => return Err(syntax(start, "unclosed '('")),
                        Some(')') => {
                            self.bump();
                            return Ok(SExp::List(items, start));
                        }
                        Some(_) => items.push(self.read(depth + 1)?),
                    }
                }
            }
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(syntax(start, "unterminated string")),
                        Some('"') => return Ok(SExp::Atom(Atom::Str(s), start)),
                        Some('\\') => match self.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            other => {
                                return Err(syntax(
                                    self.pos(),
                                    format!("invalid escape {:?}", other.unwrap_or(' ')),
                                ))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
            }
            Some(_) => {
                let mut tok = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';') {
                        break;
                    }
                    tok.push(c);
                    self.bump();
                }
                Ok(SExp::Atom(classify(&tok, start)?, start))
            }
        }
    }
}

fn classify(tok: &str, pos: Pos) -> Result<Atom, DslError> {
    let body = tok.strip_prefix(['-', '+']).unwrap_or(tok);
    let numeric_start = body.starts_with(|c: char| c.is_ascii_digit())
        || (body.starts_with('.') && body[1..].starts_with(|c: char| c.is_ascii_digit()));
    if numeric_start {
        return match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Atom::Num(v)),
            _ => Err(syntax(pos, format!("malformed number {tok:?}"))),
        };
    }
    Ok(Atom::Sym(tok.to_string()))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Builder {
    rule: Option<String>,
}

impl Builder {
    fn typecheck(&self, message: String, name: Option<String>) -> DslError {
        DslError::Typecheck {
            rule: self.rule.clone(),
            name,
            message,
        }
    }

    fn ident(&self, s: &SExp, what: &str) -> Result<String, DslError> {
        match s {
            SExp::Atom(Atom::Sym(name), _) if is_identifier(name) => Ok(name.clone()),
            other => Err(syntax(other.pos(), format!("expected {what} identifier"))),
        }
    }

    fn expr(&self, s: &SExp, depth: usize) -> Result<Expr, DslError> {
        if depth > MAX_DEPTH {
            return Err(syntax(s.pos(), format!("expression deeper than {MAX_DEPTH}")));
        }
        match s {
            SExp::Atom(Atom::Num(v), _) => Ok(Expr::Num(*v)),
            SExp::Atom(Atom::Str(v), _) => Ok(Expr::Str(v.clone())),
            SExp::Atom(Atom::Sym(name), pos) => match name.as_str() {
                "true" => Ok(Expr::Bool(true)),
                "false" => Ok(Expr::Bool(false)),
                _ if is_identifier(name) => Field::from_name(name).map(Expr::Field).ok_or_else(|| {
                    self.typecheck(format!("unknown field {name:?}"), Some(name.clone()))
                }),
                _ => Err(syntax(*pos, format!("unexpected symbol {name:?}"))),
            },
            SExp::List(items, pos) => {
                let (head, args) = items
                    .split_first()
                    .ok_or_else(|| syntax(*pos, "empty expression"))?;
                let head = match head {
                    SExp::Atom(Atom::Sym(h), _) => h.as_str(),
                    other => return Err(syntax(other.pos(), "expected an operator")),
                };
                match head {
                    "flag" | "num" => {
                        if args.len() != 1 {
                            return Err(syntax(*pos, format!("({head} key) takes one key")));
                        }
                        let key = self.ident(&args[0], "state key")?;
                        Ok(if head == "flag" {
                            Expr::Flag(key)
                        } else {
                            Expr::NumVar(key)
                        })
                    }
                    _ => {
                        let op = Op::from_symbol(head).ok_or_else(|| {
                            self.typecheck(format!("unknown operator {head:?}"), Some(head.to_string()))
                        })?;
                        let (lo, hi) = op.arity();
                        if args.len() < lo || args.len() > hi {
                            return Err(syntax(
                                *pos,
                                format!("{head} takes {} arguments, got {}", arity_text(lo, hi), args.len()),
                            ));
                        }
                        let args = args
                            .iter()
                            .map(|a| self.expr(a, depth + 1))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(Expr::Op(op, args))
                    }
                }
            }
        }
    }

    fn effect(&self, s: &SExp) -> Result<Effect, DslError> {
        let SExp::List(items, pos) = s else {
            return Err(syntax(s.pos(), "expected an effect list"));
        };
        let head = match items.first() {
            Some(SExp::Atom(Atom::Sym(h), _)) => h.as_str(),
            _ => return Err(syntax(*pos, "expected add, set_flag or set_num")),
        };
        match (head, items.len()) {
            ("add", 2) => Ok(Effect::Add(self.expr(&items[1], 1)?)),
            ("set_flag", 2) => Ok(Effect::SetFlag(self.ident(&items[1], "flag")?)),
            ("set_num", 3) => Ok(Effect::SetNum(
                self.ident(&items[1], "number")?,
                self.expr(&items[2], 1)?,
            )),
            ("add" | "set_flag" | "set_num", n) => {
                Err(syntax(*pos, format!("malformed {head} effect with {} arguments", n - 1)))
            }
            _ => Err(syntax(*pos, format!("unknown effect {head:?}"))),
        }
    }
}

fn arity_text(lo: usize, hi: usize) -> String {
    match (lo, hi) {
        (l, h) if l == h => l.to_string(),
        (l, usize::MAX) => format!("at least {l}"),
        (l, h) => format!("{l} to {h}"),
    }
}

/// Parse surface text into a program. Unknown fields are reported as
/// typecheck errors carrying the offending name.
pub fn parse(text: &str) -> Result<RewardProgram, DslError> {
    if text.len() > MAX_SOURCE_BYTES {
        return Err(DslError::Limit(format!(
            "program text is {} bytes; the limit is {MAX_SOURCE_BYTES}",
            text.len()
        )));
    }
    let mut reader = Reader::new(text);
    let top = reader.read(0)?;
    reader.skip_trivia();
    if reader.chars.peek().is_some() {
        return Err(syntax(reader.pos(), "trailing input after program"));
    }
    let SExp::List(items, pos) = top else {
        return Err(syntax(top.pos(), "expected (program ...)"));
    };
    match items.first() {
        Some(SExp::Atom(Atom::Sym(h), _)) if h == "program" => {}
        _ => return Err(syntax(pos, "expected (program ...)")),
    }
    let rule_forms = &items[1..];
    if rule_forms.len() > MAX_RULES {
        return Err(DslError::Limit(format!(
            "{} rules; the limit is {MAX_RULES}",
            rule_forms.len()
        )));
    }
    let mut b = Builder { rule: None };
    let mut rules: Vec<Rule> = Vec::with_capacity(rule_forms.len());
    for form in rule_forms {
        let SExp::List(parts, rpos) = form else {
            return Err(syntax(form.pos(), "expected (rule name (when ...) effects...)"));
        };
        match parts.first() {
            Some(SExp::Atom(Atom::Sym(h), _)) if h == "rule" => {}
            _ => return Err(syntax(*rpos, "expected (rule name (when ...) effects...)")),
        }
        if parts.len() < 3 {
            return Err(syntax(*rpos, "rule needs a name and a (when ...) clause"));
        }
        let name = b.ident(&parts[1], "rule")?;
        if rules.iter().any(|r| r.name == name) {
            return Err(syntax(parts[1].pos(), format!("duplicate rule name {name:?}")));
        }
        b.rule = Some(name.clone());
        let condition = match &parts[2] {
            SExp::List(w, wpos) if matches!(w.first(), Some(SExp::Atom(Atom::Sym(h), _)) if h == "when") => {
                if w.len() != 2 {
                    return Err(syntax(*wpos, "(when ...) takes exactly one condition"));
                }
                b.expr(&w[1], 1)?
            }
            other => return Err(syntax(other.pos(), "expected (when condition)")),
        };
        let effects = parts[3..]
            .iter()
            .map(|e| b.effect(e))
            .collect::<Result<Vec<_>, _>>()?;
        rules.push(Rule {
            name,
            condition,
            effects,
        });
        b.rule = None;
    }
    Ok(RewardProgram {
        rules,
        source_text: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program() {
        let p = parse("(program)").unwrap();
        assert!(p.rules.is_empty());
        assert_eq!(p.source_text, "(program)");
    }

    #[test]
    fn key_bonus_program() {
        let p = parse(
            r#"; one-time key bonus
            (program
              (rule key_bonus
                (when (and (not (flag key_picked_up)) (contains event_text "picked up")))
                (add 0.2)
                (set_flag key_picked_up)))"#,
        )
        .unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert_eq!(r.name, "key_bonus");
        assert_eq!(r.effects.len(), 2);
        let conj = r.condition.conjuncts();
        assert_eq!(
            conj[1],
            &Expr::Op(
                Op::Contains,
                vec![Expr::Field(Field::EventText), Expr::Str("picked up".into())]
            )
        );
    }

    #[test]
    fn unknown_field_is_typecheck_error() {
        let err = parse("(program (rule r (when (> gripper_torque 1)) (add 0.1)))").unwrap_err();
        match err {
            DslError::Typecheck { name, rule, .. } => {
                assert_eq!(name.as_deref(), Some("gripper_torque"));
                assert_eq!(rule.as_deref(), Some("r"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("(program\n  (rule r (when true) (add 0.1))\n  (rule").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 3, col: 3, .. }), "{err:?}");
        let err = parse("(program (rule r (when true) (add 1e999)))").unwrap_err();
        assert!(matches!(err, DslError::Syntax { .. }));
        let err = parse("(program) extra").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 1, col: 11, .. }), "{err:?}");
    }

    #[test]
    fn limits_enforced() {
        let rules: String = (0..33).map(|i| format!("(rule r{i} (when true) (add 0.1))")).collect();
        assert!(matches!(parse(&format!("(program {rules})")), Err(DslError::Limit(_))));
        let mut e = "1".to_string();
        for _ in 0..16 {
            e = format!("(abs {e})");
        }
        let text = format!("(program (rule r (when true) (add {e})))");
        assert!(matches!(parse(&text), Err(DslError::Syntax { .. })));
        let big = format!("(program {})", " ".repeat(MAX_SOURCE_BYTES));
        assert!(matches!(parse(&big), Err(DslError::Limit(_))));
    }

    #[test]
    fn negative_numbers_and_minus_operator() {
        let p = parse("(program (rule r (when (< (- velocity 1) -0.5)) (add -.25)))").unwrap();
        assert_eq!(p.rules[0].adds().next().unwrap(), &Expr::Num(-0.25));
    }

    #[test]
    fn string_escapes() {
        let p = parse(r#"(program (rule r (when (contains event_text "a\"b\\")) (add 0.1)))"#).unwrap();
        let mut found = None;
        p.rules[0].condition.visit(&mut |e| {
            if let Expr::Str(s) = e {
                found = Some(s.clone());
            }
        });
        assert_eq!(found.unwrap(), "a\"b\\");
    }
}
