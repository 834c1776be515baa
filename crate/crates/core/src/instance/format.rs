//! Line-oriented instance and solution documents.
//!
//! ```text
//! # comment
//! NAME demo
//! VARS
//! VAR x0 binary 0 1 -5
//! VAR y continuous 0 inf 1.5
//! CONSTRAINTS
//! CON cap <= 5 0:2 1:3
//! ```
//!
//! `VARS` / `CONSTRAINTS` section markers are optional on input. Senses `<=`,
//! `>=` and `=` are accepted (also `le`, `ge`, `eq`); the serializer only
//! writes canonical `<=` rows. An `=` row named `r` becomes `r.le` and `r.ge`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Assignment, ConstraintDef, InstanceError, MilpInstance, VarDef, VarKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Semantic { path: String, message: String },
}

impl From<InstanceError> for ParseError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::NoVariables => ParseError::Semantic {
                path: "vars".into(),
                message: "instance has no variables".into(),
            },
            InstanceError::Invalid { path, message } => ParseError::Semantic { path, message },
        }
    }
}

struct Tokens<'a> {
    line_no: usize,
    line: &'a str,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(line_no: usize, line: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in line.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    items.push((s, &line[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            items.push((s, &line[s..]));
        }
        Tokens {
            line_no,
            line,
            items,
            pos: 0,
        }
    }

    fn err_at(&self, byte: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line_no,
            column: self.line[..byte].chars().count() + 1,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        match self.items.get(self.pos) {
            Some(&t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(self.err_at(self.line.trim_end().len(), format!("expected {what}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ParseError> {
        let (at, tok) = self.next(what)?;
        let v: f64 = tok
            .parse()
            .map_err(|_| self.err_at(at, format!("invalid {what} `{tok}`")))?;
        if v.is_nan() {
            return Err(self.err_at(at, format!("{what} is NaN")));
        }
        Ok(v)
    }

    fn rest(&mut self) -> impl Iterator<Item = (usize, &'a str)> + '_ {
        let tail = &self.items[self.pos..];
        self.pos = self.items.len();
        tail.iter().copied()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.items.get(self.pos) {
            Some(&(at, tok)) => Err(self.err_at(at, format!("unexpected token `{tok}`"))),
            None => Ok(()),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_instance(text: &str) -> Result<MilpInstance, ParseError> {
    let mut name: Option<String> = None;
    let mut vars = Vec::new();
    let mut rows = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let mut toks = Tokens::new(idx + 1, line);
        if toks.items.is_empty() {
            continue;
        }
        let (at, kw) = toks.next("keyword")?;
        match kw {
            "NAME" => {
                let rest = line[at + kw.len()..].trim();
                if rest.is_empty() {
                    return Err(toks.err_at(line.len(), "expected instance name"));
                }
                if name.is_some() {
                    return Err(toks.err_at(at, "duplicate NAME"));
                }
                name = Some(rest.to_string());
                continue;
            }
            "VARS" | "CONSTRAINTS" => {}
            "VAR" => {
                let (_, vname) = toks.next("variable name")?;
                let (kat, kind) = toks.next("variable kind")?;
                let kind = match kind {
                    "binary" => VarKind::Binary,
                    "integer" => VarKind::Integer,
                    "continuous" => VarKind::Continuous,
                    other => {
                        return Err(toks.err_at(kat, format!("unknown variable kind `{other}`")))
                    }
                };
                let lb = toks.number("lower bound")?;
                let ub = toks.number("upper bound")?;
                let obj = toks.number("objective coefficient")?;
                vars.push(VarDef {
                    name: vname.to_string(),
                    kind,
                    lb,
                    ub,
                    obj,
                });
            }
            "CON" => {
                let (_, cname) = toks.next("constraint name")?;
                let (sat, sense) = toks.next("sense")?;
                let sense = match sense {
                    "<=" | "le" => Sense::Le,
                    ">=" | "ge" => Sense::Ge,
                    "=" | "==" | "eq" => Sense::Eq,
                    other => return Err(toks.err_at(sat, format!("unknown sense `{other}`"))),
                };
                let rhs = toks.number("rhs")?;
                let mut terms = Vec::new();
                let items: Vec<_> = toks.rest().collect();
                for (tat, tok) in items {
                    let (i, c) = tok
                        .split_once(':')
                        .ok_or_else(|| toks.err_at(tat, format!("expected idx:coef, got `{tok}`")))?;
                    let j: usize = i
                        .parse()
                        .map_err(|_| toks.err_at(tat, format!("invalid variable index `{i}`")))?;
                    let a: f64 = c.parse().map_err(|_| {
                        toks.err_at(tat + i.len() + 1, format!("invalid coefficient `{c}`"))
                    })?;
                    terms.push((j, a));
                }
                push_canonical(&mut rows, cname, sense, rhs, terms);
            }
            other => return Err(toks.err_at(at, format!("unknown statement `{other}`"))),
        }
        toks.finish()?;
    }

    let name = name.ok_or_else(|| ParseError::Semantic {
        path: "name".into(),
        message: "missing NAME statement".into(),
    })?;
    Ok(MilpInstance::new(name, vars, rows)?)
}

#[derive(Clone, Copy)]
enum Sense {
    Le,
    Ge,
    Eq,
}

fn push_canonical(
    rows: &mut Vec<ConstraintDef>,
    name: &str,
    sense: Sense,
    rhs: f64,
    terms: Vec<(usize, f64)>,
) {
    let negated = |terms: &[(usize, f64)]| terms.iter().map(|&(j, a)| (j, -a)).collect();
    match sense {
        Sense::Le => rows.push(ConstraintDef::new(name, terms, rhs)),
        Sense::Ge => rows.push(ConstraintDef::new(name, negated(&terms), -rhs)),
        Sense::Eq => {
            let ge = ConstraintDef::new(format!("{name}.ge"), negated(&terms), -rhs);
            rows.push(ConstraintDef::new(format!("{name}.le"), terms, rhs));
            rows.push(ge);
        }
    }
}

pub fn serialize_instance(instance: &MilpInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", instance.name());
    out.push_str("VARS\n");
    for v in instance.vars() {
        let _ = writeln!(out, "VAR {} {} {} {} {}", v.name, v.kind, v.lb, v.ub, v.obj);
    }
    out.push_str("CONSTRAINTS\n");
    for c in instance.constraints() {
        let _ = write!(out, "CON {} <= {}", c.name, c.rhs);
        for &(j, a) in &c.terms {
            let _ = write!(out, " {j}:{a}");
        }
        out.push('\n');
    }
    out
}

pub fn serialize_solution(instance: &MilpInstance, solution: &Assignment) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "SOL {}", solution.objective);
    for (v, x) in instance.vars().iter().zip(&solution.values) {
        let _ = writeln!(out, "{} {}", v.name, x);
    }
    out
}

/// Solutions joined by `---` separator lines.
pub fn serialize_solutions(instance: &MilpInstance, solutions: &[Assignment]) -> String {
    let mut out = String::new();
    for (k, s) in solutions.iter().enumerate() {
        if k > 0 {
            out.push_str("---\n");
        }
        out.push_str(&serialize_solution(instance, s));
    }
    out
}

/// Parses a single `SOL` block. Variables not listed default to zero.
pub fn parse_solution(text: &str, instance: &MilpInstance) -> Result<Assignment, ParseError> {
    let mut sols = parse_solutions(text, instance)?;
    match sols.len() {
        1 => Ok(sols.pop().unwrap()),
        k => Err(ParseError::Semantic {
            path: "solution".into(),
            message: format!("expected exactly one SOL block, found {k}"),
        }),
    }
}

pub fn parse_solutions(text: &str, instance: &MilpInstance) -> Result<Vec<Assignment>, ParseError> {
    let index: HashMap<&str, usize> = instance
        .vars()
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.as_str(), j))
        .collect();
    let mut out = Vec::new();
    let mut current: Option<(f64, Vec<f64>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let mut toks = Tokens::new(idx + 1, line);
        if toks.items.is_empty() {
            continue;
        }
        let (at, first) = toks.next("statement")?;
        if first == "---" {
            if let Some((obj, values)) = current.take() {
                out.push(Assignment {
                    values,
                    objective: obj,
                });
            }
        } else if first == "SOL" {
            if let Some((obj, values)) = current.take() {
                out.push(Assignment {
                    values,
                    objective: obj,
                });
            }
            let obj = toks.number("objective")?;
            current = Some((obj, vec![0.0; instance.num_vars()]));
        } else {
            let Some((_, values)) = current.as_mut() else {
                return Err(toks.err_at(at, "value line before SOL header"));
            };
            let &j = index
                .get(first)
                .ok_or_else(|| toks.err_at(at, format!("unknown variable `{first}`")))?;
            values[j] = toks.number("value")?;
        }
        toks.finish()?;
    }
    if let Some((obj, values)) = current {
        out.push(Assignment {
            values,
            objective: obj,
        });
    }
    Ok(out)
}
