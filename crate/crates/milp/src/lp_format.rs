//! Writer for the CPLEX LP text format.
//!
//! Every variable gets an explicit bound line, so the default `[0, +inf)` of
//! the format never applies implicitly. Numbers are written with the shortest
//! representation that parses back to the identical `f64`.

use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::model::{MilpModel, VarId, VarKind};

const WRAP: usize = 200;
const KEYWORDS: &[&str] =
    &["minimize", "maximize", "subject", "to", "st", "bounds", "binaries", "binary", "general", "end", "free", "inf", "infinity"];

#[derive(Debug, Error)]
pub enum LpWriteError {
    #[error("name `{0}` cannot be written in LP format")]
    InvalidName(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `[A-Za-z_][A-Za-z0-9_.]*`, not a keyword, and not something an LP reader
/// could take for a number in exponent form (`e12`).
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else { return false };
    if !(first.is_ascii_alphabetic() || first == '_') {
        return false;
    }
    if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
        return false;
    }
    if matches!(first, 'e' | 'E') && name[1..].chars().next().map_or(true, |c| c.is_ascii_digit()) {
        return false;
    }
    !KEYWORDS.contains(&name.to_ascii_lowercase().as_str())
}

pub fn write_lp(model: &MilpModel, out: &mut impl io::Write) -> Result<(), LpWriteError> {
    out.write_all(to_lp_string(model)?.as_bytes())?;
    Ok(())
}

pub fn to_lp_string(model: &MilpModel) -> Result<String, LpWriteError> {
    for name in model.variables().iter().map(|v| &v.name).chain(model.constraints().iter().map(|c| &c.name)) {
        if !is_valid_name(name) {
            return Err(LpWriteError::InvalidName(name.clone()));
        }
    }
    let names: Vec<&str> = model.variables().iter().map(|v| v.name.as_str()).collect();
    let mut s = String::new();
    writeln!(s, "\\ {}", model.name()).unwrap();
    s.push_str("Minimize\n");
    write_row(&mut s, "obj", model.objective(), &names, None);
    s.push_str("Subject To\n");
    for c in model.constraints() {
        write_row(&mut s, &c.name, &c.terms, &names, Some(format!("{} {}", c.sense, num(c.rhs))));
    }
    s.push_str("Bounds\n");
    for v in model.variables() {
        let (lo, hi) = (v.lower, v.upper);
        if lo == hi {
            writeln!(s, " {} = {}", v.name, num(lo)).unwrap();
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            writeln!(s, " {} free", v.name).unwrap();
        } else if hi == f64::INFINITY {
            writeln!(s, " {} >= {}", v.name, num(lo)).unwrap();
        } else {
            writeln!(s, " {} <= {} <= {}", bound(lo), v.name, num(hi)).unwrap();
        }
    }
    let binaries: Vec<&str> =
        model.variables().iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        s.push_str("Binaries\n");
        let mut line = String::new();
        for b in binaries {
            if line.len() + b.len() + 1 > WRAP {
                writeln!(s, "{line}").unwrap();
                line.clear();
            }
            line.push(' ');
            line.push_str(b);
        }
        writeln!(s, "{line}").unwrap();
    }
    s.push_str("End\n");
    Ok(s)
}

fn write_row(s: &mut String, label: &str, terms: &[(VarId, f64)], names: &[&str], tail: Option<String>) {
    let mut line = format!(" {label}:");
    let mut pieces: Vec<String> = terms
        .iter()
        .map(|&(v, c)| {
            let sign = if c.is_sign_negative() { '-' } else { '+' };
            format!("{sign} {} {}", num(c.abs()), names[v.index()])
        })
        .collect();
    if pieces.is_empty() && !names.is_empty() {
        pieces.push(format!("+ 0 {}", names[0]));
    }
    pieces.extend(tail);
    for p in pieces {
        if line.len() + p.len() + 1 > WRAP {
            writeln!(s, "{line}").unwrap();
            line = String::from(" ");
        }
        line.push(' ');
        line.push_str(&p);
    }
    writeln!(s, "{line}").unwrap();
}

fn bound(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        num(x)
    }
}

/// Shortest round-trip representation; integers without a trailing `.0`.
fn num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}
