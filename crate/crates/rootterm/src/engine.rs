//! Engine spec mini-grammar.
//!
//! ```text
//! spec   := kind [":" pair ("," pair)*]
//! kind   := "puct" | "puct+term" | "shuss"
//! pair   := key "=" value          value may be double-quoted
//! ```
//!
//! Keys: `puct` takes `c`; `puct+term` takes `c_e`, `term`, `weight`;
//! `shuss` takes `c_s`, `k`, `term`. Terms use prefix notation. Omitted
//! keys default to c = c_e = c_s = 0.2, weight = 1, k = 5, term = "sc".

use std::fmt;

use thiserror::Error;

use rootterm_core::arena::EngineSpec;
use rootterm_core::exprlang::{ExprError, Expression};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("unknown engine kind {0:?} (expected puct, puct+term or shuss)")]
    Kind(String),
    #[error("engine {kind}: unknown key {key:?}")]
    Key { kind: &'static str, key: String },
    #[error("engine {kind}: key {key:?} given twice")]
    Duplicate { kind: &'static str, key: String },
    #[error("expected key=value, found {0:?}")]
    Pair(String),
    #[error("unterminated quote in {0:?}")]
    Quote(String),
    #[error("bad number for {key}: {value:?}")]
    Number { key: String, value: String },
    #[error("{key} must be {what}, got {value}")]
    Range { key: String, what: &'static str, value: String },
    #[error("bad term: {0}")]
    Term(#[from] ExprError),
    #[error("term must be a complete expression")]
    IncompleteTerm,
}

const DEFAULT_CONSTANT: f64 = 0.2;
const DEFAULT_TOP_K: usize = 5;
const DEFAULT_TERM: &str = "sc";

fn split_pairs(body: &str) -> Result<Vec<(String, String)>, SpecError> {
    let mut pairs = Vec::new();
    let mut chars = body.chars().peekable();
    while chars.peek().is_some() {
        let mut key = String::new();
        for ch in chars.by_ref() {
            if ch == '=' {
                break;
            }
            key.push(ch);
        }
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            let mut closed = false;
            for ch in chars.by_ref() {
                if ch == '"' {
                    closed = true;
                    break;
                }
                value.push(ch);
            }
            if !closed {
                return Err(SpecError::Quote(body.into()));
            }
            match chars.next() {
                None | Some(',') => {}
                Some(_) => return Err(SpecError::Pair(body.into())),
            }
        } else {
            for ch in chars.by_ref() {
                if ch == ',' {
                    break;
                }
                value.push(ch);
            }
        }
        let key = key.trim().to_string();
        if key.is_empty() || key.contains(',') {
            return Err(SpecError::Pair(format!("{key}={value}")));
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

fn number(key: &str, value: &str) -> Result<f64, SpecError> {
    let v: f64 = value.trim().parse().map_err(|_| SpecError::Number {
        key: key.into(),
        value: value.into(),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(SpecError::Range {
            key: key.into(),
            what: "finite and non-negative",
            value: value.into(),
        });
    }
    Ok(v)
}

fn term(value: &str) -> Result<Expression, SpecError> {
    let e = Expression::parse(value)?;
    if !e.is_complete() {
        return Err(SpecError::IncompleteTerm);
    }
    Ok(e)
}

pub fn parse_engine(text: &str) -> Result<EngineSpec, SpecError> {
    let (kind, body) = match text.split_once(':') {
        Some((k, b)) => (k.trim(), b),
        None => (text.trim(), ""),
    };
    let (kind, allowed): (&'static str, &[&str]) = match kind {
        "puct" => ("puct", &["c"]),
        "puct+term" => ("puct+term", &["c_e", "term", "weight"]),
        "shuss" => ("shuss", &["c_s", "k", "term"]),
        other => return Err(SpecError::Kind(other.into())),
    };
    let pairs = split_pairs(body)?;
    for (i, (key, _)) in pairs.iter().enumerate() {
        if !allowed.contains(&key.as_str()) {
            return Err(SpecError::Key { kind, key: key.clone() });
        }
        if pairs[..i].iter().any(|(k, _)| k == key) {
            return Err(SpecError::Duplicate { kind, key: key.clone() });
        }
    }
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let constant = |key: &str| get(key).map_or(Ok(DEFAULT_CONSTANT), |v| number(key, v));
    let the_term = || term(get("term").unwrap_or(DEFAULT_TERM));
    Ok(match kind {
        "puct" => EngineSpec::Puct { c: constant("c")? },
        "puct+term" => EngineSpec::PuctTerm {
            c_e: constant("c_e")?,
            term: the_term()?,
            weight: get("weight").map_or(Ok(1.0), |v| number("weight", v))?,
        },
        _ => {
            let k = match get("k") {
                None => DEFAULT_TOP_K,
                Some(v) => v.trim().parse().map_err(|_| SpecError::Number {
                    key: "k".into(),
                    value: v.into(),
                })?,
            };
            if k < 1 {
                return Err(SpecError::Range {
                    key: "k".into(),
                    what: "at least 1",
                    value: k.to_string(),
                });
            }
            EngineSpec::Shuss {
                c_s: constant("c_s")?,
                top_k: k,
                term: the_term()?,
            }
        }
    })
}

/// Canonical text form that [`parse_engine`] reads back.
pub struct DisplaySpec<'a>(pub &'a EngineSpec);

impl fmt::Display for DisplaySpec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            EngineSpec::Puct { c } => write!(f, "puct:c={c}"),
            EngineSpec::PuctTerm { c_e, term, weight } => {
                write!(f, "puct+term:c_e={c_e},term=\"{term}\",weight={weight}")
            }
            EngineSpec::Shuss { c_s, top_k, term } => write!(f, "shuss:c_s={c_s},k={top_k},term=\"{term}\""),
        }
    }
}

/// Parses a comma-separated list, or `start..end:step` (end inclusive).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("bad grid {text:?}: expected a,b,c or start..end:step");
    if let Some((range, step)) = text.split_once(':') {
        let (start, end) = range.split_once("..").ok_or_else(bad)?;
        let (start, end, step): (f64, f64, f64) = (
            start.trim().parse().map_err(|_| bad())?,
            end.trim().parse().map_err(|_| bad())?,
            step.trim().parse().map_err(|_| bad())?,
        );
        if step.is_nan() || step <= 0.0 || !start.is_finite() || !end.is_finite() || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        // Round to kill accumulated float noise such as 0.15000000000000002.
        return Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect());
    }
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(bad());
    }
    Ok(values)
}
