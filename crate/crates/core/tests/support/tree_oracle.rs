//! Explicit-tree evaluator used as an oracle for the prefix evaluator.
//!
//! Works from token symbols only, builds a real tree, and implements the
//! protected operators from scratch with std floating point.

#![allow(dead_code)]

#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(String),
    Unary(String, Box<Tree>),
    Binary(String, Box<Tree>, Box<Tree>),
}

fn arity(sym: &str) -> usize {
    match sym {
        "+" | "-" | "*" | "/" | "=" | "max" | "min" => 2,
        "log" | "exp" => 1,
        _ => 0,
    }
}

/// Builds a tree from prefix symbols; `None` unless exactly one tree.
pub fn build(symbols: &[String]) -> Option<Tree> {
    fn go(symbols: &[String], at: &mut usize) -> Option<Tree> {
        let sym = symbols.get(*at)?.clone();
        *at += 1;
        Some(match arity(&sym) {
            0 => Tree::Leaf(sym),
            1 => Tree::Unary(sym, Box::new(go(symbols, at)?)),
            _ => {
                let l = go(symbols, at)?;
                let r = go(symbols, at)?;
                Tree::Binary(sym, Box::new(l), Box::new(r))
            }
        })
    }
    let mut at = 0;
    let t = go(symbols, &mut at)?;
    (at == symbols.len()).then_some(t)
}

fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else if v == f64::INFINITY {
        f64::MAX
    } else if v == f64::NEG_INFINITY {
        f64::MIN
    } else {
        v
    }
}

pub struct Vars {
    pub sc: f64,
    pub pr: f64,
    pub nbp: f64,
    pub nb: f64,
}

pub fn eval(t: &Tree, v: &Vars) -> f64 {
    match t {
        Tree::Leaf(s) => match s.as_str() {
            "sc" => v.sc,
            "pr" => v.pr,
            "nbp" => v.nbp,
            "nb" => v.nb,
            num => num.parse().expect("numeric constant"),
        },
        Tree::Unary(op, a) => {
            let x = eval(a, v);
            clamp(match op.as_str() {
                "log" => (if x > 1e-12 { x } else { 1e-12 }).ln(),
                "exp" => x.clamp(-60.0, 60.0).exp(),
                _ => unreachable!(),
            })
        }
        Tree::Binary(op, a, b) => {
            let x = eval(a, v);
            let y = eval(b, v);
            clamp(match op.as_str() {
                "+" => x + y,
                "-" => x - y,
                "*" => x * y,
                "/" => {
                    if y.abs() <= 1e-12 {
                        0.0
                    } else {
                        x / y
                    }
                }
                "=" => {
                    let scale = [1.0, x.abs(), y.abs()].into_iter().fold(0.0, f64::max);
                    if (x - y).abs() <= 1e-9 * scale {
                        1.0
                    } else {
                        0.0
                    }
                }
                "max" => {
                    if x >= y {
                        x
                    } else {
                        y
                    }
                }
                "min" => {
                    if x <= y {
                        x
                    } else {
                        y
                    }
                }
                _ => unreachable!(),
            })
        }
    }
}

pub fn infix(t: &Tree) -> String {
    match t {
        Tree::Leaf(s) => s.clone(),
        Tree::Unary(op, a) => format!("{op}({})", infix(a)),
        Tree::Binary(op, a, b) if op == "max" || op == "min" => format!("{op}({}, {})", infix(a), infix(b)),
        Tree::Binary(op, a, b) => format!("({} {op} {})", infix(a), infix(b)),
    }
}

/// Relative closeness with an absolute floor of 1.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
