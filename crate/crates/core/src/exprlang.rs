//! Expression alphabet, the incremental generation game and protected evaluation.
//!
//! Expressions are stored as prefix (preorder) token lists. A partial
//! expression tracks how many operator slots are still unassigned ("open
//! leaves"); the legal-move rule keeps `tokens + open_leaves` within the
//! token budget so every playout terminates with a bounded expression.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Default token budget for generated expressions.
pub const DEFAULT_MAX_LEN: usize = 12;

const DIV_GUARD: f64 = 1e-12;
const LOG_FLOOR: f64 = 1e-12;
const EXP_CLAMP: f64 = 60.0;
const EQ_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("expression is already complete")]
    AlreadyComplete,
    #[error("expression is incomplete ({open_leaves} open leaves)")]
    Incomplete { open_leaves: usize },
    #[error("atom `{atom}` is not legal here")]
    IllegalAtom { atom: Atom },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("empty expression text")]
    Empty,
    #[error("trailing tokens after a complete expression, starting at `{0}`")]
    Trailing(String),
    #[error("expression has {len} tokens, budget is {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("malformed infix text at byte {0}")]
    Infix(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Constant,
    Variable,
    Operator,
}

/// One symbol of the expression alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    One,
    Two,
    Three,
    Hundred,
    /// Sum of the scores of the playouts starting with the move.
    Sc,
    /// Policy prior of the move.
    Pr,
    /// Number of playouts starting with the move.
    Nbp,
    /// Total number of playouts.
    Nb,
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Max,
    Min,
    Log,
    Exp,
}

impl Atom {
    pub const COUNT: usize = 17;

    pub const ALL: [Atom; Atom::COUNT] = [
        Atom::One,
        Atom::Two,
        Atom::Three,
        Atom::Hundred,
        Atom::Sc,
        Atom::Pr,
        Atom::Nbp,
        Atom::Nb,
        Atom::Add,
        Atom::Sub,
        Atom::Mul,
        Atom::Div,
        Atom::Eq,
        Atom::Max,
        Atom::Min,
        Atom::Log,
        Atom::Exp,
    ];

    /// Position in [`Atom::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Atom::One => "1",
            Atom::Two => "2",
            Atom::Three => "3",
            Atom::Hundred => "100",
            Atom::Sc => "sc",
            Atom::Pr => "pr",
            Atom::Nbp => "nbp",
            Atom::Nb => "nb",
            Atom::Add => "+",
            Atom::Sub => "-",
            Atom::Mul => "*",
            Atom::Div => "/",
            Atom::Eq => "=",
            Atom::Max => "max",
            Atom::Min => "min",
            Atom::Log => "log",
            Atom::Exp => "exp",
        }
    }

    pub fn arity(self) -> usize {
        match self.kind() {
            AtomKind::Constant | AtomKind::Variable => 0,
            AtomKind::Operator => match self {
                Atom::Log | Atom::Exp => 1,
                _ => 2,
            },
        }
    }

    pub fn kind(self) -> AtomKind {
        match self {
            Atom::One | Atom::Two | Atom::Three | Atom::Hundred => AtomKind::Constant,
            Atom::Sc | Atom::Pr | Atom::Nbp | Atom::Nb => AtomKind::Variable,
            _ => AtomKind::Operator,
        }
    }

    pub fn constant_value(self) -> Option<f64> {
        match self {
            Atom::One => Some(1.0),
            Atom::Two => Some(2.0),
            Atom::Three => Some(3.0),
            Atom::Hundred => Some(100.0),
            _ => None,
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Atom> {
        Atom::ALL.iter().copied().find(|a| a.symbol() == symbol)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Atom {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Atom::from_symbol(s).ok_or_else(|| ExprError::UnknownToken(s.into()))
    }
}

/// Statistics of one root move that an exploration term can read.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalContext {
    pub sc: f64,
    pub pr: f64,
    pub nbp: f64,
    pub nb: f64,
}

impl EvalContext {
    pub fn new(sc: f64, pr: f64, nbp: f64, nb: f64) -> Self {
        EvalContext { sc, pr, nbp, nb }
    }

    fn variable(&self, atom: Atom) -> f64 {
        match atom {
            Atom::Sc => self.sc,
            Atom::Pr => self.pr,
            Atom::Nbp => self.nbp,
            Atom::Nb => self.nb,
            _ => unreachable!("not a variable: {atom}"),
        }
    }
}

/// A possibly incomplete prefix-order expression with its token budget.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Expression {
    tokens: Vec<Atom>,
    open_leaves: usize,
    max_len: usize,
}

impl Default for Expression {
    fn default() -> Self {
        Expression::new(DEFAULT_MAX_LEN)
    }
}

impl Expression {
    /// The empty expression: one open leaf, nothing assigned.
    pub fn new(max_len: usize) -> Self {
        Expression {
            tokens: Vec::with_capacity(max_len),
            open_leaves: 1,
            max_len,
        }
    }

    /// Builds an expression by playing `atoms` in order, each checked for legality.
    pub fn from_atoms(atoms: &[Atom], max_len: usize) -> Result<Self, ExprError> {
        let mut expr = Expression::new(max_len);
        for &atom in atoms {
            expr.push(atom)?;
        }
        Ok(expr)
    }

    /// Parses the whitespace-separated prefix grammar, e.g. `"+ pr * * 2 sc sc"`.
    ///
    /// The token budget is `max(DEFAULT_MAX_LEN, token count)`.
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let count = text.split_whitespace().count();
        Self::parse_with_max_len(text, count.max(DEFAULT_MAX_LEN))
    }

    pub fn parse_with_max_len(text: &str, max_len: usize) -> Result<Self, ExprError> {
        let mut expr = Expression::new(max_len);
        let mut words = text.split_whitespace();
        let mut saw_any = false;
        for word in words.by_ref() {
            saw_any = true;
            let atom: Atom = word.parse()?;
            if expr.is_complete() {
                return Err(ExprError::Trailing(word.into()));
            }
            if expr.tokens.len() + expr.open_leaves + atom.arity() > max_len {
                return Err(ExprError::TooLong {
                    len: text.split_whitespace().count(),
                    max_len,
                });
            }
            expr.push_unchecked(atom);
        }
        if !saw_any {
            return Err(ExprError::Empty);
        }
        if !expr.is_complete() {
            return Err(ExprError::Incomplete {
                open_leaves: expr.open_leaves,
            });
        }
        Ok(expr)
    }

    pub fn tokens(&self) -> &[Atom] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn open_leaves(&self) -> usize {
        self.open_leaves
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn is_complete(&self) -> bool {
        self.open_leaves == 0
    }

    fn admits(&self, atom: Atom) -> bool {
        self.tokens.len() + self.open_leaves + atom.arity() <= self.max_len
    }

    /// Atoms that can be appended without overflowing the token budget.
    pub fn legal_atoms(&self) -> Result<Vec<Atom>, ExprError> {
        if self.is_complete() {
            return Err(ExprError::AlreadyComplete);
        }
        Ok(Atom::ALL
            .iter()
            .copied()
            .filter(|&a| self.admits(a))
            .collect())
    }

    /// Appends a legal atom, updating the open-leaf count.
    pub fn push(&mut self, atom: Atom) -> Result<(), ExprError> {
        if self.is_complete() {
            return Err(ExprError::AlreadyComplete);
        }
        if !self.admits(atom) {
            return Err(ExprError::IllegalAtom { atom });
        }
        self.push_unchecked(atom);
        Ok(())
    }

    /// Non-mutating variant of [`Expression::push`].
    pub fn with_atom(&self, atom: Atom) -> Result<Expression, ExprError> {
        let mut next = self.clone();
        next.push(atom)?;
        Ok(next)
    }

    fn push_unchecked(&mut self, atom: Atom) {
        self.tokens.push(atom);
        self.open_leaves = self.open_leaves - 1 + atom.arity();
    }

    fn ensure_complete(&self) -> Result<(), ExprError> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(ExprError::Incomplete {
                open_leaves: self.open_leaves,
            })
        }
    }

    /// Evaluates the expression under protected semantics. Never returns a
    /// non-finite number for a finite context.
    pub fn evaluate(&self, ctx: &EvalContext) -> Result<f64, ExprError> {
        self.ensure_complete()?;
        Ok(self.eval_unchecked(ctx))
    }

    /// Evaluation without the completeness check; callers must guarantee it.
    pub(crate) fn eval_unchecked(&self, ctx: &EvalContext) -> f64 {
        let mut cursor = 0;
        eval_prefix(&self.tokens, &mut cursor, ctx)
    }

    /// Fully parenthesized infix rendering, e.g. `(pr + ((2 * sc) * sc))`.
    pub fn to_infix(&self) -> Result<String, ExprError> {
        self.ensure_complete()?;
        let mut out = String::new();
        let mut cursor = 0;
        write_infix(&self.tokens, &mut cursor, &mut out);
        Ok(out)
    }

    /// Parses the rendering produced by [`Expression::to_infix`].
    pub fn parse_infix(text: &str) -> Result<Self, ExprError> {
        let mut parser = InfixParser {
            src: text.as_bytes(),
            pos: 0,
            tokens: Vec::new(),
        };
        parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(ExprError::Infix(parser.pos));
        }
        let max_len = parser.tokens.len().max(DEFAULT_MAX_LEN);
        Expression::from_atoms(&parser.tokens, max_len)
    }

    /// Memoization key: space-joined symbols in prefix order.
    pub fn canonical_key(&self) -> String {
        let mut key = String::with_capacity(self.tokens.len() * 3);
        for (i, atom) in self.tokens.iter().enumerate() {
            if i > 0 {
                key.push(' ');
            }
            key.push_str(atom.symbol());
        }
        key
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_key())
    }
}

impl FromStr for Expression {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

/// Maps overflow to the largest finite magnitude and NaN to zero.
#[inline]
pub(crate) fn saturate(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(f64::MIN, f64::MAX)
    }
}

/// Protected binary operator semantics shared by every evaluator.
#[inline]
pub fn apply_binary(op: Atom, x: f64, y: f64) -> f64 {
    let v = match op {
        Atom::Add => x + y,
        Atom::Sub => x - y,
        Atom::Mul => x * y,
        Atom::Div => {
            if y.abs() <= DIV_GUARD {
                0.0
            } else {
                x / y
            }
        }
        Atom::Eq => {
            let scale = 1.0f64.max(x.abs()).max(y.abs());
            if (x - y).abs() <= EQ_TOLERANCE * scale {
                1.0
            } else {
                0.0
            }
        }
        Atom::Max => x.max(y),
        Atom::Min => x.min(y),
        _ => unreachable!("not a binary operator: {op}"),
    };
    saturate(v)
}

/// Protected unary operator semantics.
#[inline]
pub fn apply_unary(op: Atom, x: f64) -> f64 {
    let v = match op {
        Atom::Log => libm::log(x.max(LOG_FLOOR)),
        Atom::Exp => libm::exp(x.clamp(-EXP_CLAMP, EXP_CLAMP)),
        _ => unreachable!("not a unary operator: {op}"),
    };
    saturate(v)
}

fn eval_prefix(tokens: &[Atom], cursor: &mut usize, ctx: &EvalContext) -> f64 {
    let atom = tokens[*cursor];
    *cursor += 1;
    match atom.kind() {
        AtomKind::Constant => atom.constant_value().unwrap_or_default(),
        AtomKind::Variable => saturate(ctx.variable(atom)),
        AtomKind::Operator if atom.arity() == 1 => {
            let x = eval_prefix(tokens, cursor, ctx);
            apply_unary(atom, x)
        }
        AtomKind::Operator => {
            let x = eval_prefix(tokens, cursor, ctx);
            let y = eval_prefix(tokens, cursor, ctx);
            apply_binary(atom, x, y)
        }
    }
}

fn write_infix(tokens: &[Atom], cursor: &mut usize, out: &mut String) {
    let atom = tokens[*cursor];
    *cursor += 1;
    match (atom.arity(), atom) {
        (0, _) => out.push_str(atom.symbol()),
        (1, _) | (2, Atom::Max) | (2, Atom::Min) => {
            out.push_str(atom.symbol());
            out.push('(');
            write_infix(tokens, cursor, out);
            if atom.arity() == 2 {
                out.push_str(", ");
                write_infix(tokens, cursor, out);
            }
            out.push(')');
        }
        _ => {
            out.push('(');
            write_infix(tokens, cursor, out);
            out.push(' ');
            out.push_str(atom.symbol());
            out.push(' ');
            write_infix(tokens, cursor, out);
            out.push(')');
        }
    }
}

struct InfixParser<'a> {
    src: &'a [u8],
    pos: usize,
    tokens: Vec<Atom>,
}

impl InfixParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, byte: u8) -> Result<(), ExprError> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError::Infix(self.pos))
        }
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn expr(&mut self) -> Result<(), ExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'(') {
            self.pos += 1;
            let slot = self.tokens.len();
            // placeholder, the operator is only known after the left operand
            self.tokens.push(Atom::Add);
            self.expr()?;
            self.skip_ws();
            let op_pos = self.pos;
            let op = match self.src.get(self.pos) {
                Some(b'+') => Atom::Add,
                Some(b'-') => Atom::Sub,
                Some(b'*') => Atom::Mul,
                Some(b'/') => Atom::Div,
                Some(b'=') => Atom::Eq,
                _ => return Err(ExprError::Infix(op_pos)),
            };
            self.pos += 1;
            self.tokens[slot] = op;
            self.expr()?;
            return self.expect(b')');
        }
        let word = self.word();
        let atom = Atom::from_symbol(word).ok_or(ExprError::Infix(start))?;
        match atom.arity() {
            0 => self.tokens.push(atom),
            1 | 2 if matches!(atom, Atom::Log | Atom::Exp | Atom::Max | Atom::Min) => {
                self.tokens.push(atom);
                self.expect(b'(')?;
                self.expr()?;
                if atom.arity() == 2 {
                    self.expect(b',')?;
                    self.expr()?;
                }
                self.expect(b')')?;
            }
            _ => return Err(ExprError::Infix(start)),
        }
        Ok(())
    }
}
