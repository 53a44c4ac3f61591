//! Arithmetic expression trees: parsing, symbolic differentiation, and
//! compilation to [`ScalarField`](crate::field::ScalarField)s.
//!
//! The grammar covers infix `+ - * / ^` (integer exponents), parentheses,
//! numeric literals, the variables `x y z`, named parameters bound at compile
//! time, and the functions `sin cos exp ln sqrt`. Standard precedence applies
//! (`^` binds tighter than unary minus, which binds tighter than `* /`, which
//! bind tighter than `+ -`); binary `+ - * /` associate to the left.

mod compile;
mod diff;
mod parse;

pub use compile::compile;
pub use diff::differentiate;
pub use parse::parse;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// State-space variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub(crate) fn by_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Expression tree. Trees are immutable; children are shared via `Arc` so
/// differentiation can reuse subtrees.
#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var(Axis),
    /// Named parameter; `pos` is the byte offset in the source text (0 for
    /// synthesized nodes) used in diagnostics.
    Param { name: String, pos: usize },
    Neg(Arc<Expr>),
    Bin(BinOp, Arc<Expr>, Arc<Expr>),
    /// Integer power of a subexpression.
    Pow(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
}

/// Name -> value bindings for expression parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTable(BTreeMap<String, f64>);

impl ParamTable {
    pub fn new() -> Self {
        ParamTable::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<'a> FromIterator<(&'a str, f64)> for ParamTable {
    fn from_iter<T: IntoIterator<Item = (&'a str, f64)>>(iter: T) -> Self {
        let mut t = ParamTable::new();
        for (k, v) in iter {
            t.insert(k, v);
        }
        t
    }
}

impl Expr {
    pub(crate) fn arc(self) -> Arc<Expr> {
        Arc::new(self)
    }

    /// Substitute every parameter by its bound value; errors on unbound names.
    pub fn bind(&self, table: &ParamTable) -> Result<Expr> {
        Ok(match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(a) => Expr::Var(*a),
            Expr::Param { name, .. } => match table.get(name) {
                Some(v) => Expr::Const(v),
                None => return Err(Error::UnboundParameter { name: name.clone() }),
            },
            Expr::Neg(e) => Expr::Neg(e.bind(table)?.arc()),
            Expr::Bin(op, a, b) => Expr::Bin(*op, a.bind(table)?.arc(), b.bind(table)?.arc()),
            Expr::Pow(e, n) => Expr::Pow(e.bind(table)?.arc(), *n),
            Expr::Call(f, e) => Expr::Call(*f, e.bind(table)?.arc()),
        })
    }

    /// Evaluate a fully bound tree at `u`. Panics on unbound parameters;
    /// `compile` guarantees boundness for production paths.
    pub fn eval(&self, u: Vec3) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Axis::X) => u.x,
            Expr::Var(Axis::Y) => u.y,
            Expr::Var(Axis::Z) => u.z,
            Expr::Param { name, .. } => panic!("evaluating unbound parameter `{name}`"),
            Expr::Neg(e) => -e.eval(u),
            Expr::Bin(BinOp::Add, a, b) => a.eval(u) + b.eval(u),
            Expr::Bin(BinOp::Sub, a, b) => a.eval(u) - b.eval(u),
            Expr::Bin(BinOp::Mul, a, b) => a.eval(u) * b.eval(u),
            Expr::Bin(BinOp::Div, a, b) => a.eval(u) / b.eval(u),
            Expr::Pow(e, n) => e.eval(u).powi(*n),
            Expr::Call(f, e) => f.apply(e.eval(u)),
        }
    }

    /// Structural equality up to the `Neg(Const(c)) == Const(-c)`
    /// normalization introduced by constant folding. Parameter positions are
    /// ignored.
    pub fn structurally_equal(&self, other: &Expr) -> bool {
        match (self, other) {
            (Expr::Neg(a), Expr::Const(c)) | (Expr::Const(c), Expr::Neg(a)) => {
                matches!(**a, Expr::Const(inner) if inner == -*c)
            }
            (Expr::Const(a), Expr::Const(b)) => a == b,
            (Expr::Var(a), Expr::Var(b)) => a == b,
            (Expr::Param { name: a, .. }, Expr::Param { name: b, .. }) => a == b,
            (Expr::Neg(a), Expr::Neg(b)) => a.structurally_equal(b),
            (Expr::Bin(op1, a1, b1), Expr::Bin(op2, a2, b2)) => {
                op1 == op2 && a1.structurally_equal(a2) && b1.structurally_equal(b2)
            }
            (Expr::Pow(a, n), Expr::Pow(b, m)) => n == m && a.structurally_equal(b),
            (Expr::Call(f, a), Expr::Call(g, b)) => f == g && a.structurally_equal(b),
            _ => false,
        }
    }

    /// Names of parameters referenced anywhere in the tree.
    pub fn parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param { name, .. } => out.push(name.clone()),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.collect_params(out),
            Expr::Bin(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Pow(_, _) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        if prec < min {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Var(a) => write!(f, "{}", a.name())?,
            Expr::Param { name, .. } => write!(f, "{name}")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 3)?;
            }
            Expr::Bin(op, a, b) => {
                let (sym, level) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                };
                a.fmt_prec(f, level)?;
                write!(f, "{sym}")?;
                b.fmt_prec(f, level + 1)?;
            }
            Expr::Pow(e, n) => {
                e.fmt_prec(f, 5)?;
                write!(f, "^{n}")?;
            }
            Expr::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                e.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if prec < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

// Simplifying constructors used by the differentiator: identity and zero
// rules plus constant folding, nothing fancier.

pub(crate) fn e_const(c: f64) -> Expr {
    Expr::Const(c)
}

pub(crate) fn e_neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => inner.as_ref().clone(),
        other => Expr::Neg(other.arc()),
    }
}

pub(crate) fn e_add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => return Expr::Const(x + y),
        (Expr::Const(c), _) if *c == 0.0 => return b,
        (_, Expr::Const(c)) if *c == 0.0 => return a,
        _ => {}
    }
    Expr::Bin(BinOp::Add, a.arc(), b.arc())
}

pub(crate) fn e_sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => return Expr::Const(x - y),
        (Expr::Const(c), _) if *c == 0.0 => return e_neg(b),
        (_, Expr::Const(c)) if *c == 0.0 => return a,
        _ => {}
    }
    Expr::Bin(BinOp::Sub, a.arc(), b.arc())
}

pub(crate) fn e_mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => return Expr::Const(x * y),
        (Expr::Const(c), _) if *c == 0.0 => return Expr::Const(0.0),
        (_, Expr::Const(c)) if *c == 0.0 => return Expr::Const(0.0),
        (Expr::Const(c), _) if *c == 1.0 => return b,
        (_, Expr::Const(c)) if *c == 1.0 => return a,
        _ => {}
    }
    Expr::Bin(BinOp::Mul, a.arc(), b.arc())
}

pub(crate) fn e_div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(c), _) if *c == 0.0 => return Expr::Const(0.0),
        (_, Expr::Const(c)) if *c == 1.0 => return a,
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => return Expr::Const(x / y),
        _ => {}
    }
    Expr::Bin(BinOp::Div, a.arc(), b.arc())
}

pub(crate) fn e_pow(e: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Const(1.0),
        1 => e,
        _ => match e {
            Expr::Const(c) => Expr::Const(c.powi(n)),
            other => Expr::Pow(other.arc(), n),
        },
    }
}

pub(crate) fn e_call(f: Func, e: Expr) -> Expr {
    Expr::Call(f, e.arc())
}

#[cfg(test)]
mod tests;
