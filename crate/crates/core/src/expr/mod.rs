//! Arithmetic expression language for flow maps, jump maps, Lyapunov
//! functions and set predicates.
//!
//! Source text is parsed into an [`Expr`] tree that still refers to
//! variables by name. Binding the tree against a [`VarLayout`] resolves
//! every name to a slot index and type-checks it, producing a [`Compiled`]
//! expression that evaluates against a flat `&[f64]` environment.
//!
//! Variables are `x1`, `x2`, ... (subsystem states, indexed `x1[0]` when a
//! subsystem has more than one component), `u` / `u[k]` (external input),
//! `tau1`, `tau2`, ... (clock states) and `r` (argument of a scalar
//! comparison function). Which names exist is decided by the layout, not
//! the parser.

mod eval;
mod parse;
mod print;

pub use eval::{directional_derivative, Compiled, DiniEstimate, VarLayout, DINI_STEPS, FINE_DINI_STEPS};
pub use parse::parse;

use thiserror::Error;

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicOp {
    And,
    Or,
}

/// Built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Ln,
    Min,
    Max,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "min" => Func::Min,
            "max" => Func::Max,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    /// Accepted argument counts as an inclusive range.
    fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (1, usize::MAX),
            _ => (1, 1),
        }
    }
}

/// A variable reference as written in source, e.g. `x2` or `x1[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef {
    pub name: String,
    pub index: Option<usize>,
}

impl VarRef {
    pub fn scalar(name: impl Into<String>) -> Self {
        VarRef { name: name.into(), index: None }
    }

    pub fn indexed(name: impl Into<String>, index: usize) -> Self {
        VarRef { name: name.into(), index: Some(index) }
    }
}

/// Expression syntax tree. Literals are nonnegative; a leading minus is
/// always a [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Var(VarRef),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Logic(LogicOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Static type of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Real,
    Bool,
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(VarRef::scalar(name))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    /// Replace every occurrence of variable `name` (any index) by `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v.name == name => with.clone(),
            Expr::Num(_) | Expr::Bool(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(name, with))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(name, with)),
                Box::new(b.substitute(name, with)),
            ),
            Expr::Cmp(op, a, b) => Expr::Cmp(
                *op,
                Box::new(a.substitute(name, with)),
                Box::new(b.substitute(name, with)),
            ),
            Expr::Logic(op, a, b) => Expr::Logic(
                *op,
                Box::new(a.substitute(name, with)),
                Box::new(b.substitute(name, with)),
            ),
            Expr::Call(f, args) => {
                Expr::Call(*f, args.iter().map(|a| a.substitute(name, with)).collect())
            }
        }
    }

    /// All variable references, sorted and deduplicated.
    pub fn variables(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<VarRef>) {
        match self {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) | Expr::Cmp(_, a, b) | Expr::Logic(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Type-check the tree. Booleans only come from comparisons and
    /// `and`/`or`; arithmetic on booleans is rejected.
    pub fn ty(&self) -> Result<Ty, BindError> {
        match self {
            Expr::Num(_) | Expr::Var(_) => Ok(Ty::Real),
            Expr::Bool(_) => Ok(Ty::Bool),
            Expr::Neg(e) => expect(e, Ty::Real).map(|_| Ty::Real),
            Expr::Binary(_, a, b) => {
                expect(a, Ty::Real)?;
                expect(b, Ty::Real)?;
                Ok(Ty::Real)
            }
            Expr::Cmp(_, a, b) => {
                expect(a, Ty::Real)?;
                expect(b, Ty::Real)?;
                Ok(Ty::Bool)
            }
            Expr::Logic(_, a, b) => {
                expect(a, Ty::Bool)?;
                expect(b, Ty::Bool)?;
                Ok(Ty::Bool)
            }
            Expr::Call(f, args) => {
                let (lo, hi) = f.arity();
                if args.len() < lo || args.len() > hi {
                    return Err(BindError::Arity { func: f.name(), got: args.len() });
                }
                for a in args {
                    expect(a, Ty::Real)?;
                }
                Ok(Ty::Real)
            }
        }
    }
}

fn expect(e: &Expr, want: Ty) -> Result<(), BindError> {
    let got = e.ty()?;
    if got == want {
        Ok(())
    } else {
        Err(BindError::Type { expected: want, found: got, expr: e.to_string() })
    }
}

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindError {
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("`{name}` has {len} components; index {index} is out of range")]
    IndexOutOfRange { name: String, index: usize, len: usize },
    #[error("`{name}` has {len} components and must be indexed")]
    MissingIndex { name: String, len: usize },
    #[error("`{func}` does not accept {got} arguments")]
    Arity { func: &'static str, got: usize },
    #[error("expected a {expected:?} expression, found {found:?} in `{expr}`")]
    Type { expected: Ty, found: Ty, expr: String },
}

/// Typed evaluation failures.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("ln of nonpositive value {0}")]
    LnNonPositive(f64),
    #[error("sqrt of negative value {0}")]
    SqrtNegative(f64),
    #[error("non-finite result of {0}")]
    NonFinite(&'static str),
    #[error("expression is {0:?}-valued here")]
    WrongType(Ty),
}

// Expressions travel through JSON as their source text.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let src = String::deserialize(d)?;
        parse(&src).map_err(serde::de::Error::custom)
    }
}
