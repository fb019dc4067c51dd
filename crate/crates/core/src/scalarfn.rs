//! Scalar comparison functions on the nonnegative reals.
//!
//! A [`ScalarFn`] is a small expression tree of closed-form pieces
//! (linear, power, compositions, pointwise max/min) with an escape hatch
//! to the DSL for anything else. Closed-form pieces invert exactly and
//! differentiate analytically; DSL pieces do neither.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::{self, BinOp, Compiled, EvalError, Expr, Func, VarLayout};

/// Comparison-function class a function claims to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FnClass {
    /// Positive definite: zero at zero, positive elsewhere.
    Pd,
    K,
    Kinf,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FnError {
    #[error("argument {0} is outside the domain [0, inf)")]
    Domain(f64),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("function has no closed-form inverse: {0}")]
    NotInvertible(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("cannot express as a DSL expression: {0}")]
    NoExpression(String),
    #[error(transparent)]
    Syntax(#[from] expr::ParseError),
    #[error(transparent)]
    Bind(#[from] expr::BindError),
}

/// A DSL body in the single variable `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprFn {
    body: Expr,
    compiled: Compiled,
}

impl ExprFn {
    pub fn new(body: Expr) -> Result<Self, FnError> {
        let compiled = Compiled::bind_real(&body, &VarLayout::scalar_arg())?;
        Ok(ExprFn { body, compiled })
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// `r ↦ k r`. Negative `k` is allowed for sign-free flow rates.
    Linear(f64),
    /// `r ↦ k r^p`.
    Power { k: f64, p: f64 },
    /// `r ↦ k r`, kept distinct so jump factors `e^{-d}` read back as such.
    ExpScaled(f64),
    /// Applied first to last.
    Composition(Vec<ScalarFn>),
    Max(Vec<ScalarFn>),
    Min(Vec<ScalarFn>),
    /// Pointwise product.
    Product(Vec<ScalarFn>),
    /// `r ↦ f'(r)`.
    Derivative(Box<ScalarFn>),
    Expr(ExprFn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct ScalarFn {
    pub kind: Kind,
    pub class: FnClass,
}

impl ScalarFn {
    fn new(kind: Kind, class: FnClass) -> Self {
        ScalarFn { kind, class }
    }

    pub fn linear(k: f64) -> Self {
        let class = if k > 0.0 { FnClass::Kinf } else { FnClass::None };
        Self::new(Kind::Linear(k), class)
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn power(k: f64, p: f64) -> Self {
        let class = if k > 0.0 && p > 0.0 { FnClass::Kinf } else { FnClass::None };
        Self::new(Kind::Power { k, p }, class)
    }

    pub fn exp_scaled(k: f64) -> Self {
        let class = if k > 0.0 { FnClass::Kinf } else { FnClass::None };
        Self::new(Kind::ExpScaled(k), class)
    }

    /// `r ↦ outer(inner(r))`.
    pub fn compose(outer: &ScalarFn, inner: &ScalarFn) -> Self {
        Self::chain(vec![inner.clone(), outer.clone()])
    }

    /// Composition applied first to last; nested compositions are flattened
    /// so that grouping never changes the floating-point result.
    pub fn chain(parts: Vec<ScalarFn>) -> Self {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p.kind {
                Kind::Composition(inner) => flat.extend(inner),
                _ => flat.push(p),
            }
        }
        let class = meet(flat.iter().map(|f| f.class));
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        Self::new(Kind::Composition(flat), class)
    }

    pub fn max_of(parts: Vec<ScalarFn>) -> Self {
        let class = meet(parts.iter().map(|f| f.class));
        Self::new(Kind::Max(parts), class)
    }

    pub fn min_of(parts: Vec<ScalarFn>) -> Self {
        let class = meet(parts.iter().map(|f| f.class));
        Self::new(Kind::Min(parts), class)
    }

    pub fn product(parts: Vec<ScalarFn>) -> Self {
        Self::new(Kind::Product(parts), FnClass::None)
    }

    pub fn derivative_of(f: &ScalarFn) -> Self {
        Self::new(Kind::Derivative(Box::new(f.clone())), FnClass::None)
    }

    /// A DSL body in `r`, e.g. `"sqrt(r)/5"`.
    pub fn expr(body: &str) -> Result<Self, FnError> {
        let e = expr::parse(body)?;
        Ok(Self::new(Kind::Expr(ExprFn::new(e)?), FnClass::None))
    }

    pub fn with_class(mut self, class: FnClass) -> Self {
        self.class = class;
        self
    }

    /// True for the constant zero function in closed form.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            Kind::Linear(k) | Kind::ExpScaled(k) => *k == 0.0,
            Kind::Power { k, .. } => *k == 0.0,
            Kind::Composition(parts) => parts.iter().any(ScalarFn::is_zero),
            Kind::Max(parts) | Kind::Min(parts) => !parts.is_empty() && parts.iter().all(ScalarFn::is_zero),
            _ => false,
        }
    }

    /// Slope if the function is `r ↦ k r` in closed form.
    pub fn linear_coefficient(&self) -> Option<f64> {
        match &self.kind {
            Kind::Linear(k) | Kind::ExpScaled(k) => Some(*k),
            Kind::Power { k, p } if *p == 1.0 => Some(*k),
            Kind::Power { k, .. } if *k == 0.0 => Some(0.0),
            Kind::Composition(parts) => {
                let mut acc = 1.0;
                for p in parts {
                    acc *= p.linear_coefficient()?;
                }
                Some(acc)
            }
            _ => None,
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64, FnError> {
        if !(r >= 0.0) {
            return Err(FnError::Domain(r));
        }
        self.eval_unchecked(r)
    }

    // Intermediate values of a composition may round below zero only for
    // sign-free pieces; those are evaluated as given.
    fn eval_unchecked(&self, r: f64) -> Result<f64, FnError> {
        Ok(match &self.kind {
            Kind::Linear(k) | Kind::ExpScaled(k) => k * r,
            Kind::Power { k, p } => {
                if *k == 0.0 {
                    0.0
                } else {
                    k * r.powf(*p)
                }
            }
            Kind::Composition(parts) => {
                let mut v = r;
                for p in parts {
                    v = p.eval_unchecked(v)?;
                }
                v
            }
            Kind::Max(parts) => fold(parts, r, f64::max)?,
            Kind::Min(parts) => fold(parts, r, f64::min)?,
            Kind::Product(parts) => {
                let mut acc = 1.0;
                for p in parts {
                    acc *= p.eval_unchecked(r)?;
                }
                acc
            }
            Kind::Derivative(f) => f.derivative_at(r)?,
            Kind::Expr(e) => e.compiled.eval(&[r])?,
        })
    }

    /// Closed-form inverse. Pointwise max and min invert to min and max of
    /// the inverses, which is exact for increasing pieces.
    pub fn inverse(&self) -> Result<ScalarFn, FnError> {
        let not_invertible = || FnError::NotInvertible(self.to_string());
        Ok(match &self.kind {
            Kind::Linear(k) | Kind::ExpScaled(k) if *k > 0.0 => ScalarFn::linear(1.0 / k),
            Kind::Power { k, p } if *k > 0.0 && *p > 0.0 => {
                if *p == 1.0 {
                    ScalarFn::linear(1.0 / k)
                } else {
                    ScalarFn::power(k.powf(-1.0 / p), 1.0 / p)
                }
            }
            Kind::Composition(parts) => {
                let inv = parts.iter().rev().map(ScalarFn::inverse).collect::<Result<Vec<_>, _>>()?;
                ScalarFn::chain(inv)
            }
            Kind::Max(parts) if !parts.is_empty() => {
                ScalarFn::min_of(parts.iter().map(ScalarFn::inverse).collect::<Result<_, _>>()?)
            }
            Kind::Min(parts) if !parts.is_empty() => {
                ScalarFn::max_of(parts.iter().map(ScalarFn::inverse).collect::<Result<_, _>>()?)
            }
            _ => return Err(not_invertible()),
        }
        .with_class(FnClass::Kinf))
    }

    /// Derivative at `r`: analytic for closed-form pieces, central
    /// difference with `h = 1e-7·max(1, r)` otherwise (forward near 0).
    pub fn derivative_at(&self, r: f64) -> Result<f64, FnError> {
        match &self.kind {
            Kind::Linear(k) | Kind::ExpScaled(k) => Ok(*k),
            Kind::Power { k, p } => Ok(if *k == 0.0 {
                0.0
            } else if *p == 1.0 {
                *k
            } else {
                k * p * r.powf(p - 1.0)
            }),
            Kind::Composition(parts) => {
                let mut v = r;
                let mut slope = 1.0;
                for p in parts {
                    slope *= p.derivative_at(v)?;
                    v = p.eval_unchecked(v)?;
                }
                Ok(slope)
            }
            _ => {
                let h = 1e-7 * r.max(1.0);
                if r >= h {
                    Ok((self.eval_unchecked(r + h)? - self.eval_unchecked(r - h)?) / (2.0 * h))
                } else {
                    Ok((self.eval_unchecked(r + h)? - self.eval_unchecked(r)?) / h)
                }
            }
        }
    }

    /// The function applied to `arg`, as a DSL expression.
    pub fn to_expr(&self, arg: &Expr) -> Result<Expr, FnError> {
        let scale = |k: f64, e: Expr| {
            if k == 1.0 {
                e
            } else {
                Expr::binary(BinOp::Mul, Expr::num(k), e)
            }
        };
        Ok(match &self.kind {
            Kind::Linear(k) | Kind::ExpScaled(k) => scale(*k, arg.clone()),
            Kind::Power { k, p } => {
                let powered = if *p == 1.0 {
                    arg.clone()
                } else {
                    Expr::binary(BinOp::Pow, arg.clone(), Expr::num(*p))
                };
                scale(*k, powered)
            }
            Kind::Composition(parts) => {
                let mut e = arg.clone();
                for p in parts {
                    e = p.to_expr(&e)?;
                }
                e
            }
            Kind::Max(parts) => Expr::call(Func::Max, parts.iter().map(|p| p.to_expr(arg)).collect::<Result<_, _>>()?),
            Kind::Min(parts) => Expr::call(Func::Min, parts.iter().map(|p| p.to_expr(arg)).collect::<Result<_, _>>()?),
            Kind::Product(parts) => {
                let mut it = parts.iter();
                let first = it.next().ok_or_else(|| FnError::NoExpression("empty product".into()))?;
                let mut e = first.to_expr(arg)?;
                for p in it {
                    e = Expr::binary(BinOp::Mul, e, p.to_expr(arg)?);
                }
                e
            }
            Kind::Derivative(_) => return Err(FnError::NoExpression(self.to_string())),
            Kind::Expr(f) => f.body.substitute("r", arg),
        })
    }

    /// Check the claimed class on `grid` (plus `r = 0`).
    pub fn verify_class(&self, claimed: FnClass, grid: &LogGrid) -> ClassCheck {
        if claimed == FnClass::None {
            return ClassCheck { pass: true, witness: None };
        }
        let fail = |w| ClassCheck { pass: false, witness: Some(w) };
        let mut prev = match self.eval(0.0) {
            Ok(v) if v == 0.0 => (0.0, 0.0),
            Ok(v) => return fail(ClassWitness::NonzeroAtZero { value: v }),
            Err(e) => return fail(ClassWitness::EvalFailed { r: 0.0, message: e.to_string() }),
        };
        for r in grid.points() {
            let v = match self.eval(r) {
                Ok(v) if v.is_finite() => v,
                Ok(v) => return fail(ClassWitness::EvalFailed { r, message: format!("value {v}") }),
                Err(e) => return fail(ClassWitness::EvalFailed { r, message: e.to_string() }),
            };
            match claimed {
                FnClass::Pd if v <= 0.0 => return fail(ClassWitness::NotPositive { r, value: v }),
                FnClass::K | FnClass::Kinf if v <= prev.1 => {
                    return fail(ClassWitness::NotIncreasing { r1: prev.0, r2: r, f1: prev.1, f2: v })
                }
                _ => {}
            }
            prev = (r, v);
        }
        ClassCheck { pass: true, witness: None }
    }
}

fn fold(parts: &[ScalarFn], r: f64, op: fn(f64, f64) -> f64) -> Result<f64, FnError> {
    let mut it = parts.iter();
    let first = it.next().ok_or_else(|| FnError::Invalid("empty max/min".into()))?;
    let mut acc = first.eval_unchecked(r)?;
    for p in it {
        acc = op(acc, p.eval_unchecked(r)?);
    }
    Ok(acc)
}

// Weakest class shared by all parts (for max, min and composition).
fn meet(classes: impl Iterator<Item = FnClass>) -> FnClass {
    let rank = |c: FnClass| match c {
        FnClass::Kinf => 3,
        FnClass::K => 2,
        FnClass::Pd => 1,
        FnClass::None => 0,
    };
    let mut lo = 3;
    let mut any = false;
    for c in classes {
        any = true;
        lo = lo.min(rank(c));
    }
    if !any {
        return FnClass::None;
    }
    match lo {
        3 => FnClass::Kinf,
        2 => FnClass::K,
        1 => FnClass::Pd,
        _ => FnClass::None,
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Derivative(inner) => write!(f, "d/dr[{inner}]"),
            Kind::Product(parts) if parts.iter().any(|p| matches!(p.kind, Kind::Derivative(_))) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "({p})")?;
                }
                Ok(())
            }
            _ => match self.to_expr(&Expr::var("r")) {
                Ok(e) => write!(f, "{e}"),
                Err(_) => write!(f, "<{:?}>", self.kind),
            },
        }
    }
}

/// Log-spaced sample points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        LogGrid { lo: 1e-6, hi: 1e6, n: 241 }
    }
}

impl LogGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        LogGrid { lo, hi, n: n.max(2) }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let n = self.n;
        (0..n).map(move |i| {
            if i == n - 1 {
                self.hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassWitness {
    NonzeroAtZero { value: f64 },
    NotPositive { r: f64, value: f64 },
    NotIncreasing { r1: f64, r2: f64, f1: f64, f2: f64 },
    EvalFailed { r: f64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCheck {
    pub pass: bool,
    pub witness: Option<ClassWitness>,
}

/// `(r, l) ↦ inv_psi1(exp(-l·m + offset) · psi2(r))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlFn {
    pub psi1_inverse: ScalarFn,
    pub psi2: ScalarFn,
    pub decay: f64,
    pub offset: f64,
}

impl KlFn {
    pub fn eval(&self, r: f64, l: f64) -> Result<f64, FnError> {
        let scale = (-l * self.decay + self.offset).exp();
        self.psi1_inverse.eval(scale * self.psi2.eval(r)?)
    }
}

// JSON form: {"kind": ..., "params": {...}} or {"kind": "expr", "body": ...}.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Repr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<FnClass>,
}

impl From<ScalarFn> for Repr {
    fn from(f: ScalarFn) -> Repr {
        let parts = |ps: &[ScalarFn]| json!({ "parts": ps });
        let (kind, params, body) = match &f.kind {
            Kind::Linear(k) => ("linear", Some(json!({ "k": k })), None),
            Kind::Power { k, p } => ("power", Some(json!({ "k": k, "p": p })), None),
            Kind::ExpScaled(k) => ("exp_scaled", Some(json!({ "k": k })), None),
            Kind::Composition(ps) => ("composition", Some(parts(ps)), None),
            Kind::Max(ps) => ("max", Some(parts(ps)), None),
            Kind::Min(ps) => ("min", Some(parts(ps)), None),
            Kind::Product(ps) => ("product", Some(parts(ps)), None),
            Kind::Derivative(g) => ("derivative", Some(json!({ "of": g })), None),
            Kind::Expr(e) => ("expr", None, Some(e.body.to_string())),
        };
        Repr { kind: kind.into(), params, body, class: Some(f.class) }
    }
}

impl TryFrom<Repr> for ScalarFn {
    type Error = FnError;

    fn try_from(r: Repr) -> Result<Self, FnError> {
        let params = r.params.clone().unwrap_or(Value::Null);
        let num = |key: &str| -> Result<f64, FnError> {
            params
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| FnError::Invalid(format!("`{}` needs numeric param `{key}`", r.kind)))
        };
        let list = || -> Result<Vec<ScalarFn>, FnError> {
            let v = params
                .get("parts")
                .cloned()
                .ok_or_else(|| FnError::Invalid(format!("`{}` needs `parts`", r.kind)))?;
            serde_json::from_value(v).map_err(|e| FnError::Invalid(e.to_string()))
        };
        let f = match r.kind.as_str() {
            "linear" => ScalarFn::linear(num("k")?),
            "power" => {
                let (k, p) = (num("k")?, num("p")?);
                if !(p > 0.0) || !(k >= 0.0) {
                    return Err(FnError::Invalid(format!("power needs k >= 0 and p > 0, got k={k}, p={p}")));
                }
                ScalarFn::power(k, p)
            }
            "exp_scaled" => ScalarFn::exp_scaled(num("k")?),
            "composition" => {
                let ps = list()?;
                if ps.is_empty() {
                    return Err(FnError::Invalid("empty composition".into()));
                }
                ScalarFn::chain(ps)
            }
            "max" | "min" | "product" => {
                let ps = list()?;
                if ps.is_empty() {
                    return Err(FnError::Invalid(format!("empty `{}`", r.kind)));
                }
                match r.kind.as_str() {
                    "max" => ScalarFn::max_of(ps),
                    "min" => ScalarFn::min_of(ps),
                    _ => ScalarFn::product(ps),
                }
            }
            "derivative" => {
                let of = params.get("of").cloned().ok_or_else(|| FnError::Invalid("derivative needs `of`".into()))?;
                let g: ScalarFn = serde_json::from_value(of).map_err(|e| FnError::Invalid(e.to_string()))?;
                ScalarFn::derivative_of(&g)
            }
            "expr" => {
                let body = r.body.as_deref().ok_or_else(|| FnError::Invalid("expr needs `body`".into()))?;
                ScalarFn::expr(body)?
            }
            other => return Err(FnError::Invalid(format!("unknown function kind `{other}`"))),
        };
        Ok(match r.class {
            Some(c) => f.with_class(c),
            None => f,
        })
    }
}
