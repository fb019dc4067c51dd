use std::collections::BTreeMap;

use super::{BinOp, BindError, CmpOp, EvalError, Expr, Func, LogicOp, Ty, VarRef};

/// Maps variable names to contiguous slot ranges of a flat environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarLayout {
    slots: BTreeMap<String, (usize, usize)>,
    len: usize,
}

impl VarLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Layout with the single scalar variable `r`.
    pub fn scalar_arg() -> Self {
        let mut l = Self::new();
        l.push("r", 1);
        l
    }

    /// Append a variable with `len` components; returns its first slot.
    pub fn push(&mut self, name: &str, len: usize) -> usize {
        let base = self.len;
        self.slots.insert(name.to_string(), (base, len));
        self.len += len;
        base
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, name: &str) -> Option<(usize, usize)> {
        self.slots.get(name).copied()
    }

    fn resolve(&self, v: &VarRef) -> Result<usize, BindError> {
        let (base, len) = self
            .get(&v.name)
            .ok_or_else(|| BindError::UnknownIdentifier(v.name.clone()))?;
        match v.index {
            None if len == 1 => Ok(base),
            None => Err(BindError::MissingIndex { name: v.name.clone(), len }),
            Some(i) if i < len => Ok(base + i),
            Some(i) => Err(BindError::IndexOutOfRange { name: v.name.clone(), index: i, len }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Bool(bool),
    Slot(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Cmp(CmpOp, Box<Node>, Box<Node>),
    Logic(LogicOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// An expression bound to a [`VarLayout`]. Immutable and cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    source: Expr,
    root: Node,
    ty: Ty,
}

impl Compiled {
    /// Resolve every identifier against `layout` and type-check.
    pub fn bind(expr: &Expr, layout: &VarLayout) -> Result<Self, BindError> {
        let ty = expr.ty()?;
        let root = lower(expr, layout)?;
        Ok(Compiled { source: expr.clone(), root, ty })
    }

    /// Bind and require a real-valued expression (flow/jump maps, V).
    pub fn bind_real(expr: &Expr, layout: &VarLayout) -> Result<Self, BindError> {
        let c = Self::bind(expr, layout)?;
        if c.ty != Ty::Real {
            return Err(BindError::Type { expected: Ty::Real, found: c.ty, expr: expr.to_string() });
        }
        Ok(c)
    }

    /// Bind and require a boolean expression (set predicates).
    pub fn bind_bool(expr: &Expr, layout: &VarLayout) -> Result<Self, BindError> {
        let c = Self::bind(expr, layout)?;
        if c.ty != Ty::Bool {
            return Err(BindError::Type { expected: Ty::Bool, found: c.ty, expr: expr.to_string() });
        }
        Ok(c)
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn ty(&self) -> Ty {
        self.ty
    }

    pub fn eval(&self, env: &[f64]) -> Result<f64, EvalError> {
        if self.ty != Ty::Real {
            return Err(EvalError::WrongType(self.ty));
        }
        real(&self.root, env)
    }

    pub fn eval_bool(&self, env: &[f64]) -> Result<bool, EvalError> {
        if self.ty != Ty::Bool {
            return Err(EvalError::WrongType(self.ty));
        }
        boolean(&self.root, env)
    }
}

fn lower(e: &Expr, layout: &VarLayout) -> Result<Node, BindError> {
    Ok(match e {
        Expr::Num(v) => Node::Num(*v),
        Expr::Bool(b) => Node::Bool(*b),
        Expr::Var(v) => Node::Slot(layout.resolve(v)?),
        Expr::Neg(a) => Node::Neg(Box::new(lower(a, layout)?)),
        Expr::Binary(op, a, b) => Node::Bin(*op, Box::new(lower(a, layout)?), Box::new(lower(b, layout)?)),
        Expr::Cmp(op, a, b) => Node::Cmp(*op, Box::new(lower(a, layout)?), Box::new(lower(b, layout)?)),
        Expr::Logic(op, a, b) => {
            Node::Logic(*op, Box::new(lower(a, layout)?), Box::new(lower(b, layout)?))
        }
        Expr::Call(f, args) => {
            Node::Call(*f, args.iter().map(|a| lower(a, layout)).collect::<Result<_, _>>()?)
        }
    })
}

fn real(n: &Node, env: &[f64]) -> Result<f64, EvalError> {
    match n {
        Node::Num(v) => Ok(*v),
        Node::Slot(i) => Ok(env[*i]),
        Node::Neg(a) => Ok(-real(a, env)?),
        Node::Bin(op, a, b) => {
            let (x, y) = (real(a, env)?, real(b, env)?);
            match op {
                BinOp::Add => Ok(x + y),
                BinOp::Sub => Ok(x - y),
                BinOp::Mul => Ok(x * y),
                BinOp::Div => {
                    if y == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        Ok(x / y)
                    }
                }
                BinOp::Pow => {
                    let v = x.powf(y);
                    if v.is_nan() {
                        Err(EvalError::NonFinite("^"))
                    } else {
                        Ok(v)
                    }
                }
            }
        }
        Node::Call(f, args) => {
            let x = real(&args[0], env)?;
            match f {
                Func::Abs => Ok(x.abs()),
                Func::Sqrt if x < 0.0 => Err(EvalError::SqrtNegative(x)),
                Func::Sqrt => Ok(x.sqrt()),
                Func::Exp => Ok(x.exp()),
                Func::Ln if x <= 0.0 => Err(EvalError::LnNonPositive(x)),
                Func::Ln => Ok(x.ln()),
                Func::Sign => Ok(if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }),
                Func::Min | Func::Max => {
                    let mut acc = x;
                    for a in &args[1..] {
                        let v = real(a, env)?;
                        acc = if *f == Func::Min { acc.min(v) } else { acc.max(v) };
                    }
                    Ok(acc)
                }
            }
        }
        Node::Bool(_) | Node::Cmp(..) | Node::Logic(..) => Err(EvalError::WrongType(Ty::Bool)),
    }
}

fn boolean(n: &Node, env: &[f64]) -> Result<bool, EvalError> {
    match n {
        Node::Bool(b) => Ok(*b),
        Node::Cmp(op, a, b) => {
            let (x, y) = (real(a, env)?, real(b, env)?);
            Ok(match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
            })
        }
        Node::Logic(LogicOp::And, a, b) => Ok(boolean(a, env)? && boolean(b, env)?),
        Node::Logic(LogicOp::Or, a, b) => Ok(boolean(a, env)? || boolean(b, env)?),
        _ => Err(EvalError::WrongType(Ty::Real)),
    }
}

/// Forward-difference steps used for Dini derivative estimates.
pub const DINI_STEPS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

/// Fallback ladder for points within about `1e-5` of a kink, where the
/// coarse quotients straddle the switch.
pub const FINE_DINI_STEPS: [f64; 4] = [1e-5, 1e-6, 1e-7, 1e-8];

/// Result of a one-sided difference-quotient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiniEstimate {
    /// Quotient at the smallest step.
    pub value: f64,
    /// Quotients for each entry of `steps`.
    pub quotients: [f64; 4],
    pub steps: [f64; 4],
    pub converged: bool,
}

impl DiniEstimate {
    /// First-order truncation estimate for the smallest-step quotient,
    /// from the last two quotients. Zero when the quotients are not
    /// decreasing towards the limit.
    pub fn truncation_allowance(&self) -> f64 {
        let (q, h) = (&self.quotients, &self.steps);
        let drop = q[2] - q[3];
        if drop > 0.0 {
            drop * h[3] / (h[2] - h[3])
        } else {
            0.0
        }
    }
}

/// Upper-right Dini derivative `limsup_{h↘0} (V(x + h y) − V(x)) / h`,
/// approximated by forward quotients at [`DINI_STEPS`], then at
/// [`FINE_DINI_STEPS`] if those do not settle.
///
/// `point` and `direction` are flat environments for `v`; components with
/// zero direction are left untouched.
pub fn directional_derivative(
    v: &Compiled,
    point: &[f64],
    direction: &[f64],
) -> Result<DiniEstimate, EvalError> {
    let base = v.eval(point)?;
    let coarse = ladder(v, base, point, direction, DINI_STEPS)?;
    if coarse.converged {
        return Ok(coarse);
    }
    let fine = ladder(v, base, point, direction, FINE_DINI_STEPS)?;
    Ok(if fine.converged { fine } else { coarse })
}

fn ladder(v: &Compiled, base: f64, point: &[f64], direction: &[f64], steps: [f64; 4]) -> Result<DiniEstimate, EvalError> {
    let mut probe = point.to_vec();
    let mut quotients = [0.0; 4];
    for (q, &h) in quotients.iter_mut().zip(steps.iter()) {
        for ((p, &x), &y) in probe.iter_mut().zip(point).zip(direction) {
            *p = x + h * y;
        }
        *q = (v.eval(&probe)? - base) / h;
    }
    // The coarsest step only seeds the sequence; convergence is judged on
    // the successive pairs below it. A smooth function with a small
    // derivative still converges at first order: its gaps shrink tenfold.
    let scale = quotients.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let gaps: Vec<f64> = quotients.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let close = gaps[1..].iter().all(|g| *g <= 1e-3 * scale + 1e-12);
    let geometric = gaps.windows(2).all(|g| g[1] <= 0.2 * g[0] + 1e-9 * (1.0 + scale)) && gaps[2] <= 1e-3 * (1.0 + scale);
    let converged = quotients.iter().all(|q| q.is_finite()) && (close || geometric);
    Ok(DiniEstimate { value: quotients[3], quotients, steps, converged })
}
