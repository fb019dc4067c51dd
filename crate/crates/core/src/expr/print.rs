use std::fmt;

use super::{BinOp, CmpOp, Expr, LogicOp};

const OR: u8 = 1;
const AND: u8 = 2;
const CMP: u8 = 3;
const ADD: u8 = 4;
const MUL: u8 = 5;
const UNARY: u8 = 6;
const POW: u8 = 7;
const ATOM: u8 = 8;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Logic(LogicOp::Or, ..) => OR,
        Expr::Logic(LogicOp::And, ..) => AND,
        Expr::Cmp(..) => CMP,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => ADD,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => MUL,
        Expr::Neg(_) => UNARY,
        Expr::Binary(BinOp::Pow, ..) => POW,
        _ => ATOM,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        // `Display` for f64 is the shortest string that parses back exactly.
        Expr::Num(v) => write!(f, "{v}"),
        Expr::Bool(b) => write!(f, "{b}"),
        Expr::Var(v) => match v.index {
            Some(i) => write!(f, "{}[{i}]", v.name),
            None => write!(f, "{}", v.name),
        },
        Expr::Neg(inner) => {
            write!(f, "-")?;
            write_at(f, inner, UNARY)
        }
        Expr::Binary(BinOp::Pow, base, exp) => {
            write_at(f, base, ATOM)?;
            write!(f, "^")?;
            write_at(f, exp, UNARY)
        }
        Expr::Binary(op, a, b) => {
            let (level, sym) = match op {
                BinOp::Add => (ADD, "+"),
                BinOp::Sub => (ADD, "-"),
                BinOp::Mul => (MUL, "*"),
                BinOp::Div => (MUL, "/"),
                BinOp::Pow => unreachable!(),
            };
            write_at(f, a, level)?;
            write!(f, " {sym} ")?;
            write_at(f, b, level + 1)
        }
        Expr::Cmp(op, a, b) => {
            let sym = match op {
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
            };
            write_at(f, a, ADD)?;
            write!(f, " {sym} ")?;
            write_at(f, b, ADD)
        }
        Expr::Logic(op, a, b) => {
            let (level, sym) = match op {
                LogicOp::Or => (OR, "or"),
                LogicOp::And => (AND, "and"),
            };
            write_at(f, a, level)?;
            write!(f, " {sym} ")?;
            write_at(f, b, level + 1)
        }
        Expr::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_expr(f, a)?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
