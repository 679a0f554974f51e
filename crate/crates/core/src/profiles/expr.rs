//! Expression trees for radial profiles.
//!
//! Every node is a function of the single radial variable `t`. Arity is
//! carried by the enum shape, so a tree is always well formed once built.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Coth,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Coth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Coth => "coth",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64, t: f64) -> Result<f64, EvalError> {
        let value = match self {
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(EvalError::LogDomain { t, arg: x });
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(EvalError::SqrtDomain { t, arg: x });
                }
                x.sqrt()
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Coth => {
                if x == 0.0 {
                    return Err(EvalError::DivisionByZero { t });
                }
                1.0 / x.tanh()
            }
        };
        finite(value, t)
    }
}

/// Failure to produce a finite real from an expression.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero at t = {t}")]
    DivisionByZero { t: f64 },
    #[error("log of nonpositive argument {arg} at t = {t}")]
    LogDomain { t: f64, arg: f64 },
    #[error("sqrt of negative argument {arg} at t = {t}")]
    SqrtDomain { t: f64, arg: f64 },
    #[error("power {base}^{exponent} is not real at t = {t}")]
    PowDomain { t: f64, base: f64, exponent: f64 },
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
}

fn finite(value: f64, t: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite { t })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprNode {
    Const(f64),
    Var,
    Neg(Box<ExprNode>),
    Binary(BinaryOp, Box<ExprNode>, Box<ExprNode>),
    Call(Func, Box<ExprNode>),
}

impl ExprNode {
    pub fn constant(c: f64) -> Self {
        ExprNode::Const(c)
    }

    pub fn var() -> Self {
        ExprNode::Var
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            ExprNode::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, c: f64) -> bool {
        self.as_const() == Some(c)
    }

    /// True when the tree does not mention `t`.
    pub fn is_constant(&self) -> bool {
        match self {
            ExprNode::Const(_) => true,
            ExprNode::Var => false,
            ExprNode::Neg(u) | ExprNode::Call(_, u) => u.is_constant(),
            ExprNode::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ExprNode::Const(_) | ExprNode::Var => 1,
            ExprNode::Neg(u) | ExprNode::Call(_, u) => 1 + u.depth(),
            ExprNode::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    // Smart constructors. They fold constants and drop the identities
    // 0*x, 1*x, x+0, x-0, x/1, x^1, x^0 and nothing else.

    pub fn neg(u: ExprNode) -> Self {
        match u {
            ExprNode::Const(c) => ExprNode::Const(-c),
            u => ExprNode::Neg(Box::new(u)),
        }
    }

    pub fn add(l: ExprNode, r: ExprNode) -> Self {
        if let Some(v) = fold(BinaryOp::Add, &l, &r) {
            return v;
        }
        if l.is_const(0.0) {
            return r;
        }
        if r.is_const(0.0) {
            return l;
        }
        ExprNode::Binary(BinaryOp::Add, Box::new(l), Box::new(r))
    }

    pub fn sub(l: ExprNode, r: ExprNode) -> Self {
        if let Some(v) = fold(BinaryOp::Sub, &l, &r) {
            return v;
        }
        if r.is_const(0.0) {
            return l;
        }
        if l.is_const(0.0) {
            return ExprNode::neg(r);
        }
        ExprNode::Binary(BinaryOp::Sub, Box::new(l), Box::new(r))
    }

    pub fn mul(l: ExprNode, r: ExprNode) -> Self {
        if let Some(v) = fold(BinaryOp::Mul, &l, &r) {
            return v;
        }
        if l.is_const(0.0) || r.is_const(0.0) {
            return ExprNode::Const(0.0);
        }
        if l.is_const(1.0) {
            return r;
        }
        if r.is_const(1.0) {
            return l;
        }
        ExprNode::Binary(BinaryOp::Mul, Box::new(l), Box::new(r))
    }

    pub fn div(l: ExprNode, r: ExprNode) -> Self {
        if let Some(v) = fold(BinaryOp::Div, &l, &r) {
            return v;
        }
        if l.is_const(0.0) && !r.is_const(0.0) {
            return ExprNode::Const(0.0);
        }
        if r.is_const(1.0) {
            return l;
        }
        ExprNode::Binary(BinaryOp::Div, Box::new(l), Box::new(r))
    }

    pub fn pow(l: ExprNode, r: ExprNode) -> Self {
        if let Some(v) = fold(BinaryOp::Pow, &l, &r) {
            return v;
        }
        if r.is_const(1.0) {
            return l;
        }
        if r.is_const(0.0) {
            return ExprNode::Const(1.0);
        }
        ExprNode::Binary(BinaryOp::Pow, Box::new(l), Box::new(r))
    }

    pub fn binary(op: BinaryOp, l: ExprNode, r: ExprNode) -> Self {
        match op {
            BinaryOp::Add => ExprNode::add(l, r),
            BinaryOp::Sub => ExprNode::sub(l, r),
            BinaryOp::Mul => ExprNode::mul(l, r),
            BinaryOp::Div => ExprNode::div(l, r),
            BinaryOp::Pow => ExprNode::pow(l, r),
        }
    }

    pub fn call(func: Func, u: ExprNode) -> Self {
        if let ExprNode::Const(c) = u {
            if let Ok(v) = func.apply(c, 0.0) {
                return ExprNode::Const(v);
            }
        }
        ExprNode::Call(func, Box::new(u))
    }

    /// IEEE-754 evaluation at `t`; any non-real or non-finite intermediate is an error.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        match self {
            ExprNode::Const(c) => Ok(*c),
            ExprNode::Var => Ok(t),
            ExprNode::Neg(u) => Ok(-u.eval(t)?),
            ExprNode::Binary(op, l, r) => apply_binary(*op, l.eval(t)?, r.eval(t)?, t),
            ExprNode::Call(func, u) => func.apply(u.eval(t)?, t),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ExprNode::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            ExprNode::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            ExprNode::Neg(_) => 3,
            ExprNode::Const(c) if c.is_sign_negative() => 3,
            ExprNode::Binary(BinaryOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn fold(op: BinaryOp, l: &ExprNode, r: &ExprNode) -> Option<ExprNode> {
    let (a, b) = (l.as_const()?, r.as_const()?);
    apply_binary(op, a, b, 0.0).ok().map(ExprNode::Const)
}

fn apply_binary(op: BinaryOp, a: f64, b: f64, t: f64) -> Result<f64, EvalError> {
    let value = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero { t });
            }
            a / b
        }
        BinaryOp::Pow => return power(a, b, t),
    };
    finite(value, t)
}

fn power(base: f64, exponent: f64, t: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero { t });
    }
    let value = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else if base < 0.0 {
        return Err(EvalError::PowDomain { t, base, exponent });
    } else {
        base.powf(exponent)
    };
    finite(value, t)
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprNode::Const(c) => write!(f, "{c}"),
            ExprNode::Var => f.write_str("t"),
            ExprNode::Neg(u) => {
                f.write_str("-")?;
                write_child(f, u, 3)
            }
            ExprNode::Call(func, u) => write!(f, "{}({u})", func.name()),
            ExprNode::Binary(BinaryOp::Pow, l, r) => {
                // base must be atomic; the exponent is a factor
                write_child(f, l, 5)?;
                f.write_str("^")?;
                write_child(f, r, 3)
            }
            ExprNode::Binary(op, l, r) => {
                let p = self.precedence();
                write_child(f, l, p)?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, r, p + 1)
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &ExprNode, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> ExprNode {
        ExprNode::Var
    }

    #[test]
    fn division_by_zero_is_typed() {
        let e = ExprNode::div(ExprNode::Const(1.0), t());
        assert_eq!(e.eval(0.0), Err(EvalError::DivisionByZero { t: 0.0 }));
    }

    #[test]
    fn log_and_sqrt_domains() {
        let log = ExprNode::call(Func::Log, t());
        assert!(matches!(log.eval(0.0), Err(EvalError::LogDomain { .. })));
        let sqrt = ExprNode::call(Func::Sqrt, ExprNode::neg(t()));
        assert!(matches!(sqrt.eval(1.0), Err(EvalError::SqrtDomain { .. })));
        assert_eq!(sqrt.eval(0.0), Ok(0.0));
    }

    #[test]
    fn overflow_is_not_silent() {
        let e = ExprNode::call(Func::Exp, ExprNode::pow(t(), ExprNode::Const(2.0)));
        assert!(matches!(e.eval(40.0), Err(EvalError::NonFinite { .. })));
    }

    #[test]
    fn negative_base_powers() {
        let e = ExprNode::pow(t(), ExprNode::Const(3.0));
        assert_eq!(e.eval(-2.0), Ok(-8.0));
        let e = ExprNode::pow(t(), ExprNode::Const(0.5));
        assert!(matches!(e.eval(-2.0), Err(EvalError::PowDomain { .. })));
    }

    #[test]
    fn identities_are_eliminated() {
        assert_eq!(
            ExprNode::mul(ExprNode::Const(0.0), t()),
            ExprNode::Const(0.0)
        );
        assert_eq!(ExprNode::mul(ExprNode::Const(1.0), t()), t());
        assert_eq!(ExprNode::add(t(), ExprNode::Const(0.0)), t());
        assert_eq!(
            ExprNode::add(ExprNode::Const(2.0), ExprNode::Const(3.0)),
            ExprNode::Const(5.0)
        );
        // folding never manufactures an invalid constant
        let bad = ExprNode::div(ExprNode::Const(1.0), ExprNode::Const(0.0));
        assert!(matches!(bad, ExprNode::Binary(BinaryOp::Div, ..)));
    }

    #[test]
    fn display_respects_precedence() {
        let e = ExprNode::mul(
            t(),
            ExprNode::call(Func::Exp, ExprNode::pow(t(), ExprNode::Const(2.0))),
        );
        assert_eq!(e.to_string(), "t * exp(t^2)");
        let e = ExprNode::pow(ExprNode::neg(t()), ExprNode::Const(2.0));
        assert_eq!(e.to_string(), "(-t)^2");
        let e = ExprNode::sub(t(), ExprNode::sub(t(), ExprNode::Const(1.0)));
        assert_eq!(e.to_string(), "t - (t - 1)");
    }
}
