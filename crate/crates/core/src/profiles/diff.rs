use super::expr::{BinaryOp, ExprNode, Func};

fn c(v: f64) -> ExprNode {
    ExprNode::Const(v)
}

/// Symbolic d/dt. Simplification is limited to what the smart
/// constructors do (constant folding and identity elimination).
pub fn differentiate(e: &ExprNode) -> ExprNode {
    match e {
        ExprNode::Const(_) => c(0.0),
        ExprNode::Var => c(1.0),
        ExprNode::Neg(u) => ExprNode::neg(differentiate(u)),
        ExprNode::Binary(op, l, r) => {
            let (l, r) = (l.as_ref(), r.as_ref());
            match op {
                BinaryOp::Add => ExprNode::add(differentiate(l), differentiate(r)),
                BinaryOp::Sub => ExprNode::sub(differentiate(l), differentiate(r)),
                BinaryOp::Mul => ExprNode::add(
                    ExprNode::mul(differentiate(l), r.clone()),
                    ExprNode::mul(l.clone(), differentiate(r)),
                ),
                BinaryOp::Div => ExprNode::div(
                    ExprNode::sub(
                        ExprNode::mul(differentiate(l), r.clone()),
                        ExprNode::mul(l.clone(), differentiate(r)),
                    ),
                    ExprNode::pow(r.clone(), c(2.0)),
                ),
                BinaryOp::Pow => differentiate_pow(l, r),
            }
        }
        ExprNode::Call(func, u) => {
            let du = differentiate(u);
            let u = u.as_ref().clone();
            let outer = match func {
                Func::Exp => ExprNode::call(Func::Exp, u),
                Func::Log => return ExprNode::div(du, u),
                Func::Sqrt => {
                    return ExprNode::div(du, ExprNode::mul(c(2.0), ExprNode::call(Func::Sqrt, u)))
                }
                Func::Sin => ExprNode::call(Func::Cos, u),
                Func::Cos => ExprNode::neg(ExprNode::call(Func::Sin, u)),
                Func::Sinh => ExprNode::call(Func::Cosh, u),
                Func::Cosh => ExprNode::call(Func::Sinh, u),
                Func::Tanh => {
                    ExprNode::sub(c(1.0), ExprNode::pow(ExprNode::call(Func::Tanh, u), c(2.0)))
                }
                Func::Coth => {
                    ExprNode::sub(c(1.0), ExprNode::pow(ExprNode::call(Func::Coth, u), c(2.0)))
                }
            };
            ExprNode::mul(outer, du)
        }
    }
}

fn differentiate_pow(base: &ExprNode, exponent: &ExprNode) -> ExprNode {
    let db = differentiate(base);
    if exponent.is_constant() {
        // n * u^(n-1) * u'
        let reduced = ExprNode::sub(exponent.clone(), c(1.0));
        return ExprNode::mul(
            ExprNode::mul(exponent.clone(), ExprNode::pow(base.clone(), reduced)),
            db,
        );
    }
    let de = differentiate(exponent);
    let whole = ExprNode::pow(base.clone(), exponent.clone());
    let log_base = ExprNode::call(Func::Log, base.clone());
    if base.is_constant() {
        return ExprNode::mul(ExprNode::mul(whole, log_base), de);
    }
    // u^v (v' log u + v u'/u)
    ExprNode::mul(
        whole,
        ExprNode::add(
            ExprNode::mul(de, log_base),
            ExprNode::div(ExprNode::mul(exponent.clone(), db), base.clone()),
        ),
    )
}

/// Logarithm of a positive profile, expanded over products, quotients,
/// powers, `exp` and `sqrt` so that the result stays finite where the
/// factors would overflow or underflow on their own.
///
/// Every rewrite is exact wherever each factor is positive. Where a factor
/// is not, evaluation reports a domain error instead of a wrong value.
pub fn log_expand(e: &ExprNode) -> ExprNode {
    match e {
        ExprNode::Const(v) if *v > 0.0 => c(v.ln()),
        ExprNode::Binary(BinaryOp::Mul, l, r) => ExprNode::add(log_expand(l), log_expand(r)),
        ExprNode::Binary(BinaryOp::Div, l, r) => ExprNode::sub(log_expand(l), log_expand(r)),
        ExprNode::Binary(BinaryOp::Pow, l, r) if !is_even_integer(r) => {
            ExprNode::mul(r.as_ref().clone(), log_expand(l))
        }
        ExprNode::Call(Func::Exp, u) => u.as_ref().clone(),
        ExprNode::Call(Func::Sqrt, u) => ExprNode::mul(c(0.5), log_expand(u)),
        // log sinh u = u + log(1 − e^{−2u}) − log 2, negative u still fails
        ExprNode::Call(Func::Sinh, u) => {
            let u = u.as_ref().clone();
            let decay = ExprNode::call(Func::Exp, ExprNode::mul(c(-2.0), u.clone()));
            ExprNode::sub(
                ExprNode::add(u, ExprNode::call(Func::Log, ExprNode::sub(c(1.0), decay))),
                c(std::f64::consts::LN_2),
            )
        }
        other => ExprNode::call(Func::Log, other.clone()),
    }
}

fn is_even_integer(e: &ExprNode) -> bool {
    e.as_const()
        .is_some_and(|v| v.fract() == 0.0 && (v / 2.0).fract() == 0.0)
}
