//! Symbolic differentiation with basic simplification.

use super::{e_add, e_call, e_const, e_div, e_mul, e_neg, e_pow, e_sub, Axis, BinOp, Expr, Func};

/// Exact partial derivative of `e` with respect to `var`.
///
/// Closed over the grammar: the result is again an expression tree.
/// Parameters differentiate to zero. Simplification is limited to identity
/// and zero rules plus constant folding; numeric comparison is the intended
/// way to check results.
pub fn differentiate(e: &Expr, var: Axis) -> Expr {
    match e {
        Expr::Const(_) | Expr::Param { .. } => e_const(0.0),
        Expr::Var(a) => e_const(if *a == var { 1.0 } else { 0.0 }),
        Expr::Neg(inner) => e_neg(differentiate(inner, var)),
        Expr::Bin(BinOp::Add, a, b) => e_add(differentiate(a, var), differentiate(b, var)),
        Expr::Bin(BinOp::Sub, a, b) => e_sub(differentiate(a, var), differentiate(b, var)),
        Expr::Bin(BinOp::Mul, a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            e_add(
                e_mul(da, b.as_ref().clone()),
                e_mul(a.as_ref().clone(), db),
            )
        }
        Expr::Bin(BinOp::Div, a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            let num = e_sub(
                e_mul(da, b.as_ref().clone()),
                e_mul(a.as_ref().clone(), db),
            );
            e_div(num, e_pow(b.as_ref().clone(), 2))
        }
        Expr::Pow(f, n) => {
            if *n == 0 {
                return e_const(0.0);
            }
            let df = differentiate(f, var);
            e_mul(
                e_mul(e_const(*n as f64), e_pow(f.as_ref().clone(), n - 1)),
                df,
            )
        }
        Expr::Call(func, g) => {
            let dg = differentiate(g, var);
            let g = g.as_ref().clone();
            match func {
                Func::Sin => e_mul(e_call(Func::Cos, g), dg),
                Func::Cos => e_neg(e_mul(e_call(Func::Sin, g), dg)),
                Func::Exp => e_mul(e_call(Func::Exp, g), dg),
                Func::Ln => e_div(dg, g),
                Func::Sqrt => e_div(dg, e_mul(e_const(2.0), e_call(Func::Sqrt, g))),
            }
        }
    }
}
