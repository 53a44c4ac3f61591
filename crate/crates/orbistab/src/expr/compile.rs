//! Compilation of expression trees into exact scalar fields.

use std::sync::Arc;

use super::{differentiate, Axis, Expr, ParamTable};
use crate::error::Result;
use crate::field::ScalarField;
use crate::vec3::{Mat3, Vec3};

/// Compile `e` into a [`ScalarField`] whose gradient and Hessian come from
/// symbolic differentiation of the bound tree.
///
/// Every parameter referenced by `e` must be bound in `params`.
pub fn compile(e: &Expr, params: &ParamTable) -> Result<ScalarField> {
    let bound = Arc::new(e.bind(params)?);
    let partials: Vec<Arc<Expr>> =
        Axis::ALL.iter().map(|&a| Arc::new(differentiate(&bound, a))).collect();
    // Second partials; symmetric, so six distinct entries.
    let second: Vec<Vec<Arc<Expr>>> = (0..3)
        .map(|i| Axis::ALL.iter().map(|&a| Arc::new(differentiate(&partials[i], a))).collect())
        .collect();

    let ev = bound.clone();
    let gx = partials[0].clone();
    let gy = partials[1].clone();
    let gz = partials[2].clone();
    let hint = format!("expression {bound}");
    let hess_rows = second;
    Ok(ScalarField::new(
        move |u: Vec3| ev.eval(u),
        move |u: Vec3| Vec3::new(gx.eval(u), gy.eval(u), gz.eval(u)),
    )
    .with_hessian(move |u: Vec3| {
        let mut m = Mat3::zeros();
        for (i, row) in hess_rows.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                m[(i, j)] = entry.eval(u);
            }
        }
        m
    })
    .with_domain_hint(&hint))
}
