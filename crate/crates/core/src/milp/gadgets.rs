//! Linearization gadgets shared by the reformulations.

use super::model::{LinExpr, Model, ModelError, Sense, Var};
use crate::scalar::Scalar;

/// Adds `w = x * y` for `x` in `[0,1]` and `y` in finite `[L, U]`:
///
/// ```text
/// w <= U x          w >= L x
/// w <= y - L (1-x)  w >= y - U (1-x)
/// ```
///
/// The envelope is exact whenever `x` takes a value in {0,1}.
pub fn add_mccormick<T: Scalar>(model: &mut Model<T>, x: Var, y: Var) -> Result<Var, ModelError> {
    let xs = model.variable(x).clone();
    if xs.lower < T::zero() || xs.upper > T::one() {
        return Err(ModelError::BinaryBounds { name: xs.name });
    }
    let ys = model.variable(y).clone();
    let (lo, hi) = (ys.lower, ys.upper);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(ModelError::UnboundedFactor {
            name: ys.name,
            reason: "McCormick partner must have finite bounds",
        });
    }
    let name = format!("{}*{}", xs.name, ys.name);
    let w = model.add_continuous(name.clone(), lo.min(T::zero()), hi.max(T::zero()));
    let one = T::one();
    // w - U x <= 0
    model.constrain(LinExpr::from_terms([(w, one), (x, -hi)]), Sense::Le, T::zero(), format!("mc_u[{name}]"));
    // w - L x >= 0
    model.constrain(LinExpr::from_terms([(w, one), (x, -lo)]), Sense::Ge, T::zero(), format!("mc_l[{name}]"));
    // w - y - L x <= -L
    model.constrain(
        LinExpr::from_terms([(w, one), (y, -one), (x, -lo)]),
        Sense::Le,
        -lo,
        format!("mc_yl[{name}]"),
    );
    // w - y - U x >= -U
    model.constrain(
        LinExpr::from_terms([(w, one), (y, -one), (x, -hi)]),
        Sense::Ge,
        -hi,
        format!("mc_yu[{name}]"),
    );
    Ok(w)
}

/// Adds `t >= sum_j |row_j|` through one epigraph variable per row.
///
/// Only an upper bound on `t` is enforced; minimization pressure (or a
/// `<=` row on `t`) realizes the norm.
pub fn add_l1_epigraph<T: Scalar>(model: &mut Model<T>, rows: &[LinExpr<T>], tag: &str) -> Var {
    let t = model.add_continuous(format!("{tag}_l1"), T::zero(), T::infinity());
    let mut total = LinExpr::term(t, T::one());
    for (j, row) in rows.iter().enumerate() {
        let tj = model.add_continuous(format!("{tag}_abs{j}"), T::zero(), T::infinity());
        let mut pos = LinExpr::term(tj, T::one());
        pos -= row;
        model.constrain(pos, Sense::Ge, T::zero(), format!("{tag}_pos{j}"));
        let mut neg = LinExpr::term(tj, T::one());
        neg += row;
        model.constrain(neg, Sense::Ge, T::zero(), format!("{tag}_neg{j}"));
        total.add_term(tj, -T::one());
    }
    model.constrain(total, Sense::Eq, T::zero(), format!("{tag}_sum"));
    t
}
