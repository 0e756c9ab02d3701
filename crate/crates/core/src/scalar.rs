use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point type the LP/MILP kernel is generic over.
///
/// Tolerances are per type so the same algorithms stay usable in single
/// precision, where `1e-7` is below machine epsilon.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Primal feasibility tolerance.
    fn feas_tol() -> Self;
    /// Distance from {0,1} accepted as integral.
    fn int_tol() -> Self;
    /// Relative optimality gap used for pruning.
    fn gap_tol() -> Self;
    /// Smallest pivot magnitude accepted by the ratio test.
    fn pivot_tol() -> Self;
    /// Entries below this are flushed to zero after a pivot.
    fn drop_tol() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }
}

impl Scalar for f64 {
    fn feas_tol() -> Self {
        1e-7
    }
    fn int_tol() -> Self {
        1e-6
    }
    fn gap_tol() -> Self {
        1e-6
    }
    fn pivot_tol() -> Self {
        1e-9
    }
    fn drop_tol() -> Self {
        1e-13
    }
}

impl Scalar for f32 {
    fn feas_tol() -> Self {
        1e-4
    }
    fn int_tol() -> Self {
        1e-4
    }
    fn gap_tol() -> Self {
        1e-4
    }
    fn pivot_tol() -> Self {
        1e-6
    }
    fn drop_tol() -> Self {
        1e-7
    }
}
