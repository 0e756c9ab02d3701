//! Self-contained LP and binary MILP kernel.

mod bnb;
mod gadgets;
mod model;
mod simplex;

pub use bnb::{solve_milp, solve_milp_with, LazyFn, MilpOptions, MilpResult, MilpStatus};
pub use gadgets::{add_l1_epigraph, add_mccormick};
pub use model::{
    Constraint, ConstraintId, Direction, LinExpr, Model, ModelError, Sense, Var, VarKind, VariableSpec,
};
pub use simplex::{solve_lp, solve_lp_with, LpOptions, LpResult, LpStatus};
