//! Inner maximization LPs whose duals are embedded in outer models.

use crate::error::{Error, Result};
use crate::milp::{solve_lp, LinExpr, LpStatus, Model, Sense, Direction, Var};

#[derive(Clone, Debug)]
pub(crate) struct InnerRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `max f^T z  s.t.  rows,  0 <= z <= upper`, with constant rows and an
/// objective that may depend on outer variables.
#[derive(Clone, Debug, Default)]
pub(crate) struct InnerLp {
    pub upper: Vec<Option<f64>>,
    pub rows: Vec<InnerRow>,
}

impl InnerLp {
    pub fn add_col(&mut self, upper: Option<f64>) -> usize {
        self.upper.push(upper);
        self.upper.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(InnerRow { coeffs, sense, rhs });
    }

    pub fn cols(&self) -> usize {
        self.upper.len()
    }

    /// Adds a dual-feasible point `(w, v)` to `model` and returns its dual
    /// objective `b^T w + upper^T v`. Every feasible choice bounds the inner
    /// maximum from above; the minimum over them equals it.
    pub fn embed_dual(&self, model: &mut Model<f64>, objective: &[LinExpr<f64>], tag: &str) -> LinExpr<f64> {
        debug_assert_eq!(objective.len(), self.cols());
        let mut value = LinExpr::new();
        let mut col_exprs: Vec<LinExpr<f64>> = vec![LinExpr::new(); self.cols()];
        for (i, row) in self.rows.iter().enumerate() {
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let w = model.add_continuous(format!("{tag}_w{i}"), lo, hi);
            if row.rhs != 0.0 {
                value.add_term(w, row.rhs);
            }
            for &(j, a) in &row.coeffs {
                col_exprs[j].add_term(w, a);
            }
        }
        for (j, ub) in self.upper.iter().enumerate() {
            if let Some(ub) = ub {
                let v: Var = model.add_continuous(format!("{tag}_v{j}"), 0.0, f64::INFINITY);
                value.add_term(v, *ub);
                col_exprs[j].add_term(v, 1.0);
            }
        }
        for (j, mut e) in col_exprs.into_iter().enumerate() {
            e -= &objective[j];
            model.constrain(e, Sense::Ge, 0.0, format!("{tag}_col{j}"));
        }
        value
    }

    /// Primal optimum for a constant objective.
    pub fn solve(&self, objective: &[f64]) -> Result<f64> {
        let mut model = Model::new(Direction::Maximize);
        let z: Vec<Var> = self
            .upper
            .iter()
            .enumerate()
            .map(|(j, ub)| model.add_continuous(format!("z{j}"), 0.0, ub.unwrap_or(f64::INFINITY)))
            .collect();
        for (i, row) in self.rows.iter().enumerate() {
            let e = LinExpr::from_terms(row.coeffs.iter().map(|&(j, a)| (z[j], a)));
            model.constrain(e, row.sense, row.rhs, format!("row{i}"));
        }
        model.set_objective(LinExpr::from_terms(z.iter().copied().zip(objective.iter().copied())));
        let r = solve_lp(&model)?;
        match r.status {
            LpStatus::Optimal => Ok(r.objective),
            LpStatus::Infeasible => Err(Error::Infeasible("inner problem has no feasible point".into())),
            LpStatus::Unbounded => Err(Error::Unbounded("inner problem".into())),
            LpStatus::IterationLimit => Err(Error::ResourceExhausted("inner LP pivot budget".into())),
        }
    }
}
