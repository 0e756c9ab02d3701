use super::ctx::{BuildCtx, Selection};
use super::inner::InnerLp;
use super::ropt;
use super::{EndogenousRc, LazyCut, RobustFormulation, RoptMethod};
use crate::error::{Error, Result};
use crate::milp::{Direction, LinExpr, Model, Sense, Var};
use crate::preferences::{self, PreferenceKind, RegretMode};
use crate::uncertainty::{dual_cone_rows, BoxForm, CostKind, Orientation, Regime};

/// One uncertainty-free row `sum coeffs x (sense) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct CertainRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Binary minimization problem with certain rows and an uncertain objective
/// whose uncertainty set is chosen among regimes.
#[derive(Clone, Debug)]
pub struct EndogenousProblem {
    label: String,
    dim: usize,
    rows: Vec<CertainRow>,
    regimes: Vec<Regime>,
    kind: CostKind,
    lp_exact: bool,
}

impl EndogenousProblem {
    /// `lp_exact` asserts that the rows are totally unimodular with integral
    /// right-hand sides, so fixed-regime robust counterparts with linear
    /// worst cases may drop integrality.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        rows: Vec<CertainRow>,
        regimes: Vec<Regime>,
        lp_exact: bool,
    ) -> Result<Self> {
        let first = regimes.first().ok_or_else(|| Error::InvalidInput("at least one regime is required".into()))?;
        let kind = first.cost_map.kind();
        if kind == CostKind::Gamma {
            return Err(Error::Unsupported("budgeted cost maps belong to the knapsack module".into()));
        }
        for (s, r) in regimes.iter().enumerate() {
            r.cost_map.validate()?;
            if r.cost_map.kind() != kind {
                return Err(Error::InvalidInput(format!(
                    "regime {s} is {}, expected {kind} like the first regime",
                    r.cost_map.kind()
                )));
            }
            if r.cost_map.dim() != dim {
                return Err(Error::InvalidInput(format!(
                    "regime {s} prices {} coordinates, expected {dim}",
                    r.cost_map.dim()
                )));
            }
            if !r.activation_cost.is_finite() {
                return Err(Error::InvalidInput(format!("regime {s} has a non-finite activation cost")));
            }
        }
        for (k, row) in rows.iter().enumerate() {
            if let Some(&(i, _)) = row.coeffs.iter().find(|(i, _)| *i >= dim) {
                return Err(Error::InvalidInput(format!("row {k} references coordinate {i} of {dim}")));
            }
        }
        Ok(EndogenousProblem { label: label.into(), dim, rows, regimes, kind, lp_exact })
    }

    pub fn rows(&self) -> &[CertainRow] {
        &self.rows
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn regime(&self, s: usize) -> &Regime {
        &self.regimes[s]
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn is_lp_exact(&self) -> bool {
        self.lp_exact
    }

    /// Same problem with every activation cost replaced.
    pub fn with_activation_costs(&self, costs: &[f64]) -> Result<Self> {
        if costs.len() != self.regimes.len() {
            return Err(Error::InvalidInput("one activation cost per regime is required".into()));
        }
        let mut p = self.clone();
        for (r, &c) in p.regimes.iter_mut().zip(costs) {
            r.activation_cost = c;
        }
        Ok(p)
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().map(|&(i, a)| a * x[i]).sum();
            let tol = 1e-7 * row.rhs.abs().max(1.0);
            match row.sense {
                Sense::Le => lhs <= row.rhs + tol,
                Sense::Ge => lhs >= row.rhs - tol,
                Sense::Eq => (lhs - row.rhs).abs() <= tol,
            }
        })
    }

    /// Box forms of all regimes, padded with zero columns to a common width.
    pub fn box_forms(&self) -> Result<Vec<BoxForm>> {
        let mut forms: Vec<BoxForm> =
            self.regimes.iter().map(|r| r.cost_map.to_box()).collect::<std::result::Result<_, _>>()?;
        let width = forms.iter().map(|f| f.width).max().unwrap_or(0);
        for f in &mut forms {
            for row in &mut f.loading {
                row.resize(width, 0.0);
            }
            f.width = width;
        }
        Ok(forms)
    }

    /// The certain rows over `[0,1]^n` as an inner LP.
    pub(crate) fn nominal_inner(&self) -> InnerLp {
        let mut lp = InnerLp::default();
        for _ in 0..self.dim {
            lp.add_col(Some(1.0));
        }
        for row in &self.rows {
            lp.add_row(row.coeffs.clone(), row.sense, row.rhs);
        }
        lp
    }

    /// `g = sum_s C_s^T P_s` and `t >= ||g||_1`, created once per model.
    pub(crate) fn box_deviation(&self, ctx: &mut BuildCtx) -> Result<(Vec<Var>, Var)> {
        if let Some(d) = &ctx.box_deviation {
            return Ok(d.clone());
        }
        let forms = self.box_forms()?;
        let width = forms.first().map_or(0, |f| f.width);
        let mut g = Vec::with_capacity(width);
        let mut rows = Vec::with_capacity(width);
        for j in 0..width {
            let (mut lo, mut hi) = (0.0, 0.0);
            for i in 0..self.dim {
                let col = forms.iter().map(|f| f.loading[i][j]);
                lo += col.clone().fold(0.0, f64::min);
                hi += col.fold(0.0, f64::max);
            }
            let gj = ctx.model.add_continuous(format!("g{j}"), lo, hi);
            let mut e = ctx.layout.mixed(|s| forms[s].loading.iter().map(|row| row[j]).collect());
            e.add_term(gj, -1.0);
            ctx.model.constrain(e, Sense::Eq, 0.0, format!("dev{j}"));
            g.push(gj);
            rows.push(LinExpr::term(gj, 1.0));
        }
        let t = ctx.model.add_continuous("dev_norm", 0.0, f64::INFINITY);
        dual_cone_rows(&self.regimes[0].cost_map, &mut ctx.model, &rows, t, Orientation::Upper)?;
        ctx.box_deviation = Some((g.clone(), t));
        Ok((g, t))
    }

    /// Worst-case coefficients for linear kinds.
    pub(crate) fn linear_worst(&self, s: usize) -> Vec<f64> {
        self.regimes[s].cost_map.linear_worst_costs().unwrap_or_default()
    }

    pub(crate) fn is_linear(&self) -> bool {
        matches!(self.kind, CostKind::Interval | CostKind::Correlated)
    }

    pub(crate) fn add_decisions(&self, model: &mut Model<f64>, relax: bool) -> Vec<Var> {
        let x: Vec<Var> = (0..self.dim)
            .map(|i| if relax { model.add_continuous(format!("x{i}"), 0.0, 1.0) } else { model.add_binary(format!("x{i}")) })
            .collect();
        for (k, row) in self.rows.iter().enumerate() {
            let e = LinExpr::from_terms(row.coeffs.iter().map(|&(i, a)| (x[i], a)));
            model.constrain(e, row.sense, row.rhs, format!("certain{k}"));
        }
        x
    }
}

impl RobustFormulation for EndogenousProblem {
    fn label(&self) -> &str {
        &self.label
    }

    fn regime_count(&self) -> usize {
        self.regimes.len()
    }

    fn activation_cost(&self, s: usize) -> f64 {
        self.regimes[s].activation_cost
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn orientation(&self) -> f64 {
        1.0
    }

    fn lp_exact(&self) -> bool {
        self.lp_exact && self.is_linear()
    }

    fn build(&self, selection: Selection, relax: bool) -> Result<BuildCtx> {
        let mut model = Model::new(Direction::Minimize);
        let x = self.add_decisions(&mut model, relax);
        BuildCtx::new(model, x, self.regimes.len(), selection)
    }

    fn worst_case_expr(&self, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
        if self.is_linear() {
            return Ok(ctx.layout.mixed(|s| self.linear_worst(s)));
        }
        let (_, t) = self.box_deviation(ctx)?;
        let forms = self.box_forms()?;
        let mut e = ctx.layout.mixed(|s| forms[s].nominal.clone());
        e.add_term(t, 1.0);
        Ok(e)
    }

    fn preference_expr(&self, ctx: &mut BuildCtx, pref: PreferenceKind) -> Result<LinExpr<f64>> {
        match pref {
            PreferenceKind::Predictability => preferences::predictability_block(self, ctx),
            PreferenceKind::BestCase => preferences::bestcase_block(self, ctx),
            PreferenceKind::Regret(RegretMode::Exact) => preferences::regret_interval_block(self, ctx),
            PreferenceKind::Regret(RegretMode::RltBound) => preferences::regret_rlt_block(self, ctx),
            PreferenceKind::Regret(RegretMode::Columnwise) => Err(Error::Unsupported(
                "column-wise regret needs a certain objective; use ColumnwiseLp".into(),
            )),
        }
    }

    fn default_ropt(&self) -> RoptMethod {
        if self.lp_exact() {
            RoptMethod::Duality
        } else {
            RoptMethod::Lazy
        }
    }

    fn ropt_block<'a>(
        &'a self,
        ctx: &mut BuildCtx,
        method: &RoptMethod,
        rc: &EndogenousRc,
    ) -> Result<Option<LazyCut<'a>>> {
        ropt::endogenous_ropt(self, ctx, method, rc)
    }

    fn worst_case(&self, x: &[f64], s: usize) -> Result<f64> {
        Ok(self.regimes[s].cost_map.worst_case_value(x)?)
    }

    fn preference(&self, x: &[f64], s: usize, pref: PreferenceKind) -> Result<f64> {
        let cm = &self.regimes[s].cost_map;
        match pref {
            PreferenceKind::Predictability => Ok(cm.worst_case_value(x)? - cm.best_case_value(x)?),
            PreferenceKind::BestCase => Ok(cm.best_case_value(x)?),
            PreferenceKind::Regret(RegretMode::Exact) => preferences::regret_interval_value(self, x, s),
            PreferenceKind::Regret(RegretMode::RltBound) => preferences::regret_rlt_value(self, x, s),
            PreferenceKind::Regret(RegretMode::Columnwise) => {
                Err(Error::Unsupported("column-wise regret needs a certain objective".into()))
            }
        }
    }

    fn preference_orientation(&self, _pref: PreferenceKind) -> f64 {
        1.0
    }
}
