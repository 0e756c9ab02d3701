//! Preference terms: predictability, best-case performance, and maximum
//! regret, as model blocks and as direct evaluations.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::milp::{
    add_l1_epigraph, add_mccormick, solve_lp, solve_milp, Direction, LinExpr, LpStatus, MilpStatus, Model, Sense,
    Var,
};
use crate::robust::{BuildCtx, EndogenousProblem, InnerLp, RobustFormulation};
use crate::uncertainty::{BoxForm, CostKind, CostMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegretMode {
    /// Exact dual embedding for interval maps on totally unimodular rows.
    Exact,
    /// Upper bound from the dual of a McCormick-lifted inner problem.
    RltBound,
    /// Exact embedding under column-wise uncertainty with a certain
    /// objective (see [`ColumnwiseLp`]).
    Columnwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PreferenceKind {
    /// Spread between worst and best case.
    Predictability,
    BestCase,
    Regret(RegretMode),
}

impl PreferenceKind {
    /// Regret mode matching a cost-map kind: exact for intervals, the
    /// bound otherwise.
    pub fn regret_for(kind: CostKind) -> Self {
        match kind {
            CostKind::Interval => PreferenceKind::Regret(RegretMode::Exact),
            _ => PreferenceKind::Regret(RegretMode::RltBound),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PreferenceKind::Predictability => "predictability",
            PreferenceKind::BestCase => "best-case",
            PreferenceKind::Regret(RegretMode::Exact) => "regret",
            PreferenceKind::Regret(RegretMode::RltBound) => "regret-rlt",
            PreferenceKind::Regret(RegretMode::Columnwise) => "regret-columnwise",
        }
    }
}

impl fmt::Display for PreferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "predictability" | "pred" => PreferenceKind::Predictability,
            "best-case" | "bestcase" | "best" => PreferenceKind::BestCase,
            "regret" | "regret-exact" => PreferenceKind::Regret(RegretMode::Exact),
            "regret-rlt" => PreferenceKind::Regret(RegretMode::RltBound),
            "regret-columnwise" => PreferenceKind::Regret(RegretMode::Columnwise),
            _ => return Err(Error::InvalidInput(format!("unknown preference '{s}'"))),
        })
    }
}

/// Regret bound at a point together with the exact value when computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretCertificate {
    pub bound_value: f64,
    pub exact_value: Option<f64>,
    pub tight: Option<bool>,
}

const REGRET_TOL: f64 = 1e-6;

fn checked_regret(v: f64, what: &str) -> Result<f64> {
    if v < -REGRET_TOL {
        return Err(Error::Inconsistent(format!("{what} evaluated to {v}")));
    }
    Ok(v.max(0.0))
}

pub fn predictability_block(p: &EndogenousProblem, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
    match p.kind() {
        CostKind::Interval | CostKind::Correlated => Ok(ctx.layout.mixed(|s| {
            let cm = &p.regime(s).cost_map;
            let (w, b) = (cm.linear_worst_costs().unwrap_or_default(), cm.linear_best_costs().unwrap_or_default());
            w.iter().zip(&b).map(|(w, b)| w - b).collect()
        })),
        CostKind::GeneralBox => {
            let (_, t) = p.box_deviation(ctx)?;
            Ok(LinExpr::term(t, 2.0))
        }
        CostKind::Gamma => Err(Error::Unsupported("budgeted maps use the knapsack blocks".into())),
    }
}

/// For box maps `u = 2v - 1` with binary `v`; minimization pressure picks
/// the minimizing vertex.
pub fn bestcase_block(p: &EndogenousProblem, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
    match p.kind() {
        CostKind::Interval | CostKind::Correlated => {
            Ok(ctx.layout.mixed(|s| p.regime(s).cost_map.linear_best_costs().unwrap_or_default()))
        }
        CostKind::GeneralBox => {
            let (g, _) = p.box_deviation(ctx)?;
            let forms = p.box_forms()?;
            let mut e = ctx.layout.mixed(|s| forms[s].nominal.clone());
            for (j, &gj) in g.iter().enumerate() {
                let v = ctx.model.add_binary(format!("best_v{j}"));
                let h = add_mccormick(&mut ctx.model, v, gj)?;
                e.add_term(h, 2.0);
                e.add_term(gj, -1.0);
            }
            Ok(e)
        }
        CostKind::Gamma => Err(Error::Unsupported("budgeted maps use the knapsack blocks".into())),
    }
}

fn require_interval_tu(p: &EndogenousProblem) -> Result<()> {
    if p.kind() != CostKind::Interval {
        return Err(Error::Unsupported(format!("exact regret needs interval maps, got {}", p.kind())));
    }
    if !p.is_lp_exact() {
        return Err(Error::Unsupported("exact regret needs totally unimodular rows".into()));
    }
    Ok(())
}

fn interval_bounds(cm: &CostMap) -> (&[f64], &[f64]) {
    match cm {
        CostMap::Interval { lower, upper } => (lower, upper),
        _ => (&[], &[]),
    }
}

/// Regret for interval maps: the hindsight solution sees lower bounds
/// except on the coordinates used by `x`, which sit at their upper bounds.
/// The hindsight LP is replaced by its dual.
pub fn regret_interval_block(p: &EndogenousProblem, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
    require_interval_tu(p)?;
    let inner = p.nominal_inner();
    let n = p.dimension();
    let mut objective = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = ctx.layout.regime_scalar(|s| -interval_bounds(&p.regime(s).cost_map).0[i]);
        for s in ctx.layout.active() {
            let (lo, up) = interval_bounds(&p.regime(s).cost_map);
            e.add_scaled(&ctx.layout.masked(s, i), -(up[i] - lo[i]));
        }
        objective.push(e);
    }
    let dual = inner.embed_dual(&mut ctx.model, &objective, "regret_dual");
    let mut e = ctx.layout.mixed(|s| interval_bounds(&p.regime(s).cost_map).1.to_vec());
    e += &dual;
    Ok(e)
}

pub fn regret_interval_value(p: &EndogenousProblem, x: &[f64], s: usize) -> Result<f64> {
    require_interval_tu(p)?;
    let (lo, up) = interval_bounds(&p.regime(s).cost_map);
    let objective: Vec<f64> = (0..p.dimension()).map(|i| -(lo[i] + x[i] * (up[i] - lo[i]))).collect();
    let hindsight = p.nominal_inner().solve(&objective)?;
    checked_regret(dot(up, x) + hindsight, "interval regret")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column indices of the lifted inner problem over `(y, u, psi)`, with `u`
/// in `[0,1]^{2q}` standing for `u+ - u-`.
struct Lifted {
    n: usize,
    q2: usize,
}

impl Lifted {
    fn y(&self, i: usize) -> usize {
        i
    }
    fn u(&self, j: usize) -> usize {
        self.n + j
    }
    fn psi(&self, i: usize, j: usize) -> usize {
        self.n + self.q2 + i * self.q2 + j
    }
}

/// `C_bar = (C, -C)` entry.
fn split_loading(form: &BoxForm, i: usize, j: usize) -> f64 {
    let q = form.width;
    if j < q {
        form.loading[i][j]
    } else {
        -form.loading[i][j - q]
    }
}

fn lifted_inner(p: &EndogenousProblem, q: usize) -> (InnerLp, Lifted) {
    let n = p.dimension();
    let lay = Lifted { n, q2: 2 * q };
    let mut lp = InnerLp::default();
    for _ in 0..n + lay.q2 {
        lp.add_col(Some(1.0));
    }
    for _ in 0..n * lay.q2 {
        lp.add_col(None);
    }
    for row in p.rows() {
        lp.add_row(row.coeffs.iter().map(|&(i, a)| (lay.y(i), a)).collect(), row.sense, row.rhs);
    }
    // Rows multiplied by each u_j.
    for j in 0..lay.q2 {
        for row in p.rows() {
            let mut coeffs: Vec<(usize, f64)> = row.coeffs.iter().map(|&(i, a)| (lay.psi(i, j), a)).collect();
            coeffs.push((lay.u(j), -row.rhs));
            lp.add_row(coeffs, row.sense, 0.0);
        }
    }
    for i in 0..n {
        for j in 0..lay.q2 {
            let k = lay.psi(i, j);
            lp.add_row(vec![(k, 1.0), (lay.u(j), -1.0)], Sense::Le, 0.0);
            lp.add_row(vec![(k, 1.0), (lay.y(i), -1.0)], Sense::Le, 0.0);
            lp.add_row(vec![(lay.y(i), 1.0), (lay.u(j), 1.0), (k, -1.0)], Sense::Le, 1.0);
        }
    }
    (lp, lay)
}

fn require_box(p: &EndogenousProblem) -> Result<Vec<BoxForm>> {
    if p.kind() == CostKind::Gamma {
        return Err(Error::Unsupported("budgeted maps use the knapsack blocks".into()));
    }
    p.box_forms()
}

/// Upper bound on regret: `c0^T x` plus the dual of the lifted hindsight
/// problem.
pub fn regret_rlt_block(p: &EndogenousProblem, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
    let forms = require_box(p)?;
    let q = forms.first().map_or(0, |f| f.width);
    let (inner, lay) = lifted_inner(p, q);
    let mut objective = vec![LinExpr::new(); inner.cols()];
    for i in 0..lay.n {
        objective[lay.y(i)] = ctx.layout.regime_scalar(|s| -forms[s].nominal[i]);
        for j in 0..lay.q2 {
            objective[lay.psi(i, j)] = ctx.layout.regime_scalar(|s| -split_loading(&forms[s], i, j));
        }
    }
    for j in 0..lay.q2 {
        objective[lay.u(j)] = ctx.layout.mixed(|s| (0..lay.n).map(|i| split_loading(&forms[s], i, j)).collect());
    }
    let dual = inner.embed_dual(&mut ctx.model, &objective, "rlt_dual");
    let mut e = ctx.layout.mixed(|s| forms[s].nominal.clone());
    e += &dual;
    Ok(e)
}

pub fn regret_rlt_value(p: &EndogenousProblem, x: &[f64], s: usize) -> Result<f64> {
    let forms = require_box(p)?;
    let form = &forms[s];
    let (inner, lay) = lifted_inner(p, form.width);
    let mut objective = vec![0.0; inner.cols()];
    for i in 0..lay.n {
        objective[lay.y(i)] = -form.nominal[i];
        for j in 0..lay.q2 {
            objective[lay.psi(i, j)] = -split_loading(form, i, j);
        }
    }
    for j in 0..lay.q2 {
        objective[lay.u(j)] = (0..lay.n).map(|i| split_loading(form, i, j) * x[i]).sum();
    }
    let v = inner.solve(&objective)?;
    checked_regret(dot(&form.nominal, x) + v, "regret bound")
}

/// Exact maximum regret of `x` under regime `s`: a MILP over box vertices
/// `u = 2v - 1` and binary hindsight solutions `y`, with the products
/// `v_j y_i` linearized exactly.
pub fn regret_exact_eval(p: &EndogenousProblem, x: &[f64], s: usize) -> Result<f64> {
    if !p.is_feasible(x) {
        return Err(Error::InvalidInput("regret requested for an infeasible point".into()));
    }
    let form = p.regime(s).cost_map.to_box()?;
    let n = p.dimension();
    let mut m = Model::new(Direction::Maximize);
    let y = p.add_decisions(&mut m, false);
    let v: Vec<Var> = (0..form.width).map(|j| m.add_binary(format!("v{j}"))).collect();
    let g = form.deviation(x);
    let mut obj = LinExpr::constant(dot(&form.nominal, x) - g.iter().sum::<f64>());
    for (j, &vj) in v.iter().enumerate() {
        obj.add_term(vj, 2.0 * g[j]);
    }
    for i in 0..n {
        let row_sum: f64 = form.loading[i].iter().sum();
        obj.add_term(y[i], -form.nominal[i] + row_sum);
        for (j, &vj) in v.iter().enumerate() {
            let c = form.loading[i][j];
            if c != 0.0 {
                let w = add_mccormick(&mut m, vj, y[i])?;
                obj.add_term(w, -2.0 * c);
            }
        }
    }
    m.set_objective(obj);
    let r = solve_milp(&m, None);
    match r.status {
        MilpStatus::Optimal => checked_regret(r.objective, "exact regret"),
        MilpStatus::Infeasible => Err(Error::Infeasible("hindsight problem".into())),
        MilpStatus::Unbounded => Err(Error::Unbounded("hindsight problem".into())),
        MilpStatus::ResourceExhausted => Err(Error::ResourceExhausted("exact regret evaluation".into())),
    }
}

/// Bound and exact regret side by side.
pub fn regret_certificate(p: &EndogenousProblem, x: &[f64], s: usize) -> Result<RegretCertificate> {
    let bound = regret_rlt_value(p, x, s)?;
    let exact = regret_exact_eval(p, x, s)?;
    if bound < exact - REGRET_TOL {
        return Err(Error::Inconsistent(format!("regret bound {bound} below exact value {exact}")));
    }
    Ok(RegretCertificate {
        bound_value: bound,
        exact_value: Some(exact),
        tight: Some(bound - exact <= REGRET_TOL * exact.abs().max(1.0)),
    })
}

/// Which clause of the column-wise assumption failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnwiseClause {
    /// Shapes do not describe one uncertainty block per column.
    ColumnStructure,
    /// Rows and right-hand side disagree in length.
    RowCount,
    NonFinite,
}

impl fmt::Display for ColumnwiseClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnwiseClause::ColumnStructure => "column-wise structure",
            ColumnwiseClause::RowCount => "row count",
            ColumnwiseClause::NonFinite => "finite data",
        })
    }
}

/// `min c0^T x  s.t.  sum_i (a0_i + A_i u_i) x_i <= b0 + B u_b,  x >= 0`
/// with box parameters `u_i`, `u_b` in `[-1,1]`. The objective is certain
/// and each `u_i` touches column `i` only.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnwiseLp {
    cost: Vec<f64>,
    /// `columns[i]` is `a0_i`, one entry per row.
    columns: Vec<Vec<f64>>,
    /// `column_loading[i][k]` is row `k` of `A_i`.
    column_loading: Vec<Vec<Vec<f64>>>,
    rhs: Vec<f64>,
    /// Row `k` of `B`.
    rhs_loading: Vec<Vec<f64>>,
}

impl ColumnwiseLp {
    pub fn new(
        cost: Vec<f64>,
        columns: Vec<Vec<f64>>,
        column_loading: Vec<Vec<Vec<f64>>>,
        rhs: Vec<f64>,
        rhs_loading: Vec<Vec<f64>>,
    ) -> std::result::Result<Self, ColumnwiseClause> {
        let (n, m) = (cost.len(), rhs.len());
        if columns.len() != n || column_loading.len() != n || rhs_loading.len() != m {
            return Err(ColumnwiseClause::ColumnStructure);
        }
        if columns.iter().any(|c| c.len() != m) || column_loading.iter().any(|a| a.len() != m) {
            return Err(ColumnwiseClause::RowCount);
        }
        for a in &column_loading {
            let q = a.first().map_or(0, Vec::len);
            if a.iter().any(|r| r.len() != q) {
                return Err(ColumnwiseClause::ColumnStructure);
            }
        }
        let qb = rhs_loading.first().map_or(0, Vec::len);
        if rhs_loading.iter().any(|r| r.len() != qb) {
            return Err(ColumnwiseClause::ColumnStructure);
        }
        let finite = cost.iter().chain(&rhs).all(|v| v.is_finite())
            && columns.iter().flatten().all(|v| v.is_finite())
            && column_loading.iter().flatten().flatten().all(|v| v.is_finite())
            && rhs_loading.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(ColumnwiseClause::NonFinite);
        }
        Ok(ColumnwiseLp { cost, columns, column_loading, rhs, rhs_loading })
    }

    pub fn dimension(&self) -> usize {
        self.cost.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    /// Widths of the column blocks followed by the right-hand-side block.
    pub fn block_widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.column_loading.iter().map(|a| a.first().map_or(0, Vec::len)).collect();
        w.push(self.rhs_loading.first().map_or(0, Vec::len));
        w
    }

    /// Nominal LP with every block fixed at `u`; `u[i]` for column `i`,
    /// `u[n]` for the right-hand side.
    pub fn realized_optimum(&self, u: &[Vec<f64>]) -> Result<Option<f64>> {
        let (n, m) = (self.dimension(), self.rows());
        let mut model = Model::new(Direction::Minimize);
        let y: Vec<Var> = (0..n).map(|i| model.add_continuous(format!("y{i}"), 0.0, f64::INFINITY)).collect();
        for k in 0..m {
            let mut e = LinExpr::new();
            for i in 0..n {
                let a = self.columns[i][k] + dot(&self.column_loading[i][k], &u[i]);
                e.add_term(y[i], a);
            }
            let b = self.rhs[k] + dot(&self.rhs_loading[k], &u[n]);
            model.constrain(e, Sense::Le, b, format!("row{k}"));
        }
        model.set_objective(LinExpr::from_terms(y.iter().copied().zip(self.cost.iter().copied())));
        let r = solve_lp(&model)?;
        Ok(match r.status {
            LpStatus::Optimal => Some(r.objective),
            LpStatus::Infeasible => None,
            LpStatus::Unbounded => Some(f64::NEG_INFINITY),
            LpStatus::IterationLimit => return Err(Error::ResourceExhausted("realized LP".into())),
        })
    }
}

/// Regret of `x` through the dual of the optimistic counterpart:
/// `rho >= c0^T x - b0^T z + tau` with `z <= 0`, `tau >= ||B^T z||_1` and
/// `c0_i - a0_i^T z >= ||A_i^T z||_1` for every column.
pub fn regret_columnwise_block(p: &ColumnwiseLp, model: &mut Model<f64>, x: &[Var]) -> Result<LinExpr<f64>> {
    if x.len() != p.dimension() {
        return Err(Error::InvalidInput("one decision variable per column is required".into()));
    }
    let m = p.rows();
    let z: Vec<Var> = (0..m).map(|k| model.add_continuous(format!("cw_z{k}"), f64::NEG_INFINITY, 0.0)).collect();
    let qb = p.rhs_loading.first().map_or(0, Vec::len);
    let b_rows: Vec<LinExpr<f64>> = (0..qb)
        .map(|j| LinExpr::from_terms((0..m).map(|k| (z[k], p.rhs_loading[k][j]))))
        .collect();
    let tau = add_l1_epigraph(model, &b_rows, "cw_tau");
    for i in 0..p.dimension() {
        let q = p.column_loading[i].first().map_or(0, Vec::len);
        let a_rows: Vec<LinExpr<f64>> = (0..q)
            .map(|j| LinExpr::from_terms((0..m).map(|k| (z[k], p.column_loading[i][k][j]))))
            .collect();
        let t = add_l1_epigraph(model, &a_rows, &format!("cw_col{i}"));
        // c0_i - a0_i^T z - t >= 0
        let mut e = LinExpr::from_terms((0..m).map(|k| (z[k], -p.columns[i][k])));
        e.add_term(t, -1.0);
        model.constrain(e, Sense::Ge, -p.cost[i], format!("cw_cone{i}"));
    }
    let mut rho = LinExpr::from_terms(x.iter().copied().zip(p.cost.iter().copied()));
    for k in 0..m {
        rho.add_term(z[k], -p.rhs[k]);
    }
    rho.add_term(tau, 1.0);
    Ok(rho)
}

/// Minimum of the column-wise block for a fixed `x`.
pub fn regret_columnwise_value(p: &ColumnwiseLp, x: &[f64]) -> Result<f64> {
    let mut model = Model::new(Direction::Minimize);
    let xv: Vec<Var> = x.iter().enumerate().map(|(i, &v)| model.add_continuous(format!("x{i}"), v, v)).collect();
    let rho = regret_columnwise_block(p, &mut model, &xv)?;
    model.set_objective(rho);
    let r = solve_lp(&model)?;
    match r.status {
        LpStatus::Optimal => Ok(r.objective),
        LpStatus::Unbounded => Err(Error::Unbounded("column-wise dual; the optimistic problem is infeasible".into())),
        LpStatus::Infeasible => Err(Error::Infeasible("column-wise dual".into())),
        LpStatus::IterationLimit => Err(Error::ResourceExhausted("column-wise dual".into())),
    }
}

/// Evaluates a preference of an [`EndogenousProblem`] by its model block,
/// for callers holding only the trait object.
pub fn preference_value(p: &EndogenousProblem, x: &[f64], s: usize, pref: PreferenceKind) -> Result<f64> {
    p.preference(x, s, pref)
}
