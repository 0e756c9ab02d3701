//! Endogenous robust counterparts, the robustly optimal set, and the
//! epsilon-constraint and bilevel models built on top of them.

mod ctx;
mod inner;
mod problem;
mod ropt;

use std::time::Instant;

pub use ctx::{BuildCtx, Encoding, Layout, RegimeSelection, Selection};
pub(crate) use inner::InnerLp;
pub use problem::{CertainRow, EndogenousProblem};
pub use ropt::default_big_m;

use crate::error::{Error, Result};
use crate::milp::{
    solve_lp, solve_milp_with, Constraint, LinExpr, LpStatus, MilpOptions, MilpStatus, Model, Sense,
};
use crate::preferences::PreferenceKind;

/// Way of restricting the follower to robustly optimal solutions.
#[derive(Clone, Debug, PartialEq)]
pub enum RoptMethod {
    /// Zero duality gap against an LP robust counterpart.
    Duality,
    /// `W <= phi_j + (1 - r_j) M_j`; default bounds when `None`.
    BigM { bounds: Option<Vec<f64>> },
    /// `W <= worst-case of anchor z_j` under the selected regime; anchors
    /// default to the robust optima found per regime.
    Incumbent { anchors: Option<Vec<Vec<f64>>> },
    /// Worst-case violations separated on integral candidates.
    Lazy,
}

impl RoptMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RoptMethod::Duality => "duality",
            RoptMethod::BigM { .. } => "bigm",
            RoptMethod::Incumbent { .. } => "incumbent",
            RoptMethod::Lazy => "lazy",
        }
    }
}

pub type LazyCut<'a> = Box<dyn FnMut(&[f64]) -> Vec<Constraint<f64>> + 'a>;

/// A problem family the generic solvers can work on.
///
/// Expressions returned by builders are in canonical (minimized) units; the
/// direct evaluations are in the problem's natural units.
pub trait RobustFormulation {
    fn label(&self) -> &str;
    fn regime_count(&self) -> usize;
    fn activation_cost(&self, s: usize) -> f64;
    fn dimension(&self) -> usize;
    /// `1.0` when the natural objective is minimized, `-1.0` when maximized.
    fn orientation(&self) -> f64;
    /// Whether a fixed-regime robust counterpart may be solved as an LP.
    fn lp_exact(&self) -> bool;
    /// Decisions, regime selection, and regime-dependent feasibility.
    fn build(&self, selection: Selection, relax: bool) -> Result<BuildCtx>;
    fn worst_case_expr(&self, ctx: &mut BuildCtx) -> Result<LinExpr<f64>>;
    fn preference_expr(&self, ctx: &mut BuildCtx, pref: PreferenceKind) -> Result<LinExpr<f64>>;
    fn default_ropt(&self) -> RoptMethod;
    fn ropt_block<'a>(
        &'a self,
        ctx: &mut BuildCtx,
        method: &RoptMethod,
        rc: &EndogenousRc,
    ) -> Result<Option<LazyCut<'a>>>;
    fn worst_case(&self, x: &[f64], s: usize) -> Result<f64>;
    /// The preference as modeled (a bound where the model uses one).
    fn preference(&self, x: &[f64], s: usize, pref: PreferenceKind) -> Result<f64>;
    /// Sign taking the natural preference value to its minimized form.
    fn preference_orientation(&self, pref: PreferenceKind) -> f64;
}

#[derive(Clone, Debug, PartialEq)]
pub struct RcSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

/// Robust optimum of every regime.
#[derive(Clone, Debug, PartialEq)]
pub struct EndogenousRc {
    /// `phi_s` in natural units, `None` for regimes without an optimum.
    pub phi: Vec<Option<f64>>,
    pub anchors: Vec<Option<Vec<f64>>>,
    pub best: usize,
    /// `phi` of the best regime, gross of its activation cost.
    pub phi_star: f64,
    /// Minimized merit `gamma_s + phi_s` (with `phi_s` negated for
    /// maximization problems).
    pub value: f64,
}

impl EndogenousRc {
    pub fn canonical_phi(&self, orientation: f64) -> Vec<Option<f64>> {
        self.phi.iter().map(|p| p.map(|v| orientation * v)).collect()
    }
}

pub fn solve_rc<P: RobustFormulation + ?Sized>(problem: &P, s: usize) -> Result<RcSolution> {
    if s >= problem.regime_count() {
        return Err(Error::InvalidInput(format!("regime {s} does not exist")));
    }
    let mut ctx = problem.build(Selection::Fixed(s), problem.lp_exact())?;
    let w = problem.worst_case_expr(&mut ctx)?;
    ctx.model.set_objective(w);
    let values = minimize(&ctx.model, None, &MilpOptions::default(), &format!("robust counterpart of regime {s}"))?.0;
    let x = ctx.layout.decisions(&values);
    Ok(RcSolution { value: problem.worst_case(&x, s)?, x })
}

pub fn solve_endogenous_rc<P: RobustFormulation + ?Sized>(problem: &P) -> Result<EndogenousRc> {
    let mut phi = Vec::new();
    let mut anchors = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for s in 0..problem.regime_count() {
        match solve_rc(problem, s) {
            Ok(rc) => {
                let merit = problem.activation_cost(s) + problem.orientation() * rc.value;
                if best.map_or(true, |(_, b)| merit < b - tol(b)) {
                    best = Some((s, merit));
                }
                phi.push(Some(rc.value));
                anchors.push(Some(rc.x));
            }
            Err(Error::Infeasible(_)) | Err(Error::Unbounded(_)) => {
                phi.push(None);
                anchors.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let (best, value) = best.ok_or_else(|| Error::Infeasible("no regime attains a robust optimum".into()))?;
    Ok(EndogenousRc { phi_star: phi[best].unwrap_or(f64::NAN), phi, anchors, best, value })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Epsilon {
    pub value: f64,
    /// Interpret `value` as a fraction of `|phi*|`.
    pub relative: bool,
}

impl Epsilon {
    pub fn relative(value: f64) -> Self {
        Epsilon { value, relative: true }
    }

    pub fn absolute(value: f64) -> Self {
        Epsilon { value, relative: false }
    }

    pub fn slack(&self, phi_star: f64) -> f64 {
        if self.relative {
            self.value * phi_star.abs()
        } else {
            self.value
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Epsilon(Epsilon),
    Bilevel { alpha: f64 },
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub encoding: Encoding,
    /// `None` picks the problem's default method.
    pub ropt: Option<RoptMethod>,
    /// Resolve ties by worst case and then regime index through extra solves.
    pub tie_break: bool,
    pub milp: MilpOptions,
    /// Reuse of already computed robust optima.
    pub rc: Option<EndogenousRc>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { encoding: Encoding::OneHot, ropt: None, tie_break: true, milp: MilpOptions::default(), rc: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutput {
    pub x: Vec<f64>,
    pub regime: usize,
    /// Natural units.
    pub worst_case: f64,
    /// Weighted sum of the natural preference values.
    pub preference_value: f64,
    pub preference_values: Vec<f64>,
    pub activation_cost: f64,
    /// Minimized merit: `gamma_s + alpha * W + sum_k w_k M_k` in canonical
    /// units (the worst-case term only in bilevel mode).
    pub total_objective: f64,
    pub wall_time: f64,
    pub cuts_added: usize,
    pub nodes: usize,
    pub method: Option<&'static str>,
}

pub fn solve_epsilon<P: RobustFormulation + ?Sized>(
    problem: &P,
    pref: PreferenceKind,
    eps: Epsilon,
    opts: &SolveOptions,
) -> Result<SolveOutput> {
    solve_weighted(problem, Mode::Epsilon(eps), &[(pref, 1.0)], opts)
}

pub fn solve_bilevel<P: RobustFormulation + ?Sized>(
    problem: &P,
    pref: PreferenceKind,
    alpha: f64,
    opts: &SolveOptions,
) -> Result<SolveOutput> {
    solve_weighted(problem, Mode::Bilevel { alpha }, &[(pref, 1.0)], opts)
}

struct Candidate {
    values: Vec<f64>,
    layout: Layout,
    nodes: usize,
    cuts: usize,
}

/// Epsilon-constraint or bilevel model with a weighted sum of preferences.
pub fn solve_weighted<P: RobustFormulation + ?Sized>(
    problem: &P,
    mode: Mode,
    terms: &[(PreferenceKind, f64)],
    opts: &SolveOptions,
) -> Result<SolveOutput> {
    let start = Instant::now();
    if let Mode::Bilevel { alpha } = mode {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be nonnegative, got {alpha}")));
        }
    }
    if let Mode::Epsilon(eps) = mode {
        if !(eps.value >= 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be nonnegative, got {}", eps.value)));
        }
    }
    if terms.iter().any(|(_, w)| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("preference weights must be nonnegative".into()));
    }
    let rc = match &opts.rc {
        Some(rc) => rc.clone(),
        None => solve_endogenous_rc(problem)?,
    };
    let method = match mode {
        Mode::Bilevel { .. } => Some(opts.ropt.clone().unwrap_or_else(|| problem.default_ropt())),
        Mode::Epsilon(_) => None,
    };
    let feasible: Vec<usize> = (0..problem.regime_count()).filter(|&s| rc.phi[s].is_some()).collect();

    let mut candidates = Vec::new();
    match opts.encoding {
        Encoding::OneHot => {
            candidates.push(solve_one(problem, Selection::OneHot, mode, terms, method.as_ref(), &rc, opts)?);
        }
        Encoding::Enumerated => {
            for &s in &feasible {
                match solve_one(problem, Selection::Fixed(s), mode, terms, method.as_ref(), &rc, opts) {
                    Ok(c) => candidates.push(c),
                    Err(Error::Infeasible(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let mut best: Option<(SolveOutput, f64)> = None;
    let (mut nodes, mut cuts) = (0, 0);
    for c in candidates {
        nodes += c.nodes;
        cuts += c.cuts;
        let s = c.layout.regime_of(&c.values);
        let x: Vec<f64> = c.layout.decisions(&c.values).iter().map(|v| snap(*v)).collect();
        let out = evaluate(problem, &x, s, mode, terms)?;
        let w = problem.orientation() * out.worst_case;
        let better = match &best {
            None => true,
            Some((b, bw)) => prefer((out.total_objective, w, s), (b.total_objective, *bw, b.regime)),
        };
        if better {
            best = Some((out, w));
        }
    }
    let (mut out, _) = best.ok_or_else(|| Error::Infeasible("no regime admits a feasible solution".into()))?;
    out.wall_time = start.elapsed().as_secs_f64();
    out.nodes = nodes;
    out.cuts_added = cuts;
    out.method = method.as_ref().map(RoptMethod::name);
    Ok(out)
}

/// Lexicographic comparison of (total, worst case, regime) with tolerances
/// on the real-valued keys.
pub fn prefer(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    if a.0 < b.0 - tol(b.0) {
        return true;
    }
    if a.0 > b.0 + tol(b.0) {
        return false;
    }
    if a.1 < b.1 - tol(b.1) {
        return true;
    }
    if a.1 > b.1 + tol(b.1) {
        return false;
    }
    a.2 < b.2
}

pub fn tol(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-6 {
        r
    } else {
        v
    }
}

/// Direct evaluation of a solution, in the units of [`SolveOutput`].
pub fn evaluate<P: RobustFormulation + ?Sized>(
    problem: &P,
    x: &[f64],
    s: usize,
    mode: Mode,
    terms: &[(PreferenceKind, f64)],
) -> Result<SolveOutput> {
    let worst = problem.worst_case(x, s)?;
    let gamma = problem.activation_cost(s);
    let mut total = gamma;
    if let Mode::Bilevel { alpha } = mode {
        total += alpha * problem.orientation() * worst;
    }
    let mut values = Vec::with_capacity(terms.len());
    let mut weighted = 0.0;
    for &(pref, w) in terms {
        let v = if w == 0.0 { 0.0 } else { problem.preference(x, s, pref)? };
        values.push(v);
        weighted += w * v;
        total += w * problem.preference_orientation(pref) * v;
    }
    Ok(SolveOutput {
        x: x.to_vec(),
        regime: s,
        worst_case: worst,
        preference_value: weighted,
        preference_values: values,
        activation_cost: gamma,
        total_objective: total,
        wall_time: 0.0,
        cuts_added: 0,
        nodes: 0,
        method: None,
    })
}

fn solve_one<P: RobustFormulation + ?Sized>(
    problem: &P,
    selection: Selection,
    mode: Mode,
    terms: &[(PreferenceKind, f64)],
    method: Option<&RoptMethod>,
    rc: &EndogenousRc,
    opts: &SolveOptions,
) -> Result<Candidate> {
    let mut ctx = problem.build(selection, false)?;
    let orientation = problem.orientation();
    for s in 0..problem.regime_count() {
        if rc.phi[s].is_none() {
            ctx.exclude(s);
        }
    }
    let worst = problem.worst_case_expr(&mut ctx)?;
    let mut objective = ctx.layout.regime_scalar(|s| problem.activation_cost(s));
    for &(pref, w) in terms {
        if w != 0.0 {
            let e = problem.preference_expr(&mut ctx, pref)?;
            objective.add_scaled(&e, w);
        }
    }
    let mut lazy = None;
    match mode {
        Mode::Epsilon(eps) => {
            let bound = orientation * rc.phi_star + eps.slack(rc.phi_star);
            ctx.model.add_constraint(Constraint::new(worst.clone(), Sense::Le, bound, "epsilon"))?;
        }
        Mode::Bilevel { alpha } => {
            if alpha != 0.0 {
                objective.add_scaled(&worst, alpha);
            }
            let method = method.expect("bilevel mode carries a method");
            lazy = problem.ropt_block(&mut ctx, method, rc)?;
        }
    }
    ctx.model.set_objective(objective.clone());
    let (values, nodes, cuts) = minimize(&ctx.model, lazy.as_deref_mut(), &opts.milp, problem.label())?;
    let mut cand = Candidate { values, layout: ctx.layout.clone(), nodes, cuts };
    if !opts.tie_break {
        return Ok(cand);
    }

    // Staged re-solves: keep the optimum, then minimize the worst case, then
    // the regime index.
    let v = objective.eval(&cand.values);
    ctx.model.add_constraint(Constraint::new(objective, Sense::Le, v + tol(v), "tie_total"))?;
    ctx.model.set_objective(worst.clone());
    let (values, n2, c2) = minimize(&ctx.model, lazy.as_deref_mut(), &opts.milp, problem.label())?;
    cand.nodes += n2;
    cand.cuts += c2;
    cand.values = values;
    if let RegimeSelection::OneHot(_) = ctx.layout.selection {
        let w = worst.eval(&cand.values);
        ctx.model.add_constraint(Constraint::new(worst, Sense::Le, w + tol(w), "tie_worst"))?;
        let index = ctx.layout.regime_scalar(|s| s as f64);
        ctx.model.set_objective(index);
        let (values, n3, c3) = minimize(&ctx.model, lazy.as_deref_mut(), &opts.milp, problem.label())?;
        cand.nodes += n3;
        cand.cuts += c3;
        cand.values = values;
    }
    Ok(cand)
}

/// Minimizes `model`, returning the point, node count, and lazy cut count.
pub(crate) fn minimize(
    model: &Model<f64>,
    lazy: Option<&mut (dyn FnMut(&[f64]) -> Vec<Constraint<f64>> + '_)>,
    opts: &MilpOptions,
    what: &str,
) -> Result<(Vec<f64>, usize, usize)> {
    if !model.has_binaries() && lazy.is_none() {
        let r = solve_lp(model)?;
        return match r.status {
            LpStatus::Optimal => Ok((r.primal, 1, 0)),
            LpStatus::Infeasible => Err(Error::Infeasible(what.to_string())),
            LpStatus::Unbounded => Err(Error::Unbounded(what.to_string())),
            LpStatus::IterationLimit => Err(Error::ResourceExhausted(format!("{what}: pivot budget"))),
        };
    }
    let r = solve_milp_with(model, lazy, *opts);
    match r.status {
        MilpStatus::Optimal => Ok((r.incumbent, r.node_count, r.lazy_cuts_added)),
        MilpStatus::Infeasible => Err(Error::Infeasible(what.to_string())),
        MilpStatus::Unbounded => Err(Error::Unbounded(what.to_string())),
        MilpStatus::ResourceExhausted => Err(Error::ResourceExhausted(format!(
            "{what}: stopped after {} nodes",
            r.node_count
        ))),
    }
}
