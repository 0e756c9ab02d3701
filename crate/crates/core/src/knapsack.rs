//! Knapsack with budgeted weight uncertainty whose deviation vector is
//! chosen among regimes.
//!
//! Item weights are `a0_i + dev_i u_i` with `u` in `{u in [0,1]^n : sum u =
//! budget}`. Utilities are certain, so every preference here measures
//! resource consumption except regret, which compares utilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::milp::{add_mccormick, solve_lp, Constraint, Direction, LinExpr, LpStatus, Model, Sense, Var};
use crate::preferences::{PreferenceKind, RegretMode};
use crate::robust::{
    solve_rc, tol, BuildCtx, EndogenousRc, LazyCut, Layout, RegimeSelection, RobustFormulation, RoptMethod,
    Selection,
};

#[derive(Clone, Debug, PartialEq)]
pub struct KnapsackInstance {
    label: String,
    utility: Vec<f64>,
    weight: Vec<f64>,
    /// One deviation vector per regime.
    deviation: Vec<Vec<f64>>,
    capacity: f64,
    budget: usize,
    activation: Vec<f64>,
}

impl KnapsackInstance {
    pub fn new(
        label: impl Into<String>,
        utility: Vec<f64>,
        weight: Vec<f64>,
        deviation: Vec<Vec<f64>>,
        capacity: f64,
        budget: usize,
        activation: Vec<f64>,
    ) -> Result<Self> {
        let n = utility.len();
        if weight.len() != n || deviation.iter().any(|d| d.len() != n) {
            return Err(Error::InvalidInput(format!("utilities, weights, and deviations must all have {n} entries")));
        }
        if deviation.is_empty() {
            return Err(Error::InvalidInput("at least one regime is required".into()));
        }
        if activation.len() != deviation.len() {
            return Err(Error::InvalidInput("one activation cost per regime is required".into()));
        }
        let all = utility.iter().chain(&weight).chain(deviation.iter().flatten());
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("utilities, weights, and deviations must be finite and nonnegative".into()));
        }
        if !(capacity > 0.0) || !capacity.is_finite() {
            return Err(Error::InvalidInput(format!("capacity must be positive, got {capacity}")));
        }
        if budget > n {
            return Err(Error::InvalidInput(format!("budget {budget} exceeds {n} items")));
        }
        if activation.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("activation costs must be finite".into()));
        }
        Ok(KnapsackInstance { label: label.into(), utility, weight, deviation, capacity, budget, activation })
    }

    pub fn items(&self) -> usize {
        self.utility.len()
    }

    pub fn utility(&self) -> &[f64] {
        &self.utility
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn deviation(&self, s: usize) -> &[f64] {
        &self.deviation[s]
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.utility, x)
    }

    /// Deviations `dev_i x_i` sorted in decreasing order.
    fn sorted_load(&self, x: &[f64], s: usize) -> Vec<f64> {
        let mut d: Vec<f64> = self.deviation[s].iter().zip(x).map(|(a, x)| a * x).collect();
        d.sort_by(|a, b| b.total_cmp(a));
        d
    }

    /// Largest possible weight of `x` under regime `s`.
    pub fn worst_weight(&self, x: &[f64], s: usize) -> f64 {
        dot(&self.weight, x) + self.sorted_load(x, s).iter().take(self.budget).sum::<f64>()
    }

    /// Smallest possible weight; the budget must be spent, so it lands on
    /// the smallest deviations.
    pub fn best_weight(&self, x: &[f64], s: usize) -> f64 {
        dot(&self.weight, x) + self.sorted_load(x, s).iter().rev().take(self.budget).sum::<f64>()
    }

    pub fn is_robust_feasible(&self, x: &[f64], s: usize) -> bool {
        self.worst_weight(x, s) <= self.capacity + 1e-9 * self.capacity.max(1.0)
    }

    /// Caps on the capacity price in the regret dual.
    pub fn mu_bounds(&self) -> Result<MuBounds> {
        let mut density = 0.0_f64;
        for (i, (&c, &a)) in self.utility.iter().zip(&self.weight).enumerate() {
            if a <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "item {i} has zero nominal weight, the capacity price is unbounded"
                )));
            }
            density = density.max(c / a);
        }
        Ok(MuBounds {
            per_regime: vec![density; self.deviation.len()],
            max: density,
            full_budget: self.budget == self.items(),
        })
    }

    /// LP relaxation of the optimistic hindsight problem under regime `s`.
    /// Its optimum minus `c^T x` bounds the regret of `x`.
    pub fn regret_relaxation(&self, s: usize) -> Result<RegretLp> {
        let n = self.items();
        let mut m = Model::new(Direction::Maximize);
        let y: Vec<Var> = (0..n).map(|i| m.add_continuous(format!("y{i}"), 0.0, 1.0)).collect();
        let z: Vec<Var> = (0..n).map(|i| m.add_continuous(format!("z{i}"), 0.0, 1.0)).collect();
        let u: Vec<Var> = (0..n).map(|i| m.add_continuous(format!("u{i}"), 0.0, f64::INFINITY)).collect();
        let mut cap = LinExpr::new();
        for i in 0..n {
            cap.add_term(y[i], self.weight[i]);
            cap.add_term(u[i], self.deviation[s][i]);
        }
        let capacity_row = m.constrain(cap, Sense::Le, self.capacity, "capacity");
        m.constrain(LinExpr::from_terms(z.iter().map(|&v| (v, 1.0))), Sense::Eq, self.budget as f64, "budget");
        for i in 0..n {
            m.constrain(LinExpr::from_terms([(u[i], -1.0), (z[i], 1.0), (y[i], 1.0)]), Sense::Le, 1.0, format!("env{i}"));
            m.constrain(LinExpr::from_terms([(u[i], 1.0), (z[i], -1.0)]), Sense::Le, 0.0, format!("uz{i}"));
            m.constrain(LinExpr::from_terms([(u[i], 1.0), (y[i], -1.0)]), Sense::Le, 0.0, format!("uy{i}"));
        }
        m.set_objective(LinExpr::from_terms(y.iter().copied().zip(self.utility.iter().copied())));
        let r = solve_lp(&m)?;
        match r.status {
            LpStatus::Optimal => Ok(RegretLp { hindsight: r.objective, capacity_price: r.duals[capacity_row.index()] }),
            LpStatus::Infeasible => Err(Error::Infeasible("regret relaxation".into())),
            LpStatus::Unbounded => Err(Error::Unbounded("regret relaxation".into())),
            LpStatus::IterationLimit => Err(Error::ResourceExhausted("regret relaxation".into())),
        }
    }

    /// Weight sum `sum_s dev_s,i r_s x_i` of item `i`.
    fn load(&self, layout: &Layout, i: usize) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for s in layout.active() {
            e.add_scaled(&layout.masked(s, i), self.deviation[s][i]);
        }
        e
    }

    /// Upper and lower dual of the budgeted deviation of `x`, with the
    /// orientation chosen by `upper`.
    fn budget_dual(&self, ctx: &mut BuildCtx, upper: bool, tag: &str) -> LinExpr<f64> {
        let n = self.items();
        let lambda = ctx.model.add_free(format!("{tag}_lambda"));
        let mut value = LinExpr::term(lambda, self.budget as f64);
        for i in 0..n {
            let (lo, hi) = if upper { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
            let delta = ctx.model.add_continuous(format!("{tag}_delta{i}"), lo, hi);
            value.add_term(delta, 1.0);
            let mut row = LinExpr::from_terms([(lambda, 1.0), (delta, 1.0)]);
            row -= &self.load(&ctx.layout, i);
            let sense = if upper { Sense::Ge } else { Sense::Le };
            ctx.model.constrain(row, sense, 0.0, format!("{tag}_row{i}"));
        }
        value
    }

    fn predictability_block(&self, ctx: &mut BuildCtx) -> LinExpr<f64> {
        let mut e = self.budget_dual(ctx, true, "pred_hi");
        e -= &self.budget_dual(ctx, false, "pred_lo");
        e
    }

    /// Negated slack `a0^T x + sum dev_i u_i x_i - b` with the model choosing
    /// `u`; the products are exact because `r` and `x` are binary.
    fn bestcase_block(&self, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
        let n = self.items();
        let u: Vec<Var> = (0..n).map(|i| ctx.model.add_continuous(format!("best_u{i}"), 0.0, 1.0)).collect();
        ctx.model.constrain(LinExpr::from_terms(u.iter().map(|&v| (v, 1.0))), Sense::Eq, self.budget as f64, "best_budget");
        let mut e = LinExpr::constant(-self.capacity);
        for i in 0..n {
            e.add_term(ctx.layout.x[i], self.weight[i]);
            let v = add_mccormick(&mut ctx.model, ctx.layout.x[i], u[i])?;
            for s in ctx.layout.active() {
                let w = ctx.gate(s, v)?;
                e.add_scaled(&w, self.deviation[s][i]);
            }
        }
        Ok(e)
    }

    /// Dual of [`Self::regret_relaxation`] with the regime-dependent product
    /// `dev_s mu` carried by `w_j = r_j mu`.
    fn regret_block(&self, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
        let n = self.items();
        let caps = self.mu_bounds()?;
        let mu = ctx.model.add_continuous("rg_mu", 0.0, caps.max);
        let lambda = ctx.model.add_free("rg_lambda");
        let mut w: Vec<LinExpr<f64>> = vec![LinExpr::new(); self.deviation.len()];
        match ctx.layout.selection.clone() {
            RegimeSelection::Fixed(s) => w[s] = LinExpr::term(mu, 1.0),
            RegimeSelection::OneHot(r) => {
                for (j, &rj) in r.iter().enumerate() {
                    let wj = ctx.model.add_continuous(format!("rg_w{j}"), 0.0, caps.max);
                    let m = &mut ctx.model;
                    m.constrain(LinExpr::from_terms([(wj, 1.0), (rj, -caps.per_regime[j])]), Sense::Le, 0.0, format!("rg_wr{j}"));
                    m.constrain(LinExpr::from_terms([(wj, 1.0), (mu, -1.0)]), Sense::Le, 0.0, format!("rg_wmu{j}"));
                    m.constrain(
                        LinExpr::from_terms([(wj, 1.0), (mu, -1.0), (rj, -caps.max)]),
                        Sense::Ge,
                        -caps.max,
                        format!("rg_wlo{j}"),
                    );
                    w[j] = LinExpr::term(wj, 1.0);
                }
            }
        }
        let mut value = LinExpr::from_terms([(mu, self.capacity), (lambda, self.budget as f64)]);
        for i in 0..n {
            let v = |m: &mut Model<f64>, name: String| m.add_continuous(name, 0.0, f64::INFINITY);
            let alpha = v(&mut ctx.model, format!("rg_alpha{i}"));
            let beta = v(&mut ctx.model, format!("rg_beta{i}"));
            let gamma = v(&mut ctx.model, format!("rg_gamma{i}"));
            let t = v(&mut ctx.model, format!("rg_t{i}"));
            let sl = v(&mut ctx.model, format!("rg_s{i}"));
            value.add_term(gamma, 1.0);
            value.add_term(t, 1.0);
            value.add_term(sl, 1.0);
            // Column of y_i.
            let row = LinExpr::from_terms([(mu, self.weight[i]), (beta, -1.0), (gamma, 1.0), (t, 1.0)]);
            ctx.model.constrain(row, Sense::Ge, self.utility[i], format!("rg_y{i}"));
            // Column of u_i.
            let mut row = LinExpr::from_terms([(alpha, 1.0), (beta, 1.0), (gamma, -1.0)]);
            for (j, wj) in w.iter().enumerate() {
                row.add_scaled(wj, self.deviation[j][i]);
            }
            ctx.model.constrain(row, Sense::Ge, 0.0, format!("rg_u{i}"));
            // Column of z_i.
            let row = LinExpr::from_terms([(lambda, 1.0), (alpha, -1.0), (gamma, 1.0), (sl, 1.0)]);
            ctx.model.constrain(row, Sense::Ge, 0.0, format!("rg_z{i}"));
        }
        for (i, &c) in self.utility.iter().enumerate() {
            value.add_term(ctx.layout.x[i], -c);
        }
        Ok(value)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Caps on the capacity price of the regret dual.
#[derive(Clone, Debug, PartialEq)]
pub struct MuBounds {
    pub per_regime: Vec<f64>,
    pub max: f64,
    /// The budget covers every item. The cap is still valid as the best
    /// utility density but no longer attained in general.
    pub full_budget: bool,
}

/// Optimum of the relaxed hindsight problem and the capacity price at the
/// returned vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretLp {
    pub hindsight: f64,
    pub capacity_price: f64,
}

impl RobustFormulation for KnapsackInstance {
    fn label(&self) -> &str {
        &self.label
    }

    fn regime_count(&self) -> usize {
        self.deviation.len()
    }

    fn activation_cost(&self, s: usize) -> f64 {
        self.activation[s]
    }

    fn dimension(&self) -> usize {
        self.items()
    }

    fn orientation(&self) -> f64 {
        -1.0
    }

    fn lp_exact(&self) -> bool {
        false
    }

    /// Items plus the dualized budget row `a0^T x + budget lambda + sum delta
    /// <= b`, `delta_i + lambda >= dev_i x_i`.
    fn build(&self, selection: Selection, relax: bool) -> Result<BuildCtx> {
        let n = self.items();
        let mut model = Model::new(Direction::Minimize);
        let x: Vec<Var> = (0..n)
            .map(|i| if relax { model.add_continuous(format!("x{i}"), 0.0, 1.0) } else { model.add_binary(format!("x{i}")) })
            .collect();
        let mut ctx = BuildCtx::new(model, x, self.regime_count(), selection)?;
        let lambda = ctx.model.add_free("rc_lambda");
        let mut cap = LinExpr::term(lambda, self.budget as f64);
        for i in 0..n {
            cap.add_term(ctx.layout.x[i], self.weight[i]);
            let delta = ctx.model.add_continuous(format!("rc_delta{i}"), 0.0, f64::INFINITY);
            cap.add_term(delta, 1.0);
            let mut row = LinExpr::from_terms([(delta, 1.0), (lambda, 1.0)]);
            row -= &self.load(&ctx.layout, i);
            ctx.model.constrain(row, Sense::Ge, 0.0, format!("rc_dev{i}"));
        }
        ctx.model.constrain(cap, Sense::Le, self.capacity, "rc_capacity");
        Ok(ctx)
    }

    fn worst_case_expr(&self, ctx: &mut BuildCtx) -> Result<LinExpr<f64>> {
        Ok(LinExpr::from_terms(ctx.layout.x.iter().copied().zip(self.utility.iter().map(|c| -c))))
    }

    fn preference_expr(&self, ctx: &mut BuildCtx, pref: PreferenceKind) -> Result<LinExpr<f64>> {
        match pref {
            PreferenceKind::Predictability => Ok(self.predictability_block(ctx)),
            PreferenceKind::BestCase => self.bestcase_block(ctx),
            PreferenceKind::Regret(RegretMode::RltBound) => self.regret_block(ctx),
            PreferenceKind::Regret(mode) => {
                Err(Error::Unsupported(format!("knapsack regret is modeled by its bound, not {mode:?}")))
            }
        }
    }

    fn default_ropt(&self) -> RoptMethod {
        RoptMethod::BigM { bounds: None }
    }

    fn ropt_block<'a>(
        &'a self,
        ctx: &mut BuildCtx,
        method: &RoptMethod,
        rc: &EndogenousRc,
    ) -> Result<Option<LazyCut<'a>>> {
        let phi = rc.phi.clone();
        match method {
            RoptMethod::BigM { bounds } => {
                let m: Vec<f64> = match bounds {
                    Some(m) => m.clone(),
                    None => phi.iter().map(|p| p.unwrap_or(0.0)).collect(),
                };
                if m.len() != phi.len() {
                    return Err(Error::InvalidInput(format!("{} big-M values for {} regimes", m.len(), phi.len())));
                }
                let phi_min = phi.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
                let w = self.worst_case_expr(ctx)?;
                for (j, p) in phi.iter().enumerate() {
                    let Some(p) = p else { continue };
                    if m[j] < p - phi_min - tol(*p) {
                        return Err(Error::InvalidInput(format!(
                            "big-M for regime {j} is {} but must be at least {}",
                            m[j],
                            p - phi_min
                        )));
                    }
                    // -c^T x <= -phi_j + (1 - r_j) M_j
                    let mut row = w.clone();
                    row.add_scaled(&ctx.layout.indicator(j), m[j]);
                    ctx.model.add_constraint(Constraint::new(row, Sense::Le, m[j] - p, format!("bigm{j}")))?;
                }
                Ok(None)
            }
            RoptMethod::Lazy => {
                let layout = ctx.layout.clone();
                Ok(Some(Box::new(move |values: &[f64]| {
                    let s = layout.regime_of(values);
                    let x: Vec<f64> = layout.decisions(values).iter().map(|v| v.round()).collect();
                    let Some(p) = phi[s] else { return Vec::new() };
                    if self.value(&x) >= p - tol(p) {
                        return Vec::new();
                    }
                    let mut row = layout.masked_dot(s, &self.utility);
                    row.add_scaled(&layout.indicator(s), -p);
                    vec![Constraint::new(row, Sense::Ge, 0.0, format!("lazy_r{s}"))]
                })))
            }
            RoptMethod::Duality | RoptMethod::Incumbent { .. } => Err(Error::Unsupported(format!(
                "{} is not available for uncertain constraints; use bigm or lazy",
                method.name()
            ))),
        }
    }

    fn worst_case(&self, x: &[f64], _s: usize) -> Result<f64> {
        Ok(self.value(x))
    }

    fn preference(&self, x: &[f64], s: usize, pref: PreferenceKind) -> Result<f64> {
        match pref {
            PreferenceKind::Predictability => Ok(self.worst_weight(x, s) - self.best_weight(x, s)),
            PreferenceKind::BestCase => Ok(self.capacity - self.best_weight(x, s)),
            PreferenceKind::Regret(RegretMode::RltBound) => {
                Ok(self.regret_relaxation(s)?.hindsight - self.value(x))
            }
            PreferenceKind::Regret(mode) => {
                Err(Error::Unsupported(format!("knapsack regret is modeled by its bound, not {mode:?}")))
            }
        }
    }

    fn preference_orientation(&self, pref: PreferenceKind) -> f64 {
        match pref {
            PreferenceKind::BestCase => -1.0,
            _ => 1.0,
        }
    }
}

/// Robust optimum of one regime: `(phi_s, x)`.
pub fn knapsack_rc(instance: &KnapsackInstance, s: usize) -> Result<(f64, Vec<f64>)> {
    let rc = solve_rc(instance, s)?;
    Ok((rc.value, rc.x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnapsackParams {
    pub items: usize,
    pub budget: usize,
    pub capacity: f64,
    pub regimes: usize,
}

impl Default for KnapsackParams {
    fn default() -> Self {
        KnapsackParams { items: 100, budget: 10, capacity: 12.0, regimes: 10 }
    }
}

/// Utilities and weights in `[1, 2]`, deviations in `[1, 5]`, no activation
/// costs. Draw order: utilities, weights, then deviations regime by regime.
pub fn generate_knapsack_instance(params: &KnapsackParams, seed: u64) -> Result<KnapsackInstance> {
    if params.items == 0 || params.regimes == 0 {
        return Err(Error::InvalidInput("need at least one item and one regime".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.items;
    let utility: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..=2.0)).collect();
    let weight: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..=2.0)).collect();
    let deviation: Vec<Vec<f64>> =
        (0..params.regimes).map(|_| (0..n).map(|_| rng.gen_range(1.0..=5.0)).collect()).collect();
    KnapsackInstance::new(
        format!("knapsack-n{}-g{}-s{}-seed{seed}", n, params.budget, params.regimes),
        utility,
        weight,
        deviation,
        params.capacity,
        params.budget,
        vec![0.0; params.regimes],
    )
}
