//! Dense bounded-variable primal simplex.
//!
//! Every row gets a slack column (`a x + s = b`, with the slack bounds
//! encoding the row sense). Rows whose slack cannot absorb the starting
//! residual get an artificial column and phase one drives those to zero.
//! Pricing is Dantzig's rule with a two-pass (Harris) ratio test. A run of
//! degenerate pivots widens the bounds of the basic columns slightly; if
//! that keeps happening, Bland's rule takes over for the rest of the phase.
//! The basis is refactored from the original rows every few dozen pivots.

use std::rc::Rc;

use super::model::{Direction, Model, ModelError, Sense, VarKind};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget ran out before optimality was proven.
    IterationLimit,
}

/// Outcome of an LP solve.
///
/// Duals and reduced costs follow the sensitivity convention: `duals[i]` is
/// the rate of change of the reported objective per unit increase of the
/// right-hand side of row `i`. For a minimization, `<=` rows therefore have
/// nonpositive duals and `>=` rows nonnegative ones; the signs flip for a
/// maximization.
#[derive(Clone, Debug)]
pub struct LpResult<T> {
    pub status: LpStatus,
    pub primal: Vec<T>,
    pub objective: T,
    pub duals: Vec<T>,
    pub reduced_costs: Vec<T>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    /// Pivot budget; `None` scales with the model size.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots tolerated before switching to Bland.
    pub stall_threshold: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { max_iterations: None, stall_threshold: 50 }
    }
}

/// Solves a purely continuous model.
pub fn solve_lp<T: Scalar>(model: &Model<T>) -> Result<LpResult<T>, ModelError> {
    solve_lp_with(model, LpOptions::default())
}

pub fn solve_lp_with<T: Scalar>(
    model: &Model<T>,
    opts: LpOptions,
) -> Result<LpResult<T>, ModelError> {
    if let Some(spec) = model.variables.iter().find(|s| s.kind == VarKind::Binary) {
        return Err(ModelError::NotContinuous { name: spec.name.clone() });
    }
    let lower: Vec<T> = model.variables.iter().map(|s| s.lower).collect();
    let upper: Vec<T> = model.variables.iter().map(|s| s.upper).collect();
    Ok(solve_relaxation(model, &lower, &upper, opts))
}

/// Final tableau of an optimal solve, reusable after bound changes.
#[derive(Clone)]
pub(crate) struct WarmStart<T>(Tableau<T>);

impl<T> WarmStart<T> {
    /// Dense tableau entries held.
    pub(crate) fn size(&self) -> usize {
        self.0.m * self.0.ncols
    }
}

/// Solves the continuous relaxation of `model` under the given bounds.
pub(crate) fn solve_relaxation<T: Scalar>(
    model: &Model<T>,
    lower: &[T],
    upper: &[T],
    opts: LpOptions,
) -> LpResult<T> {
    solve_cold(model, lower, upper, opts).0
}

/// Re-solves from a previous optimal tableau of the same model after bound
/// changes: dual simplex back to feasibility, then a primal pass. Falls back
/// to a cold solve when the tableau does not fit or the dual pass stalls.
pub(crate) fn resolve<T: Scalar>(
    model: &Model<T>,
    lower: &[T],
    upper: &[T],
    opts: LpOptions,
    warm: &WarmStart<T>,
) -> (LpResult<T>, Option<WarmStart<T>>) {
    let n = model.num_vars();
    let m = model.num_constraints();
    if warm.0.m != m || warm.0.n_struct != n {
        return solve_cold(model, lower, upper, opts);
    }
    if (0..n).any(|j| lower[j] > upper[j] + T::feas_tol()) {
        return (infeasible(n, m), None);
    }
    let mut tab = warm.0.clone();
    tab.set_structural_bounds(lower, upper);
    let budget = opts.max_iterations.unwrap_or(20_000 + 50 * (n + m));
    let mut iterations = 0;
    match tab.dual_run((2 * tab.ncols + 500).min(budget), &mut iterations) {
        DualStep::Feasible => {}
        DualStep::Infeasible => {
            let mut r = infeasible(n, m);
            r.iterations = iterations;
            return (r, None);
        }
        DualStep::Stalled => return solve_cold(model, lower, upper, opts),
    }
    match tab.run(opts.stall_threshold, budget, &mut iterations) {
        Step::Optimal => {
            let r = tab.extract(model, iterations);
            (r, Some(WarmStart(tab)))
        }
        Step::Unbounded | Step::Limit => solve_cold(model, lower, upper, opts),
    }
}

/// Cold solve that also hands back the final tableau when optimal.
pub(crate) fn solve_cold<T: Scalar>(
    model: &Model<T>,
    lower: &[T],
    upper: &[T],
    opts: LpOptions,
) -> (LpResult<T>, Option<WarmStart<T>>) {
    let n = model.num_vars();
    let m = model.num_constraints();
    if (0..n).any(|j| lower[j] > upper[j] + T::feas_tol()) {
        return (infeasible(n, m), None);
    }
    let mut tab = Tableau::build(model, lower, upper);
    let budget = opts.max_iterations.unwrap_or(20_000 + 50 * (n + m));

    let mut iterations = 0;
    if tab.n_art > 0 {
        tab.set_phase_one_costs();
        match tab.run(opts.stall_threshold, budget, &mut iterations) {
            Step::Optimal => {}
            Step::Unbounded => unreachable!("phase one objective is bounded below"),
            Step::Limit => return (limit(n, m, iterations), None),
        }
        let infeas: T = (0..tab.n_art).map(|k| tab.x[tab.art_col(k)]).sum();
        let scale = T::one() + model.constraints.iter().map(|c| c.rhs.abs()).fold(T::zero(), T::max);
        if infeas > T::feas_tol() * scale {
            let mut r = infeasible(n, m);
            r.iterations = iterations;
            return (r, None);
        }
        for k in 0..tab.n_art {
            let c = tab.art_col(k);
            tab.lower[c] = T::zero();
            tab.upper[c] = T::zero();
        }
    }
    tab.set_phase_two_costs(model);
    let outcome = tab.run(opts.stall_threshold, budget, &mut iterations);
    match outcome {
        Step::Limit => (limit(n, m, iterations), None),
        Step::Unbounded => (
            LpResult {
                status: LpStatus::Unbounded,
                primal: tab.x[..n].to_vec(),
                objective: match model.direction {
                    Direction::Minimize => T::neg_infinity(),
                    Direction::Maximize => T::infinity(),
                },
                duals: vec![T::zero(); m],
                reduced_costs: vec![T::zero(); n],
                iterations,
            },
            None,
        ),
        Step::Optimal => {
            let r = tab.extract(model, iterations);
            (r, Some(WarmStart(tab)))
        }
    }
}

fn infeasible<T: Scalar>(n: usize, m: usize) -> LpResult<T> {
    LpResult {
        status: LpStatus::Infeasible,
        primal: vec![T::zero(); n],
        objective: T::nan(),
        duals: vec![T::zero(); m],
        reduced_costs: vec![T::zero(); n],
        iterations: 0,
    }
}

fn limit<T: Scalar>(n: usize, m: usize, iterations: usize) -> LpResult<T> {
    LpResult {
        status: LpStatus::IterationLimit,
        primal: vec![T::zero(); n],
        objective: T::nan(),
        duals: vec![T::zero(); m],
        reduced_costs: vec![T::zero(); n],
        iterations,
    }
}

/// Pivots between refactorizations of the basis.
const REINVERT_EVERY: usize = 100;
/// Pivots after which an apparent optimum is confirmed on a fresh factorization.
const CONFIRM_AFTER: usize = 50;
/// Bound perturbations tried per phase before falling back to Bland.
const PERTURB_ROUNDS: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column resting at zero.
    Free,
}

enum Step {
    Optimal,
    Unbounded,
    Limit,
}

enum DualStep {
    Feasible,
    Infeasible,
    Stalled,
}

#[derive(Clone)]
struct Tableau<T> {
    m: usize,
    ncols: usize,
    n_struct: usize,
    n_art: usize,
    /// Row-major `m x ncols` matrix `B^-1 A`.
    a: Vec<T>,
    /// `B^-1 b`.
    beta: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    cost: Vec<T>,
    d: Vec<T>,
    x: Vec<T>,
    status: Vec<ColStatus>,
    basis: Vec<usize>,
    /// Starting rows (sparse) and right-hand side, kept for reinversion.
    rows0: Rc<[Vec<(usize, T)>]>,
    beta0: Rc<[T]>,
    /// Original bounds of columns widened against degeneracy.
    saved: Vec<(usize, T, T)>,
    /// Pivots since the last refactorization.
    since_factor: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(model: &Model<T>, lower: &[T], upper: &[T]) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();

        let mut x = vec![T::zero(); n + m];
        let mut status = vec![ColStatus::AtLower; n + m];
        let mut lo = Vec::with_capacity(n + 2 * m);
        let mut up = Vec::with_capacity(n + 2 * m);
        for j in 0..n {
            lo.push(lower[j]);
            up.push(upper[j]);
            if lower[j].is_finite() {
                x[j] = lower[j];
                status[j] = ColStatus::AtLower;
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                status[j] = ColStatus::AtUpper;
            } else {
                status[j] = ColStatus::Free;
            }
        }
        for c in &model.constraints {
            let (l, u) = match c.sense {
                Sense::Le => (T::zero(), T::infinity()),
                Sense::Ge => (T::neg_infinity(), T::zero()),
                Sense::Eq => (T::zero(), T::zero()),
            };
            lo.push(l);
            up.push(u);
        }

        // Decide which rows need an artificial column.
        let mut residual = vec![T::zero(); m];
        let mut needs_art = vec![false; m];
        for (i, c) in model.constraints.iter().enumerate() {
            let lhs: T = c.expr.terms().iter().map(|&(v, k)| k * x[v.0]).sum();
            let r = c.rhs - lhs;
            residual[i] = r;
            let s = n + i;
            needs_art[i] = r < lo[s] - T::feas_tol() || r > up[s] + T::feas_tol();
        }
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let ncols = n + m + n_art;
        lo.resize(ncols, T::zero());
        up.resize(ncols, T::infinity());
        x.resize(ncols, T::zero());
        status.resize(ncols, ColStatus::AtLower);

        let mut a = vec![T::zero(); m * ncols];
        let mut beta = vec![T::zero(); m];
        let mut basis = vec![0; m];
        let mut k = 0;
        for (i, c) in model.constraints.iter().enumerate() {
            let row = &mut a[i * ncols..(i + 1) * ncols];
            let sign = if needs_art[i] && residual[i] < T::zero() { -T::one() } else { T::one() };
            for (v, coef) in c.expr.terms() {
                row[v.0] = coef * sign;
            }
            row[n + i] = sign;
            beta[i] = c.rhs * sign;
            if needs_art[i] {
                let col = n + m + k;
                row[col] = T::one();
                basis[i] = col;
                status[col] = ColStatus::Basic;
                x[col] = residual[i].abs();
                // Slack rests at zero, which lies inside its bounds.
                status[n + i] = if lo[n + i] == T::zero() { ColStatus::AtLower } else { ColStatus::AtUpper };
                x[n + i] = T::zero();
                k += 1;
            } else {
                basis[i] = n + i;
                status[n + i] = ColStatus::Basic;
                x[n + i] = residual[i];
            }
        }

        Tableau {
            m,
            ncols,
            n_struct: n,
            n_art,
            rows0: (0..m)
                .map(|i| (0..ncols).map(|j| (j, a[i * ncols + j])).filter(|&(_, v)| v != T::zero()).collect())
                .collect(),
            beta0: beta.clone().into(),
            saved: Vec::new(),
            since_factor: 0,
            a,
            beta,
            lower: lo,
            upper: up,
            cost: vec![T::zero(); ncols],
            d: vec![T::zero(); ncols],
            x,
            status,
            basis,
        }
    }

    fn art_col(&self, k: usize) -> usize {
        self.n_struct + self.m + k
    }

    fn set_phase_one_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = T::zero());
        for k in 0..self.n_art {
            let c = self.art_col(k);
            self.cost[c] = T::one();
        }
        self.refresh_reduced_costs();
    }

    fn set_phase_two_costs(&mut self, model: &Model<T>) {
        self.cost.iter_mut().for_each(|c| *c = T::zero());
        let sign = match model.direction {
            Direction::Minimize => T::one(),
            Direction::Maximize => -T::one(),
        };
        for (v, c) in model.objective.terms() {
            self.cost[v.0] = c * sign;
        }
        self.refresh_reduced_costs();
    }

    fn refresh_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &aij) in self.d.iter_mut().zip(row) {
                *dj -= cb * aij;
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = T::zero();
        }
    }

    /// Recomputes basic values from `B^-1 b` and the nonbasic values.
    fn refresh_values(&mut self) {
        for i in 0..self.m {
            let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
            let mut v = self.beta[i];
            for j in 0..self.ncols {
                if self.status[j] != ColStatus::Basic && row[j] != T::zero() {
                    v -= row[j] * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    /// Direction in which nonbasic column `j` would improve the objective,
    /// if any.
    fn improving_direction(&self, j: usize, tol: T) -> Option<T> {
        let dj = self.d[j];
        match self.status[j] {
            ColStatus::Basic => None,
            ColStatus::AtLower => (dj < -tol && self.upper[j] > self.lower[j]).then(T::one),
            ColStatus::AtUpper => (dj > tol && self.upper[j] > self.lower[j]).then(|| -T::one()),
            ColStatus::Free => {
                if dj < -tol {
                    Some(T::one())
                } else if dj > tol {
                    Some(-T::one())
                } else {
                    None
                }
            }
        }
    }

    fn run(&mut self, stall_threshold: usize, budget: usize, iterations: &mut usize) -> Step {
        let dual_tol = T::pivot_tol();
        let mut bland = false;
        let mut degenerate_run = 0usize;
        let mut rounds = 0usize;
        loop {
            if self.since_factor >= REINVERT_EVERY {
                self.reinvert();
            }
            // Pricing.
            let mut entering: Option<(usize, T)> = None;
            let mut best = T::zero();
            for j in 0..self.ncols {
                if let Some(dir) = self.improving_direction(j, dual_tol) {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    let score = self.d[j].abs();
                    if score > best {
                        best = score;
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                // Confirm optimality against a freshly factored basis.
                if self.since_factor >= CONFIRM_AFTER {
                    self.reinvert();
                } else {
                    self.refresh_values();
                    self.refresh_reduced_costs();
                }
                if (0..self.ncols).any(|j| self.improving_direction(j, dual_tol).is_some()) {
                    continue;
                }
                self.restore();
                return Step::Optimal;
            };
            if *iterations >= budget {
                return Step::Limit;
            }
            *iterations += 1;

            // Ratio test in two passes: bound the step with slightly relaxed
            // bounds, then take the largest pivot among rows within it.
            let range = self.upper[q] - self.lower[q];
            let slack_tol = if bland { T::drop_tol() } else { T::feas_tol() * T::lit(0.01) };
            let mut relaxed = T::infinity();
            for i in 0..self.m {
                let alpha = self.a[i * self.ncols + q] * dir;
                if alpha.abs() > T::pivot_tol() {
                    if let Some(r) = self.ratio(i, alpha, slack_tol) {
                        relaxed = relaxed.min(r);
                    }
                }
            }
            let mut theta = T::infinity();
            let mut leave: Option<usize> = None;
            let mut leave_alpha = T::zero();
            if range.is_finite() && range <= relaxed {
                // Bound flip of the entering column.
                theta = range;
            } else if relaxed.is_finite() {
                for i in 0..self.m {
                    let alpha = self.a[i * self.ncols + q] * dir;
                    if alpha.abs() <= T::pivot_tol() {
                        continue;
                    }
                    let Some(ratio) = self.ratio(i, alpha, T::zero()) else { continue };
                    if ratio > relaxed {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some(li) if bland => self.basis[i] < self.basis[li],
                        Some(_) => alpha.abs() > leave_alpha.abs(),
                    };
                    if better {
                        theta = ratio;
                        leave = Some(i);
                        leave_alpha = alpha;
                    }
                }
            }
            if !theta.is_finite() {
                return Step::Unbounded;
            }

            let delta = theta * dir;
            if theta <= T::drop_tol() {
                degenerate_run += 1;
                if degenerate_run > stall_threshold && !bland {
                    if rounds < PERTURB_ROUNDS {
                        rounds += 1;
                        self.perturb(rounds);
                    } else {
                        bland = true;
                    }
                    degenerate_run = 0;
                }
            } else {
                degenerate_run = 0;
            }

            // Move values along the edge.
            for i in 0..self.m {
                let aiq = self.a[i * self.ncols + q];
                if aiq != T::zero() {
                    let b = self.basis[i];
                    self.x[b] -= aiq * delta;
                }
            }
            self.x[q] += delta;

            match leave {
                None => {
                    // Bound flip of the entering column.
                    self.status[q] = if dir > T::zero() { ColStatus::AtUpper } else { ColStatus::AtLower };
                    self.x[q] = if dir > T::zero() { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let b = self.basis[r];
                    if leave_alpha > T::zero() {
                        self.status[b] = ColStatus::AtLower;
                        self.x[b] = self.lower[b];
                    } else {
                        self.status[b] = ColStatus::AtUpper;
                        self.x[b] = self.upper[b];
                    }
                    self.pivot(r, q);
                }
            }
        }
    }

    /// Installs new bounds on the structural columns, moving nonbasic ones
    /// onto them and updating the basic values.
    fn set_structural_bounds(&mut self, lower: &[T], upper: &[T]) {
        for j in 0..self.n_struct {
            self.lower[j] = lower[j];
            self.upper[j] = upper[j];
            if self.status[j] == ColStatus::Basic {
                continue;
            }
            let (status, x) = match self.status[j] {
                ColStatus::AtUpper if upper[j].is_finite() => (ColStatus::AtUpper, upper[j]),
                _ if lower[j].is_finite() => (ColStatus::AtLower, lower[j]),
                _ if upper[j].is_finite() => (ColStatus::AtUpper, upper[j]),
                _ => (ColStatus::Free, T::zero()),
            };
            self.status[j] = status;
            let delta = x - self.x[j];
            if delta != T::zero() {
                for i in 0..self.m {
                    let aij = self.a[i * self.ncols + j];
                    if aij != T::zero() {
                        let b = self.basis[i];
                        self.x[b] -= aij * delta;
                    }
                }
                self.x[j] = x;
            }
        }
    }

    /// Bounded dual simplex from a dual feasible basis until the basic
    /// values respect their bounds.
    fn dual_run(&mut self, budget: usize, iterations: &mut usize) -> DualStep {
        let mut checked = false;
        loop {
            if self.since_factor >= REINVERT_EVERY {
                self.reinvert();
            }
            let mut leave: Option<(usize, T)> = None;
            let mut worst = T::zero();
            for i in 0..self.m {
                let b = self.basis[i];
                let (lo, up, v) = (self.lower[b], self.upper[b], self.x[b]);
                let viol = if v < lo - T::feas_tol() * (T::one() + lo.abs()) {
                    lo - v
                } else if v > up + T::feas_tol() * (T::one() + up.abs()) {
                    v - up
                } else {
                    continue;
                };
                if viol > worst {
                    worst = viol;
                    leave = Some((i, if v < lo { lo } else { up }));
                }
            }
            let Some((r, target)) = leave else { return DualStep::Feasible };
            let b = self.basis[r];
            // +1 when the leaving value has to rise to its bound.
            let s = if target > self.x[b] { T::one() } else { -T::one() };

            let mut entering: Option<(usize, T)> = None;
            let mut best_ratio = T::infinity();
            for j in 0..self.ncols {
                let alpha = self.a[r * self.ncols + j];
                if alpha.abs() <= T::pivot_tol() || self.upper[j] <= self.lower[j] {
                    continue;
                }
                let ok = match self.status[j] {
                    ColStatus::Basic => false,
                    ColStatus::AtLower => alpha * s < T::zero(),
                    ColStatus::AtUpper => alpha * s > T::zero(),
                    ColStatus::Free => true,
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let better = match entering {
                    None => true,
                    Some((_, a)) => {
                        let tie = T::drop_tol() * (T::one() + best_ratio);
                        ratio < best_ratio - tie || (ratio <= best_ratio + tie && alpha.abs() > a.abs())
                    }
                };
                if better {
                    best_ratio = ratio;
                    entering = Some((j, alpha));
                }
            }
            let Some((q, alpha)) = entering else {
                // An infeasible row read off an aged tableau is confirmed on a
                // fresh factorization first.
                if checked || self.since_factor < CONFIRM_AFTER {
                    return DualStep::Infeasible;
                }
                checked = true;
                self.reinvert();
                continue;
            };
            checked = false;
            if *iterations >= budget {
                return DualStep::Stalled;
            }
            *iterations += 1;

            let delta = (self.x[b] - target) / alpha;
            for i in 0..self.m {
                let aiq = self.a[i * self.ncols + q];
                if aiq != T::zero() {
                    let bi = self.basis[i];
                    self.x[bi] -= aiq * delta;
                }
            }
            self.x[q] += delta;
            self.status[b] = if s > T::zero() { ColStatus::AtLower } else { ColStatus::AtUpper };
            self.x[b] = target;
            self.pivot(r, q);
        }
    }

    /// Widens the finite bounds of every basic column by a small,
    /// column-dependent amount so that degenerate vertices split apart.
    fn perturb(&mut self, round: usize) {
        let base = T::feas_tol() * T::lit(0.01);
        for i in 0..self.m {
            let b = self.basis[i];
            if !self.saved.iter().any(|&(j, _, _)| j == b) {
                self.saved.push((b, self.lower[b], self.upper[b]));
            }
            let h = (b.wrapping_mul(2_654_435_761).wrapping_add(round * 97) % 1024) as f64 / 1024.0;
            let d = base * T::lit(1.0 + h);
            let (lo, up) = (self.lower[b], self.upper[b]);
            if lo.is_finite() {
                self.lower[b] = lo - d * (T::one() + lo.abs());
            }
            if up.is_finite() {
                self.upper[b] = up + d * (T::one() + up.abs());
            }
        }
    }

    /// Puts widened bounds back; nonbasic columns move onto them and basic
    /// values are recomputed, possibly leaving a residual of the order of
    /// the perturbation.
    fn restore(&mut self) {
        if self.saved.is_empty() {
            return;
        }
        for (j, lo, up) in std::mem::take(&mut self.saved) {
            self.lower[j] = lo;
            self.upper[j] = up;
            match self.status[j] {
                ColStatus::AtLower => self.x[j] = lo,
                ColStatus::AtUpper => self.x[j] = up,
                _ => {}
            }
        }
        self.reinvert();
    }

    /// Step length at which basic row `i` reaches a bound, with bounds
    /// widened by `slack`.
    fn ratio(&self, i: usize, alpha: T, slack: T) -> Option<T> {
        let b = self.basis[i];
        let r = if alpha > T::zero() {
            if !self.lower[b].is_finite() {
                return None;
            }
            (self.x[b] - self.lower[b] + slack) / alpha
        } else {
            if !self.upper[b].is_finite() {
                return None;
            }
            (self.upper[b] - self.x[b] + slack) / -alpha
        };
        Some(r.max(T::zero()))
    }

    /// Rebuilds `B^-1 A` and `B^-1 b` from the starting rows for the current
    /// basis, then refreshes values and reduced costs. Leaves the tableau
    /// alone if the basis looks singular.
    fn reinvert(&mut self) {
        let (m, nc) = (self.m, self.ncols);
        let mut pos = vec![usize::MAX; nc];
        for (k, &b) in self.basis.iter().enumerate() {
            pos[b] = k;
        }
        // Gauss-Jordan on [B | I], B stored row-wise by basis position.
        let w = 2 * m;
        let mut g = vec![T::zero(); m * w];
        for (i, row) in self.rows0.iter().enumerate() {
            for &(j, v) in row {
                if pos[j] != usize::MAX {
                    g[i * w + pos[j]] = v;
                }
            }
            g[i * w + m + i] = T::one();
        }
        let mut row_of = vec![usize::MAX; m];
        let mut used = vec![false; m];
        let mut nz: Vec<usize> = Vec::with_capacity(w);
        let mut pivot_row: Vec<T> = Vec::with_capacity(w);
        for k in 0..m {
            let mut piv = None;
            let mut best = T::zero();
            for i in 0..m {
                if !used[i] && g[i * w + k].abs() > best {
                    best = g[i * w + k].abs();
                    piv = Some(i);
                }
            }
            let Some(r) = piv.filter(|_| best > T::pivot_tol()) else {
                self.refresh_values();
                self.refresh_reduced_costs();
                self.since_factor = 0;
                return;
            };
            used[r] = true;
            row_of[k] = r;
            let inv = T::one() / g[r * w + k];
            for v in &mut g[r * w..(r + 1) * w] {
                *v *= inv;
            }
            nz.clear();
            nz.extend((k..w).filter(|&j| g[r * w + j] != T::zero()));
            pivot_row.clear();
            pivot_row.extend(nz.iter().map(|&j| g[r * w + j]));
            for i in 0..m {
                let f = g[i * w + k];
                if i == r || f == T::zero() {
                    continue;
                }
                let row = &mut g[i * w..(i + 1) * w];
                for (&j, &pv) in nz.iter().zip(&pivot_row) {
                    let v = row[j] - f * pv;
                    row[j] = if v.abs() < T::drop_tol() { T::zero() } else { v };
                }
                row[k] = T::zero();
            }
        }
        // Row k of B^-1 sits in row row_of[k] of the right half.
        for k in 0..m {
            let inv_row = &g[row_of[k] * w + m..(row_of[k] + 1) * w];
            let out = &mut self.a[k * nc..(k + 1) * nc];
            out.iter_mut().for_each(|v| *v = T::zero());
            let mut b = T::zero();
            for (i, &f) in inv_row.iter().enumerate() {
                if f == T::zero() {
                    continue;
                }
                for &(j, v) in &self.rows0[i] {
                    out[j] += f * v;
                }
                b += f * self.beta0[i];
            }
            for v in out.iter_mut() {
                if v.abs() < T::drop_tol() {
                    *v = T::zero();
                }
            }
            out[self.basis[k]] = T::one();
            self.beta[k] = b;
        }
        self.refresh_values();
        self.refresh_reduced_costs();
        self.since_factor = 0;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let p = self.a[r * nc + q];
        let inv = T::one() / p;
        {
            let row = &mut self.a[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = T::one();
        }
        self.beta[r] *= inv;
        let pivot_row: Vec<T> = self.a[r * nc..(r + 1) * nc].to_vec();
        let nz: Vec<usize> = (0..nc).filter(|&j| pivot_row[j] != T::zero()).collect();
        let beta_r = self.beta[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * nc + q];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.a[i * nc..(i + 1) * nc];
            for &j in &nz {
                let v = row[j] - f * pivot_row[j];
                row[j] = if v.abs() < T::drop_tol() { T::zero() } else { v };
            }
            row[q] = T::zero();
            self.beta[i] -= f * beta_r;
        }
        let dq = self.d[q];
        if dq != T::zero() {
            for &j in &nz {
                self.d[j] -= dq * pivot_row[j];
            }
            self.d[q] = T::zero();
        }
        self.basis[r] = q;
        self.status[q] = ColStatus::Basic;
        self.since_factor += 1;
    }

    fn extract(&self, model: &Model<T>, iterations: usize) -> LpResult<T> {
        let n = self.n_struct;
        let m = self.m;
        let mut primal: Vec<T> = self.x[..n].to_vec();
        for (j, v) in primal.iter_mut().enumerate() {
            if self.lower[j].is_finite() && *v < self.lower[j] {
                *v = self.lower[j];
            }
            if self.upper[j].is_finite() && *v > self.upper[j] {
                *v = self.upper[j];
            }
            if v.abs() < T::drop_tol() {
                *v = T::zero();
            }
        }
        let sign = match model.direction {
            Direction::Minimize => T::one(),
            Direction::Maximize => -T::one(),
        };
        let duals: Vec<T> = (0..m).map(|i| -self.d[n + i] * sign).collect();
        let reduced_costs: Vec<T> = (0..n).map(|j| self.d[j] * sign).collect();
        let objective = model.objective.eval(&primal);
        LpResult { status: LpStatus::Optimal, primal, objective, duals, reduced_costs, iterations }
    }
}
