//! Brute-force references for small instances.
//!
//! Every function works on an explicit list of candidate decisions (paths
//! from [`SppInstance::enumerate_paths`](crate::spp::SppInstance::enumerate_paths),
//! [`binary_points`], or [`subsets`]) and evaluates each one with direct
//! formulas, without building models.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::knapsack::KnapsackInstance;
use crate::preferences::{PreferenceKind, RegretMode};
use crate::robust::{prefer, EndogenousProblem, Epsilon, RobustFormulation, SolveOutput};
use crate::uncertainty::CostMap;

/// Largest width of a box enumerated vertex by vertex.
pub const MAX_BOX_DIM: usize = 10;
/// Largest number of budget vertices enumerated.
pub const MAX_BUDGET_VERTICES: usize = 100_000;
/// Largest dimension for full binary enumeration.
pub const MAX_BINARIES: usize = 16;

fn cap_error(what: &str, size: usize, cap: usize) -> Error {
    Error::CapExceeded(format!("{what}: {size} exceeds the cap of {cap}"))
}

/// All of `{0,1}^n`.
pub fn subsets(n: usize) -> Result<Vec<Vec<f64>>> {
    if n > MAX_BINARIES {
        return Err(cap_error("binary dimension", n, MAX_BINARIES));
    }
    Ok((0..1u32 << n).map(|m| (0..n).map(|i| f64::from((m >> i) & 1)).collect()).collect())
}

/// Binary points satisfying the certain rows of `problem`.
pub fn binary_points(problem: &EndogenousProblem) -> Result<Vec<Vec<f64>>> {
    Ok(subsets(problem.dimension())?.into_iter().filter(|x| problem.is_feasible(x)).collect())
}

/// Hooks the enumerators need from a problem family.
pub trait BruteForce {
    fn regime_count(&self) -> usize;
    fn activation_cost(&self, s: usize) -> f64;
    /// `1.0` for minimization, `-1.0` for maximization.
    fn orientation(&self) -> f64;
    /// Whether `x` is admissible under regime `s`.
    fn admissible(&self, x: &[f64], s: usize) -> bool;
    /// Worst-case objective in natural units.
    fn worst(&self, x: &[f64], s: usize) -> Result<f64>;
    /// Preference value in natural units. `candidates` is the hindsight
    /// domain for regret.
    fn preference(&self, x: &[f64], s: usize, pref: PreferenceKind, candidates: &[Vec<f64>]) -> Result<f64>;
    fn preference_orientation(&self, pref: PreferenceKind) -> f64;
}

impl BruteForce for EndogenousProblem {
    fn regime_count(&self) -> usize {
        self.regimes().len()
    }

    fn activation_cost(&self, s: usize) -> f64 {
        self.regime(s).activation_cost
    }

    fn orientation(&self) -> f64 {
        1.0
    }

    fn admissible(&self, x: &[f64], _s: usize) -> bool {
        self.is_feasible(x)
    }

    fn worst(&self, x: &[f64], s: usize) -> Result<f64> {
        Ok(self.regime(s).cost_map.worst_case_value(x)?)
    }

    fn preference(&self, x: &[f64], s: usize, pref: PreferenceKind, candidates: &[Vec<f64>]) -> Result<f64> {
        let cm = &self.regime(s).cost_map;
        match pref {
            PreferenceKind::Predictability => Ok(cm.worst_case_value(x)? - cm.best_case_value(x)?),
            PreferenceKind::BestCase => Ok(cm.best_case_value(x)?),
            PreferenceKind::Regret(RegretMode::Exact) => box_regret(cm, x, candidates),
            // The bound is what the model optimizes; compare like with like.
            PreferenceKind::Regret(_) => RobustFormulation::preference(self, x, s, pref),
        }
    }

    fn preference_orientation(&self, _pref: PreferenceKind) -> f64 {
        1.0
    }
}

impl BruteForce for KnapsackInstance {
    fn regime_count(&self) -> usize {
        RobustFormulation::regime_count(self)
    }

    fn activation_cost(&self, s: usize) -> f64 {
        RobustFormulation::activation_cost(self, s)
    }

    fn orientation(&self) -> f64 {
        -1.0
    }

    fn admissible(&self, x: &[f64], s: usize) -> bool {
        self.is_robust_feasible(x, s)
    }

    fn worst(&self, x: &[f64], _s: usize) -> Result<f64> {
        Ok(self.value(x))
    }

    fn preference(&self, x: &[f64], s: usize, pref: PreferenceKind, candidates: &[Vec<f64>]) -> Result<f64> {
        match pref {
            PreferenceKind::Predictability => Ok(self.worst_weight(x, s) - self.best_weight(x, s)),
            PreferenceKind::BestCase => Ok(self.capacity() - self.best_weight(x, s)),
            PreferenceKind::Regret(RegretMode::Exact) => knapsack_regret(self, x, s, candidates),
            PreferenceKind::Regret(_) => RobustFormulation::preference(self, x, s, pref),
        }
    }

    fn preference_orientation(&self, pref: PreferenceKind) -> f64 {
        RobustFormulation::preference_orientation(self, pref)
    }
}

/// Robust optimum of one regime with every candidate attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct RcSet {
    pub value: f64,
    pub argmin: Vec<Vec<f64>>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn brute_force_rc<P: BruteForce + ?Sized>(problem: &P, s: usize, candidates: &[Vec<f64>]) -> Result<RcSet> {
    let o = problem.orientation();
    let mut best: Option<f64> = None;
    let mut scored = Vec::new();
    for x in candidates.iter().filter(|x| problem.admissible(x, s)) {
        let v = problem.worst(x, s)?;
        if best.map_or(true, |b| o * v < o * b) {
            best = Some(v);
        }
        scored.push((v, x));
    }
    let value = best.ok_or_else(|| Error::Infeasible(format!("no admissible candidate for regime {s}")))?;
    let argmin = scored.into_iter().filter(|(v, _)| close(*v, value)).map(|(_, x)| x.clone()).collect();
    Ok(RcSet { value, argmin })
}

/// `max_u [c(u)^T x - min_y c(u)^T y]`, evaluated as
/// `max_y [c0^T (x - y) + ||C^T (x - y)||_1]` by exchanging the two maxima.
pub fn box_regret(cm: &CostMap, x: &[f64], candidates: &[Vec<f64>]) -> Result<f64> {
    let form = cm.to_box()?;
    let mut best = f64::NEG_INFINITY;
    for y in candidates {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let v: f64 = form.nominal.iter().zip(&diff).map(|(c, d)| c * d).sum::<f64>()
            + form.deviation(&diff).iter().map(|g| g.abs()).sum::<f64>();
        best = best.max(v);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Infeasible("empty hindsight domain".into()));
    }
    Ok(best)
}

/// The same regret by enumerating all box vertices.
pub fn box_regret_by_vertices(cm: &CostMap, x: &[f64], candidates: &[Vec<f64>]) -> Result<f64> {
    let form = cm.to_box()?;
    if form.width > MAX_BOX_DIM {
        return Err(cap_error("box width", form.width, MAX_BOX_DIM));
    }
    if candidates.is_empty() {
        return Err(Error::Infeasible("empty hindsight domain".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for m in 0..1u32 << form.width {
        let u: Vec<f64> = (0..form.width).map(|j| if (m >> j) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let c = form.realize(&u);
        let dot = |v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let hindsight = candidates.iter().map(|y| dot(y)).fold(f64::INFINITY, f64::min);
        best = best.max(dot(x) - hindsight);
    }
    Ok(best)
}

/// Budget vertices: every set of `budget` items at full deviation.
fn budget_vertices(n: usize, budget: usize) -> Result<Vec<Vec<usize>>> {
    let count = binomial(n, budget);
    if count > MAX_BUDGET_VERTICES as u128 {
        return Err(cap_error("budget vertices", count.min(usize::MAX as u128) as usize, MAX_BUDGET_VERTICES));
    }
    Ok((0..n).combinations(budget).collect())
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exact regret of `x`: the best utility any candidate reaches under some
/// deviation pattern, minus the utility of `x`.
pub fn knapsack_regret(inst: &KnapsackInstance, x: &[f64], s: usize, candidates: &[Vec<f64>]) -> Result<f64> {
    let n = inst.items();
    let mut hindsight = f64::NEG_INFINITY;
    for z in budget_vertices(n, inst.budget())? {
        let mut w = inst.weight().to_vec();
        for &i in &z {
            w[i] += inst.deviation(s)[i];
        }
        for y in candidates {
            let load: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
            if load <= inst.capacity() + 1e-9 * inst.capacity().max(1.0) {
                hindsight = hindsight.max(inst.value(y));
            }
        }
    }
    if hindsight == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no candidate fits under any deviation pattern".into()));
    }
    Ok(hindsight - inst.value(x))
}

fn output<P: BruteForce + ?Sized>(
    problem: &P,
    x: &[f64],
    s: usize,
    alpha: Option<f64>,
    pref: PreferenceKind,
    candidates: &[Vec<f64>],
) -> Result<SolveOutput> {
    let worst = problem.worst(x, s)?;
    let m = problem.preference(x, s, pref, candidates)?;
    let gamma = problem.activation_cost(s);
    let total = gamma
        + alpha.map_or(0.0, |a| a * problem.orientation() * worst)
        + problem.preference_orientation(pref) * m;
    Ok(SolveOutput {
        x: x.to_vec(),
        regime: s,
        worst_case: worst,
        preference_value: m,
        preference_values: vec![m],
        activation_cost: gamma,
        total_objective: total,
        wall_time: 0.0,
        cuts_added: 0,
        nodes: 0,
        method: Some("enumeration"),
    })
}

fn keep_best<P: BruteForce + ?Sized>(problem: &P, best: &mut Option<SolveOutput>, out: SolveOutput) {
    let o = problem.orientation();
    let better = match best {
        None => true,
        Some(b) => prefer(
            (out.total_objective, o * out.worst_case, out.regime),
            (b.total_objective, o * b.worst_case, b.regime),
        ),
    };
    if better {
        *best = Some(out);
    }
}

/// Every robustly optimal pair `(x, s)` scored by
/// `gamma_s + alpha W + M(x, s)` in minimized units.
pub fn brute_force_bilevel<P: BruteForce + ?Sized>(
    problem: &P,
    pref: PreferenceKind,
    alpha: f64,
    candidates: &[Vec<f64>],
) -> Result<SolveOutput> {
    let mut best = None;
    for s in 0..problem.regime_count() {
        let rc = match brute_force_rc(problem, s, candidates) {
            Ok(rc) => rc,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        for x in &rc.argmin {
            keep_best(problem, &mut best, output(problem, x, s, Some(alpha), pref, candidates)?);
        }
    }
    best.ok_or_else(|| Error::Infeasible("no regime attains a robust optimum".into()))
}

/// Best regime merit `gamma_s + phi_s` (lowest index on ties) and its
/// `phi_s`.
pub fn brute_force_phi_star<P: BruteForce + ?Sized>(problem: &P, candidates: &[Vec<f64>]) -> Result<f64> {
    let o = problem.orientation();
    let mut best: Option<(f64, f64)> = None;
    for s in 0..problem.regime_count() {
        let rc = match brute_force_rc(problem, s, candidates) {
            Ok(rc) => rc,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let merit = problem.activation_cost(s) + o * rc.value;
        if best.map_or(true, |(m, _)| merit < m - 1e-6 * m.abs().max(1.0)) {
            best = Some((merit, rc.value));
        }
    }
    best.map(|(_, phi)| phi).ok_or_else(|| Error::Infeasible("no regime attains a robust optimum".into()))
}

/// Every admissible pair within `eps` of the robust optimum, scored by
/// `gamma_s + M(x, s)`.
pub fn brute_force_epsilon<P: BruteForce + ?Sized>(
    problem: &P,
    pref: PreferenceKind,
    eps: Epsilon,
    candidates: &[Vec<f64>],
) -> Result<SolveOutput> {
    let o = problem.orientation();
    let phi_star = brute_force_phi_star(problem, candidates)?;
    let bound = o * phi_star + eps.slack(phi_star);
    let mut best = None;
    for s in 0..problem.regime_count() {
        for x in candidates.iter().filter(|x| problem.admissible(x, s)) {
            let w = o * problem.worst(x, s)?;
            if w > bound + 1e-9 * bound.abs().max(1.0) {
                continue;
            }
            keep_best(problem, &mut best, output(problem, x, s, None, pref, candidates)?);
        }
    }
    best.ok_or_else(|| Error::Infeasible("no pair meets the epsilon constraint".into()))
}
