//! LP-based branch and bound over binary variables.
//!
//! Nodes are explored depth first; among open nodes of equal depth the one
//! with the better parent bound goes first, then the older one. Integral
//! candidates are handed to the lazy callback before they may become the
//! incumbent; returned rows join the model globally and the node is re-solved.

use super::model::{Constraint, Direction, Model, VarKind};
use std::rc::Rc;

use super::simplex::{resolve, solve_cold, LpOptions, LpStatus, WarmStart};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node or pivot budget exhausted; `incumbent` holds the best point found
    /// so far, if any.
    ResourceExhausted,
}

#[derive(Clone, Debug)]
pub struct MilpResult<T> {
    pub status: MilpStatus,
    pub incumbent: Vec<T>,
    pub objective: T,
    pub node_count: usize,
    pub lazy_cuts_added: usize,
    pub has_incumbent: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct MilpOptions {
    pub max_nodes: usize,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { max_nodes: 200_000, lp: LpOptions::default() }
    }
}

/// Callback invoked on every integral candidate; returns the rows the
/// candidate violates (empty to accept it).
pub type LazyFn<'a, T> = dyn FnMut(&[T]) -> Vec<Constraint<T>> + 'a;

pub fn solve_milp<T: Scalar>(model: &Model<T>, lazy: Option<&mut LazyFn<'_, T>>) -> MilpResult<T> {
    solve_milp_with(model, lazy, MilpOptions::default())
}

struct Node<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    depth: usize,
    bound: T,
    id: usize,
    /// Parent's final tableau.
    warm: Option<Rc<WarmStart<T>>>,
}

pub fn solve_milp_with<T: Scalar>(
    model: &Model<T>,
    mut lazy: Option<&mut LazyFn<'_, T>>,
    opts: MilpOptions,
) -> MilpResult<T> {
    let mut work = model.clone();
    let sign = match model.direction {
        Direction::Minimize => T::one(),
        Direction::Maximize => -T::one(),
    };
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();

    let mut open = vec![Node {
        lower: model.variables.iter().map(|s| s.lower).collect(),
        upper: model.variables.iter().map(|s| s.upper).collect(),
        depth: 0,
        bound: T::neg_infinity(),
        id: 0,
        warm: None,
    }];
    let mut next_id = 1;
    let mut incumbent: Option<(Vec<T>, T)> = None;
    let mut nodes = 0;
    let mut cuts = 0;

    let finish = |status: MilpStatus, incumbent: Option<(Vec<T>, T)>, nodes, cuts| match incumbent {
        Some((x, z)) => MilpResult {
            status,
            objective: z * sign,
            incumbent: x,
            node_count: nodes,
            lazy_cuts_added: cuts,
            has_incumbent: true,
        },
        None => MilpResult {
            status: if status == MilpStatus::Optimal { MilpStatus::Infeasible } else { status },
            objective: T::nan(),
            incumbent: vec![T::zero(); model.num_vars()],
            node_count: nodes,
            lazy_cuts_added: cuts,
            has_incumbent: false,
        },
    };

    while !open.is_empty() {
        let pick = select(&open);
        let node = open.swap_remove(pick);
        if let Some((_, z)) = &incumbent {
            if node.bound >= *z - gap(*z) {
                continue;
            }
        }
        if nodes >= opts.max_nodes {
            return finish(MilpStatus::ResourceExhausted, incumbent, nodes, cuts);
        }
        nodes += 1;

        let (lp, warm) = match &node.warm {
            Some(w) => resolve(&work, &node.lower, &node.upper, opts.lp, w),
            None => solve_cold(&work, &node.lower, &node.upper, opts.lp),
        };
        let warm = warm.filter(|w| w.size() <= WARM_LIMIT).map(Rc::new);
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::IterationLimit => {
                return finish(MilpStatus::ResourceExhausted, incumbent, nodes, cuts);
            }
            LpStatus::Unbounded => {
                return finish(MilpStatus::Unbounded, None, nodes, cuts);
            }
            LpStatus::Optimal => {}
        }
        let z = lp.objective * sign;
        if let Some((_, best)) = &incumbent {
            if z >= *best - gap(*best) {
                continue;
            }
        }

        // Most fractional binary, lowest index on ties.
        let mut branch: Option<(usize, T)> = None;
        let mut best_frac = T::int_tol();
        for &j in &binaries {
            let v = lp.primal[j];
            let frac = (v - v.round()).abs();
            if frac > best_frac {
                best_frac = frac;
                branch = Some((j, v));
            }
        }

        match branch {
            Some((j, v)) => {
                let half = T::lit(0.5);
                let mut down = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    depth: node.depth + 1,
                    bound: z,
                    id: 0,
                    warm: warm.clone(),
                };
                down.upper[j] = T::zero();
                let mut up =
                    Node { lower: node.lower, upper: node.upper, depth: node.depth + 1, bound: z, id: 0, warm };
                up.lower[j] = T::one();
                let (first, second) = if v >= half { (up, down) } else { (down, up) };
                for mut child in [first, second] {
                    child.id = next_id;
                    next_id += 1;
                    open.push(child);
                }
            }
            None => {
                let mut x = lp.primal.clone();
                for &j in &binaries {
                    x[j] = x[j].round();
                }
                if let Some(cb) = lazy.as_deref_mut() {
                    let new_rows = cb(&x);
                    let violated = new_rows.iter().any(|c| c.violation(&x) > T::feas_tol());
                    if !new_rows.is_empty() {
                        cuts += new_rows.len();
                        for c in new_rows {
                            work.add_constraint(c).expect("lazy row uses model variables");
                        }
                    }
                    if violated {
                        open.push(Node { id: next_id, warm: None, ..node });
                        next_id += 1;
                        continue;
                    }
                }
                let zx = work.objective.eval(&x) * sign;
                let better = match &incumbent {
                    None => true,
                    Some((_, best)) => zx < *best - gap(*best),
                };
                if better {
                    incumbent = Some((x, zx));
                }
            }
        }
    }
    finish(MilpStatus::Optimal, incumbent, nodes, cuts)
}

/// Largest tableau, in entries, kept around for warm starts.
const WARM_LIMIT: usize = 4_000_000;

fn gap<T: Scalar>(z: T) -> T {
    T::gap_tol() * T::one().max(z.abs())
}

fn select<T: Scalar>(open: &[Node<T>]) -> usize {
    let mut best = 0;
    for (i, n) in open.iter().enumerate().skip(1) {
        let b = &open[best];
        let key_better = n.depth > b.depth
            || (n.depth == b.depth && (n.bound < b.bound || (n.bound == b.bound && n.id < b.id)));
        if key_better {
            best = i;
        }
    }
    best
}
