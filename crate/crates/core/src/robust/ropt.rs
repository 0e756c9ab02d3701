//! Restricting an [`EndogenousProblem`] model to robustly optimal solutions.

use super::ctx::BuildCtx;
use super::problem::EndogenousProblem;
use super::{tol, EndogenousRc, LazyCut, RobustFormulation, RoptMethod};
use crate::error::{Error, Result};
use crate::milp::{Constraint, LinExpr, Sense};
use crate::uncertainty::CostMap;

/// Big-M constants `M_j = UB - phi_j`, where `UB` bounds every regime's worst
/// case over `[0,1]^n` coordinate by coordinate.
pub fn default_big_m(problem: &EndogenousProblem, phi: &[Option<f64>]) -> Result<Vec<f64>> {
    let forms = problem.box_forms()?;
    let n = problem.dimension();
    let ub: f64 = (0..n)
        .map(|i| {
            forms
                .iter()
                .map(|f| (f.nominal[i] + f.loading[i].iter().map(|c| c.abs()).sum::<f64>()).max(0.0))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(phi.iter().map(|p| p.map_or(0.0, |v| ub - v)).collect())
}

/// Worst-case realization `c(u*)` for a fixed `x`.
pub(crate) fn worst_realization(cm: &CostMap, x: &[f64]) -> Result<Vec<f64>> {
    if let Some(c) = cm.linear_worst_costs() {
        return Ok(c);
    }
    let form = cm.to_box()?;
    let u: Vec<f64> = form.deviation(x).iter().map(|g| if *g < 0.0 { -1.0 } else { 1.0 }).collect();
    Ok(form.realize(&u))
}

pub(crate) fn endogenous_ropt<'a>(
    problem: &'a EndogenousProblem,
    ctx: &mut BuildCtx,
    method: &RoptMethod,
    rc: &EndogenousRc,
) -> Result<Option<LazyCut<'a>>> {
    let phi = &rc.phi;
    match method {
        RoptMethod::Duality => {
            if !problem.lp_exact() {
                return Err(Error::Unsupported(
                    "duality characterization needs an LP-exact robust counterpart (interval or correlated maps on totally unimodular rows)".into(),
                ));
            }
            let inner = problem.nominal_inner();
            let objective: Vec<LinExpr<f64>> = (0..problem.dimension())
                .map(|i| ctx.layout.regime_scalar(|s| -problem.linear_worst(s)[i]))
                .collect();
            let dual = inner.embed_dual(&mut ctx.model, &objective, "rc_dual");
            let mut row = problem.worst_case_expr(ctx)?;
            row += &dual;
            ctx.model.add_constraint(Constraint::new(row, Sense::Le, 0.0, "zero_gap"))?;
            Ok(None)
        }
        RoptMethod::BigM { bounds } => {
            let m = match bounds {
                Some(m) => m.clone(),
                None => default_big_m(problem, phi)?,
            };
            if m.len() != phi.len() {
                return Err(Error::InvalidInput(format!("{} big-M values for {} regimes", m.len(), phi.len())));
            }
            let phi_max = phi.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            for (j, p) in phi.iter().enumerate() {
                if let Some(p) = p {
                    if m[j] < phi_max - p - tol(phi_max) {
                        return Err(Error::InvalidInput(format!(
                            "big-M for regime {j} is {} but must be at least {}",
                            m[j],
                            phi_max - p
                        )));
                    }
                }
            }
            let w = problem.worst_case_expr(ctx)?;
            for (j, p) in phi.iter().enumerate() {
                if let Some(p) = p {
                    let mut row = w.clone();
                    row.add_scaled(&ctx.layout.indicator(j), m[j]);
                    ctx.model.add_constraint(Constraint::new(row, Sense::Le, p + m[j], format!("bigm{j}")))?;
                }
            }
            Ok(None)
        }
        RoptMethod::Incumbent { anchors } => {
            let anchors: Vec<Vec<f64>> = match anchors {
                Some(a) => a.clone(),
                None => rc.anchors.iter().flatten().cloned().collect(),
            };
            let w = problem.worst_case_expr(ctx)?;
            for (j, z) in anchors.iter().enumerate() {
                if z.len() != problem.dimension() || !problem.is_feasible(z) {
                    return Err(Error::InvalidInput(format!("anchor {j} is not a feasible point")));
                }
                let worst: Vec<f64> = (0..problem.regime_count())
                    .map(|s| problem.worst_case(z, s))
                    .collect::<Result<_>>()?;
                let mut row = w.clone();
                row -= &ctx.layout.regime_scalar(|s| worst[s]);
                ctx.model.add_constraint(Constraint::new(row, Sense::Le, 0.0, format!("anchor{j}")))?;
            }
            Ok(None)
        }
        RoptMethod::Lazy => {
            let layout = ctx.layout.clone();
            let phi = phi.clone();
            Ok(Some(Box::new(move |values: &[f64]| {
                let s = layout.regime_of(values);
                let x: Vec<f64> = layout.decisions(values).iter().map(|v| v.round()).collect();
                let Some(bound) = phi[s] else { return Vec::new() };
                let cm = &problem.regime(s).cost_map;
                let Ok(worst) = cm.worst_case_value(&x) else { return Vec::new() };
                if worst <= bound + tol(bound) {
                    return Vec::new();
                }
                let Ok(c) = worst_realization(cm, &x) else { return Vec::new() };
                let mut row = layout.masked_dot(s, &c);
                row.add_scaled(&layout.indicator(s), -bound);
                vec![Constraint::new(row, Sense::Le, 0.0, format!("lazy_r{s}"))]
            })))
        }
    }
}
