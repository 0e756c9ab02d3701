use crate::error::Result;
use crate::milp::{add_mccormick, LinExpr, Model, Sense, Var};

/// How the regime choice enters a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Encoding {
    /// One binary indicator per regime, summing to one; a single joint model.
    #[default]
    OneHot,
    /// One model per regime with the choice fixed, best result kept.
    Enumerated,
}

#[derive(Clone, Debug)]
pub enum RegimeSelection {
    OneHot(Vec<Var>),
    Fixed(usize),
}

/// Decision variables plus the regime-masked copies `P[s][i] = r_s x_i`.
///
/// Everything a builder needs to express regime-dependent coefficients.
/// Cheap to clone, so lazy callbacks keep their own copy.
#[derive(Clone, Debug)]
pub struct Layout {
    pub x: Vec<Var>,
    pub selection: RegimeSelection,
    pub regimes: usize,
    masked: Vec<Vec<Var>>,
}

impl Layout {
    pub fn active(&self) -> Vec<usize> {
        match &self.selection {
            RegimeSelection::OneHot(_) => (0..self.regimes).collect(),
            RegimeSelection::Fixed(s) => vec![*s],
        }
    }

    /// `r_s`, a constant under a fixed selection.
    pub fn indicator(&self, s: usize) -> LinExpr<f64> {
        match &self.selection {
            RegimeSelection::OneHot(r) => LinExpr::term(r[s], 1.0),
            RegimeSelection::Fixed(f) => LinExpr::constant(if *f == s { 1.0 } else { 0.0 }),
        }
    }

    /// `r_s x_i`.
    pub fn masked(&self, s: usize, i: usize) -> LinExpr<f64> {
        match &self.selection {
            RegimeSelection::OneHot(_) => LinExpr::term(self.masked[s][i], 1.0),
            RegimeSelection::Fixed(f) if *f == s => LinExpr::term(self.x[i], 1.0),
            RegimeSelection::Fixed(_) => LinExpr::new(),
        }
    }

    /// `sum_i c_i r_s x_i`.
    pub fn masked_dot(&self, s: usize, c: &[f64]) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                e.add_scaled(&self.masked(s, i), ci);
            }
        }
        e
    }

    /// `sum_s sum_i c_s(i) r_s x_i` over the active regimes.
    pub fn mixed(&self, mut coeffs: impl FnMut(usize) -> Vec<f64>) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for s in self.active() {
            e += &self.masked_dot(s, &coeffs(s));
        }
        e
    }

    /// `sum_s f(s) r_s` over the active regimes.
    pub fn regime_scalar(&self, mut f: impl FnMut(usize) -> f64) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for s in self.active() {
            e.add_scaled(&self.indicator(s), f(s));
        }
        e
    }

    /// Regime selected by a model point.
    pub fn regime_of(&self, values: &[f64]) -> usize {
        match &self.selection {
            RegimeSelection::OneHot(r) => {
                let mut best = 0;
                for (s, v) in r.iter().enumerate() {
                    if values[v.index()] > values[r[best].index()] {
                        best = s;
                    }
                }
                best
            }
            RegimeSelection::Fixed(s) => *s,
        }
    }

    pub fn decisions(&self, values: &[f64]) -> Vec<f64> {
        self.x.iter().map(|v| values[v.index()]).collect()
    }
}

/// A model under construction together with its layout.
pub struct BuildCtx {
    pub model: Model<f64>,
    pub layout: Layout,
    /// Deviation vector `g = sum_s C_s^T P_s` and its l1 epigraph, shared by
    /// the worst-case and predictability terms of box maps.
    pub(crate) box_deviation: Option<(Vec<Var>, Var)>,
}

impl BuildCtx {
    /// Creates the regime selection; `x` must already live in `model` with
    /// bounds inside `[0,1]`.
    pub fn new(mut model: Model<f64>, x: Vec<Var>, regimes: usize, selection: Selection) -> Result<Self> {
        let n = x.len();
        let (selection, masked) = match selection {
            Selection::Fixed(s) => (RegimeSelection::Fixed(s), Vec::new()),
            Selection::OneHot => {
                let r: Vec<Var> = (0..regimes).map(|s| model.add_binary(format!("r{s}"))).collect();
                model.constrain(LinExpr::from_terms(r.iter().map(|&v| (v, 1.0))), Sense::Eq, 1.0, "one_regime");
                let mut masked = Vec::with_capacity(regimes);
                for &rs in &r {
                    let mut row = Vec::with_capacity(n);
                    for &xi in &x {
                        row.push(add_mccormick(&mut model, rs, xi)?);
                    }
                    masked.push(row);
                }
                // The masked copies of one coordinate add up to it.
                for (i, &xi) in x.iter().enumerate() {
                    let mut e = LinExpr::term(xi, -1.0);
                    for row in &masked {
                        e.add_term(row[i], 1.0);
                    }
                    model.constrain(e, Sense::Eq, 0.0, format!("mask_sum{i}"));
                }
                (RegimeSelection::OneHot(r), masked)
            }
        };
        Ok(BuildCtx { model, layout: Layout { x, selection, regimes, masked }, box_deviation: None })
    }

    /// `r_s y` for a bounded variable `y`.
    pub fn gate(&mut self, s: usize, y: Var) -> Result<LinExpr<f64>> {
        Ok(match &self.layout.selection {
            RegimeSelection::OneHot(r) => LinExpr::term(add_mccormick(&mut self.model, r[s], y)?, 1.0),
            RegimeSelection::Fixed(f) if *f == s => LinExpr::term(y, 1.0),
            RegimeSelection::Fixed(_) => LinExpr::new(),
        })
    }

    /// Forbids regime `s`.
    pub fn exclude(&mut self, s: usize) {
        let e = self.layout.indicator(s);
        if !e.is_constant() {
            self.model.constrain(e, Sense::Le, 0.0, format!("exclude_r{s}"));
        }
    }
}

/// Requested selection when building a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    OneHot,
    Fixed(usize),
}
