//! Uncertainty regimes and the cost maps they induce.
//!
//! Box-type maps are `c(u) = c0 + C u` with `u` in `[-1,1]^q`. Interval maps
//! are the diagonal special case and are kept as bounds. Budgeted maps
//! describe weights `a0_i + abar_i u_i` with `sum u = budget`, `u` in `[0,1]^n`.

use std::fmt;

use thiserror::Error;

use crate::milp::{add_l1_epigraph, LinExpr, Model, Sense, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("interval {index} has lower bound above upper bound")]
    InvertedInterval { index: usize },
    #[error("correlated loading entry ({row}, {col}) is negative")]
    NegativeLoading { row: usize, col: usize },
    #[error("loading matrix rows have different lengths")]
    RaggedLoading,
    #[error("budget {budget} outside 0..={items}")]
    BudgetOutOfRange { budget: usize, items: usize },
    #[error("deviation of item {index} is negative")]
    NegativeDeviation { index: usize },
    #[error("non-finite value in cost map")]
    NonFinite,
    #[error("{kind} cost maps are not supported here: {reason}")]
    Unsupported { kind: CostKind, reason: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CostKind {
    Interval,
    Correlated,
    GeneralBox,
    Gamma,
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Interval => "interval",
            CostKind::Correlated => "correlated",
            CostKind::GeneralBox => "box",
            CostKind::Gamma => "gamma",
        })
    }
}

/// Uncertain cost (or weight) vector of one regime.
///
/// Build through the checked constructors; the variants are public for
/// pattern matching.
#[derive(Clone, Debug, PartialEq)]
pub enum CostMap {
    Interval { lower: Vec<f64>, upper: Vec<f64> },
    /// Nonnegative loading, so the worst case of every nonnegative `x` sits
    /// at `u = e`.
    Correlated { nominal: Vec<f64>, loading: Vec<Vec<f64>> },
    GeneralBox { nominal: Vec<f64>, loading: Vec<Vec<f64>> },
    Gamma { nominal: Vec<f64>, deviation: Vec<f64>, budget: usize },
}

/// `c0 + C u` form of a box-type map; `loading[i]` is row `i` of `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxForm {
    pub nominal: Vec<f64>,
    pub loading: Vec<Vec<f64>>,
    pub width: usize,
}

impl BoxForm {
    /// `C^T x`.
    pub fn deviation(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.width];
        for (row, &xi) in self.loading.iter().zip(x) {
            if xi != 0.0 {
                for (gj, &c) in g.iter_mut().zip(row) {
                    *gj += c * xi;
                }
            }
        }
        g
    }

    pub fn realize(&self, u: &[f64]) -> Vec<f64> {
        self.nominal
            .iter()
            .zip(&self.loading)
            .map(|(c0, row)| c0 + row.iter().zip(u).map(|(c, u)| c * u).sum::<f64>())
            .collect()
    }
}

fn check_finite(v: &[f64]) -> Result<(), UncertaintyError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(UncertaintyError::NonFinite)
    }
}

fn check_loading(n: usize, loading: &[Vec<f64>]) -> Result<usize, UncertaintyError> {
    if loading.len() != n {
        return Err(UncertaintyError::DimensionMismatch { expected: n, found: loading.len() });
    }
    let q = loading.first().map_or(0, Vec::len);
    if loading.iter().any(|r| r.len() != q) {
        return Err(UncertaintyError::RaggedLoading);
    }
    for row in loading {
        check_finite(row)?;
    }
    Ok(q)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CostMap {
    pub fn interval(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, UncertaintyError> {
        let cm = CostMap::Interval { lower, upper };
        cm.validate()?;
        Ok(cm)
    }

    pub fn correlated(nominal: Vec<f64>, loading: Vec<Vec<f64>>) -> Result<Self, UncertaintyError> {
        let cm = CostMap::Correlated { nominal, loading };
        cm.validate()?;
        Ok(cm)
    }

    pub fn general_box(nominal: Vec<f64>, loading: Vec<Vec<f64>>) -> Result<Self, UncertaintyError> {
        let cm = CostMap::GeneralBox { nominal, loading };
        cm.validate()?;
        Ok(cm)
    }

    pub fn gamma(nominal: Vec<f64>, deviation: Vec<f64>, budget: usize) -> Result<Self, UncertaintyError> {
        let cm = CostMap::Gamma { nominal, deviation, budget };
        cm.validate()?;
        Ok(cm)
    }

    pub fn validate(&self) -> Result<(), UncertaintyError> {
        match self {
            CostMap::Interval { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(UncertaintyError::DimensionMismatch { expected: lower.len(), found: upper.len() });
                }
                check_finite(lower)?;
                check_finite(upper)?;
                if let Some(index) = lower.iter().zip(upper).position(|(l, u)| l > u) {
                    return Err(UncertaintyError::InvertedInterval { index });
                }
            }
            CostMap::Correlated { nominal, loading } => {
                check_finite(nominal)?;
                check_loading(nominal.len(), loading)?;
                for (row, r) in loading.iter().enumerate() {
                    if let Some(col) = r.iter().position(|&c| c < 0.0) {
                        return Err(UncertaintyError::NegativeLoading { row, col });
                    }
                }
            }
            CostMap::GeneralBox { nominal, loading } => {
                check_finite(nominal)?;
                check_loading(nominal.len(), loading)?;
            }
            CostMap::Gamma { nominal, deviation, budget } => {
                if nominal.len() != deviation.len() {
                    return Err(UncertaintyError::DimensionMismatch {
                        expected: nominal.len(),
                        found: deviation.len(),
                    });
                }
                check_finite(nominal)?;
                check_finite(deviation)?;
                if let Some(index) = deviation.iter().position(|&d| d < 0.0) {
                    return Err(UncertaintyError::NegativeDeviation { index });
                }
                if *budget > nominal.len() {
                    return Err(UncertaintyError::BudgetOutOfRange { budget: *budget, items: nominal.len() });
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> CostKind {
        match self {
            CostMap::Interval { .. } => CostKind::Interval,
            CostMap::Correlated { .. } => CostKind::Correlated,
            CostMap::GeneralBox { .. } => CostKind::GeneralBox,
            CostMap::Gamma { .. } => CostKind::Gamma,
        }
    }

    /// Number of decision coordinates the map prices.
    pub fn dim(&self) -> usize {
        match self {
            CostMap::Interval { lower, .. } => lower.len(),
            CostMap::Correlated { nominal, .. }
            | CostMap::GeneralBox { nominal, .. }
            | CostMap::Gamma { nominal, .. } => nominal.len(),
        }
    }

    /// Dimension of the uncertain parameter `u`.
    pub fn uncertainty_dim(&self) -> usize {
        match self {
            CostMap::Interval { lower, .. } => lower.len(),
            CostMap::Correlated { loading, .. } | CostMap::GeneralBox { loading, .. } => {
                loading.first().map_or(0, Vec::len)
            }
            CostMap::Gamma { nominal, .. } => nominal.len(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), UncertaintyError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(UncertaintyError::DimensionMismatch { expected: self.dim(), found: x.len() })
        }
    }

    /// Box form; intervals become midpoint plus diagonal half-widths.
    pub fn to_box(&self) -> Result<BoxForm, UncertaintyError> {
        match self {
            CostMap::Interval { lower, upper } => {
                let n = lower.len();
                let nominal = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
                let loading = (0..n)
                    .map(|i| {
                        let mut row = vec![0.0; n];
                        row[i] = 0.5 * (upper[i] - lower[i]);
                        row
                    })
                    .collect();
                Ok(BoxForm { nominal, loading, width: n })
            }
            CostMap::Correlated { nominal, loading } | CostMap::GeneralBox { nominal, loading } => Ok(BoxForm {
                nominal: nominal.clone(),
                loading: loading.clone(),
                width: self.uncertainty_dim(),
            }),
            CostMap::Gamma { .. } => Err(UncertaintyError::Unsupported {
                kind: CostKind::Gamma,
                reason: "no box form",
            }),
        }
    }

    /// Per-coordinate worst-case costs when the worst case is linear in
    /// nonnegative `x` (interval and correlated maps).
    pub fn linear_worst_costs(&self) -> Option<Vec<f64>> {
        match self {
            CostMap::Interval { upper, .. } => Some(upper.clone()),
            CostMap::Correlated { nominal, loading } => {
                Some(nominal.iter().zip(loading).map(|(c, row)| c + row.iter().sum::<f64>()).collect())
            }
            _ => None,
        }
    }

    /// Counterpart of [`CostMap::linear_worst_costs`] for the best case.
    pub fn linear_best_costs(&self) -> Option<Vec<f64>> {
        match self {
            CostMap::Interval { lower, .. } => Some(lower.clone()),
            CostMap::Correlated { nominal, loading } => {
                Some(nominal.iter().zip(loading).map(|(c, row)| c - row.iter().sum::<f64>()).collect())
            }
            _ => None,
        }
    }

    /// Costs (or weights) realized at `u`.
    pub fn realize(&self, u: &[f64]) -> Result<Vec<f64>, UncertaintyError> {
        if u.len() != self.uncertainty_dim() {
            return Err(UncertaintyError::DimensionMismatch { expected: self.uncertainty_dim(), found: u.len() });
        }
        match self {
            CostMap::Gamma { nominal, deviation, .. } => {
                Ok(nominal.iter().zip(deviation).zip(u).map(|((a, d), u)| a + d * u).collect())
            }
            _ => Ok(self.to_box()?.realize(u)),
        }
    }

    pub fn worst_case_value(&self, x: &[f64]) -> Result<f64, UncertaintyError> {
        self.check_dim(x)?;
        Ok(match self {
            CostMap::Interval { upper, .. } => dot(upper, x),
            CostMap::Correlated { .. } => dot(&self.linear_worst_costs().unwrap_or_default(), x),
            CostMap::GeneralBox { nominal, .. } => {
                let g = self.to_box()?.deviation(x);
                dot(nominal, x) + g.iter().map(|v| v.abs()).sum::<f64>()
            }
            CostMap::Gamma { nominal, budget, .. } => {
                let d = self.sorted_deviations(x);
                dot(nominal, x) + d.iter().rev().take(*budget).sum::<f64>()
            }
        })
    }

    /// For budgeted maps the budget must be spent exactly, so the best case
    /// carries the smallest forced deviations.
    pub fn best_case_value(&self, x: &[f64]) -> Result<f64, UncertaintyError> {
        self.check_dim(x)?;
        Ok(match self {
            CostMap::Interval { lower, .. } => dot(lower, x),
            CostMap::Correlated { .. } => dot(&self.linear_best_costs().unwrap_or_default(), x),
            CostMap::GeneralBox { nominal, .. } => {
                let g = self.to_box()?.deviation(x);
                dot(nominal, x) - g.iter().map(|v| v.abs()).sum::<f64>()
            }
            CostMap::Gamma { nominal, budget, .. } => {
                let d = self.sorted_deviations(x);
                dot(nominal, x) + d.iter().take(*budget).sum::<f64>()
            }
        })
    }

    fn sorted_deviations(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CostMap::Gamma { deviation, .. } => {
                let mut d: Vec<f64> = deviation.iter().zip(x).map(|(a, x)| a * x).collect();
                d.sort_by(f64::total_cmp);
                d
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Upper,
    Lower,
}

/// Adds rows forcing `bound >= ||rows||_1`, the dual-cone condition of an
/// l-infinity box. The lower orientation negates the rows first, which
/// leaves the norm unchanged but keeps the emitted names distinct.
pub fn dual_cone_rows(
    cm: &CostMap,
    model: &mut Model<f64>,
    rows: &[LinExpr<f64>],
    bound: Var,
    orientation: Orientation,
) -> Result<Var, UncertaintyError> {
    if cm.kind() == CostKind::Gamma {
        return Err(UncertaintyError::Unsupported {
            kind: CostKind::Gamma,
            reason: "budgeted sets are dualized by the knapsack module",
        });
    }
    let (rows, tag): (Vec<LinExpr<f64>>, &str) = match orientation {
        Orientation::Upper => (rows.to_vec(), "cone_up"),
        Orientation::Lower => (rows.iter().map(|r| -r.clone()).collect(), "cone_lo"),
    };
    let t = add_l1_epigraph(model, &rows, tag);
    model.constrain(LinExpr::from_terms([(bound, 1.0), (t, -1.0)]), Sense::Ge, 0.0, format!("{tag}_bound"));
    Ok(t)
}

/// One selectable uncertainty set together with its activation cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Regime {
    pub label: String,
    pub activation_cost: f64,
    pub cost_map: CostMap,
}

impl Regime {
    pub fn new(label: impl Into<String>, activation_cost: f64, cost_map: CostMap) -> Self {
        Regime { label: label.into(), activation_cost, cost_map }
    }
}
