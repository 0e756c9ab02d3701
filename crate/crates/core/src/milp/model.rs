use std::fmt::{self, Write as _};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::scalar::Scalar;

/// Handle to a model variable (its insertion index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a model constraint (its insertion index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug)]
pub struct VariableSpec<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    pub kind: VarKind,
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinExpr<T> {
    terms: Vec<(Var, T)>,
    constant: T,
}

impl<T: Scalar> Default for LinExpr<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LinExpr<T> {
    pub fn new() -> Self {
        LinExpr { terms: Vec::new(), constant: T::zero() }
    }

    pub fn constant(c: T) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn term(v: Var, c: T) -> Self {
        LinExpr { terms: vec![(v, c)], constant: T::zero() }
    }

    pub fn from_terms<I: IntoIterator<Item = (Var, T)>>(terms: I) -> Self {
        let mut e = Self::new();
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    pub fn add_term(&mut self, v: Var, c: T) {
        if c != T::zero() {
            self.terms.push((v, c));
        }
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant += c;
    }

    pub fn add_scaled(&mut self, other: &LinExpr<T>, k: T) {
        if k == T::zero() {
            return;
        }
        for &(v, c) in &other.terms {
            self.add_term(v, c * k);
        }
        self.constant += other.constant * k;
    }

    pub fn constant_part(&self) -> T {
        self.constant
    }

    /// Terms after merging duplicates and dropping zeros, sorted by variable.
    pub fn terms(&self) -> Vec<(Var, T)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(Var, T)> = Vec::with_capacity(t.len());
        for (v, c) in t {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != T::zero());
        out
    }

    pub fn normalized(&self) -> Self {
        LinExpr { terms: self.terms(), constant: self.constant }
    }

    pub fn is_constant(&self) -> bool {
        self.terms().is_empty()
    }

    pub fn eval(&self, values: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(v, c)| acc + c * values[v.0])
    }

    pub fn max_var(&self) -> Option<Var> {
        self.terms.iter().map(|&(v, _)| v).max()
    }
}

impl<T: Scalar> From<Var> for LinExpr<T> {
    fn from(v: Var) -> Self {
        LinExpr::term(v, T::one())
    }
}

impl<T: Scalar> AddAssign<&LinExpr<T>> for LinExpr<T> {
    fn add_assign(&mut self, rhs: &LinExpr<T>) {
        self.add_scaled(rhs, T::one());
    }
}

impl<T: Scalar> SubAssign<&LinExpr<T>> for LinExpr<T> {
    fn sub_assign(&mut self, rhs: &LinExpr<T>) {
        self.add_scaled(rhs, -T::one());
    }
}

impl<T: Scalar> Add for LinExpr<T> {
    type Output = LinExpr<T>;
    fn add(mut self, rhs: LinExpr<T>) -> LinExpr<T> {
        self += &rhs;
        self
    }
}

impl<T: Scalar> Sub for LinExpr<T> {
    type Output = LinExpr<T>;
    fn sub(mut self, rhs: LinExpr<T>) -> LinExpr<T> {
        self -= &rhs;
        self
    }
}

impl<T: Scalar> Mul<T> for LinExpr<T> {
    type Output = LinExpr<T>;
    fn mul(self, k: T) -> LinExpr<T> {
        let mut e = LinExpr::new();
        e.add_scaled(&self, k);
        e
    }
}

impl<T: Scalar> Neg for LinExpr<T> {
    type Output = LinExpr<T>;
    fn neg(self) -> LinExpr<T> {
        self * -T::one()
    }
}

/// A linear row `expr sense rhs`; any constant in the source expression is
/// moved to the right-hand side.
#[derive(Clone, Debug)]
pub struct Constraint<T> {
    pub expr: LinExpr<T>,
    pub sense: Sense,
    pub rhs: T,
    pub tag: String,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(expr: LinExpr<T>, sense: Sense, rhs: T, tag: impl Into<String>) -> Self {
        let k = expr.constant_part();
        let expr = LinExpr { terms: expr.terms(), constant: T::zero() };
        Constraint { expr, sense, rhs: rhs - k, tag: tag.into() }
    }

    /// Signed violation at `values` (positive means violated).
    pub fn violation(&self, values: &[T]) -> T {
        let lhs = self.expr.eval(values);
        match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("constraint `{tag}` references unknown variable #{index}")]
    DanglingVariable { tag: String, index: usize },
    #[error("variable `{name}` has lower bound above upper bound")]
    InvertedBounds { name: String },
    #[error("binary variable `{name}` has bounds outside [0,1]")]
    BinaryBounds { name: String },
    #[error("variable `{name}` needs finite bounds: {reason}")]
    UnboundedFactor { name: String, reason: &'static str },
    #[error("LP solve requested on a model with binary variable `{name}`")]
    NotContinuous { name: String },
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    pub(crate) variables: Vec<VariableSpec<T>>,
    pub(crate) constraints: Vec<Constraint<T>>,
    pub(crate) objective: LinExpr<T>,
    pub(crate) direction: Direction,
}

impl<T: Scalar> Model<T> {
    pub fn new(direction: Direction) -> Self {
        Model {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: LinExpr::new(),
            direction,
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: T,
        upper: T,
        kind: VarKind,
    ) -> Result<Var, ModelError> {
        let name = name.into();
        if lower > upper {
            return Err(ModelError::InvertedBounds { name });
        }
        if kind == VarKind::Binary && (lower < T::zero() || upper > T::one()) {
            return Err(ModelError::BinaryBounds { name });
        }
        self.variables.push(VariableSpec { name, lower, upper, kind });
        Ok(Var(self.variables.len() - 1))
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Var {
        self.add_var(name, T::zero(), T::one(), VarKind::Binary).expect("unit bounds")
    }

    /// Continuous variable; panics on inverted bounds (a programming error).
    pub fn add_continuous(&mut self, name: impl Into<String>, lower: T, upper: T) -> Var {
        self.add_var(name, lower, upper, VarKind::Continuous).expect("ordered bounds")
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> Var {
        self.add_continuous(name, T::neg_infinity(), T::infinity())
    }

    pub fn add_constraint(&mut self, c: Constraint<T>) -> Result<ConstraintId, ModelError> {
        if let Some(v) = c.expr.max_var() {
            if v.0 >= self.variables.len() {
                return Err(ModelError::DanglingVariable { tag: c.tag, index: v.0 });
            }
        }
        self.constraints.push(c);
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// Adds `expr sense rhs`; panics on dangling variables, which only arise
    /// from mixing handles of different models.
    pub fn constrain(
        &mut self,
        expr: LinExpr<T>,
        sense: Sense,
        rhs: T,
        tag: impl Into<String>,
    ) -> ConstraintId {
        self.add_constraint(Constraint::new(expr, sense, rhs, tag))
            .expect("constraint uses variables of this model")
    }

    pub fn set_objective(&mut self, expr: LinExpr<T>) {
        self.objective = expr;
    }

    pub fn objective(&self) -> &LinExpr<T> {
        &self.objective
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn variables(&self) -> &[VariableSpec<T>] {
        &self.variables
    }

    pub fn variable(&self, v: Var) -> &VariableSpec<T> {
        &self.variables[v.0]
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_bounds(&mut self, v: Var, lower: T, upper: T) {
        let spec = &mut self.variables[v.0];
        spec.lower = lower;
        spec.upper = upper;
    }

    pub fn binaries(&self) -> impl Iterator<Item = Var> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == VarKind::Binary)
            .map(|(i, _)| Var(i))
    }

    pub fn has_binaries(&self) -> bool {
        self.binaries().next().is_some()
    }

    /// Largest violation of any row or bound at `values`.
    pub fn max_violation(&self, values: &[T]) -> T {
        let mut worst = T::zero();
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        for (spec, &x) in self.variables.iter().zip(values) {
            worst = worst.max(spec.lower - x).max(x - spec.upper);
        }
        worst
    }

    /// Plain-text listing, one row per line as `name: expr sense rhs`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let dir = match self.direction {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        };
        let _ = writeln!(out, "{dir}: {}", self.format_expr(&self.objective));
        for (i, c) in self.constraints.iter().enumerate() {
            let name = if c.tag.is_empty() { format!("c{i}") } else { c.tag.clone() };
            let _ = writeln!(out, "{name}: {} {} {}", self.format_expr(&c.expr), c.sense, c.rhs);
        }
        for spec in &self.variables {
            let kind = match spec.kind {
                VarKind::Continuous => "",
                VarKind::Binary => " binary",
            };
            let _ = writeln!(out, "bounds: {} <= {} <= {}{kind}", spec.lower, spec.name, spec.upper);
        }
        out
    }

    fn format_expr(&self, e: &LinExpr<T>) -> String {
        let mut s = String::new();
        for (k, (v, c)) in e.terms().into_iter().enumerate() {
            let name = &self.variables[v.0].name;
            if k == 0 {
                let _ = write!(s, "{c} {name}");
            } else if c < T::zero() {
                let _ = write!(s, " - {} {name}", -c);
            } else {
                let _ = write!(s, " + {c} {name}");
            }
        }
        let k = e.constant_part();
        if k != T::zero() || s.is_empty() {
            if s.is_empty() {
                let _ = write!(s, "{k}");
            } else {
                let _ = write!(s, " + {k}");
            }
        }
        s
    }
}
