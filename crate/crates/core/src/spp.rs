//! Shortest paths with endogenous arc-cost uncertainty.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::milp::Sense;
use crate::robust::{CertainRow, EndogenousProblem};
use crate::uncertainty::{CostKind, CostMap, Regime};

/// Directed graph with one cost map per regime over its arcs. Parallel arcs
/// are distinct entries of `arcs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SppInstance {
    label: String,
    node_count: usize,
    arcs: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
    regimes: Vec<Regime>,
}

impl SppInstance {
    pub fn new(
        label: impl Into<String>,
        node_count: usize,
        arcs: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
        regimes: Vec<Regime>,
    ) -> Result<Self> {
        if source >= node_count || sink >= node_count {
            return Err(Error::InvalidInput(format!("source {source} or sink {sink} outside {node_count} nodes")));
        }
        if source == sink {
            return Err(Error::InvalidInput("source and sink coincide".into()));
        }
        for (k, &(t, h)) in arcs.iter().enumerate() {
            if t >= node_count || h >= node_count {
                return Err(Error::InvalidInput(format!("arc {k} ({t}, {h}) references a missing node")));
            }
            if t == h {
                return Err(Error::InvalidInput(format!("arc {k} is a self-loop at node {t}")));
            }
        }
        if regimes.is_empty() {
            return Err(Error::InvalidInput("at least one regime is required".into()));
        }
        for (s, r) in regimes.iter().enumerate() {
            r.cost_map.validate()?;
            if r.cost_map.dim() != arcs.len() {
                return Err(Error::InvalidInput(format!(
                    "regime {s} prices {} arcs, the graph has {}",
                    r.cost_map.dim(),
                    arcs.len()
                )));
            }
        }
        Ok(SppInstance { label: label.into(), node_count, arcs, source, sink, regimes })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    /// Node-arc incidence matrix (`-1` at the tail, `+1` at the head) and
    /// demand vector (`-1` at the source, `+1` at the sink).
    pub fn incidence(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut e = vec![vec![0.0; self.arcs.len()]; self.node_count];
        for (k, &(t, h)) in self.arcs.iter().enumerate() {
            e[t][k] = -1.0;
            e[h][k] = 1.0;
        }
        let mut d = vec![0.0; self.node_count];
        d[self.source] = -1.0;
        d[self.sink] = 1.0;
        (e, d)
    }

    pub fn sink_reachable(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![self.source];
        seen[self.source] = true;
        while let Some(v) = stack.pop() {
            for &(t, h) in &self.arcs {
                if t == v && !seen[h] {
                    seen[h] = true;
                    stack.push(h);
                }
            }
        }
        seen[self.sink]
    }

    /// Flow-conservation rows. The sink row is implied by the others and
    /// left out.
    pub fn flow_rows(&self) -> Vec<CertainRow> {
        let (e, d) = self.incidence();
        (0..self.node_count)
            .filter(|&v| v != self.sink)
            .map(|v| CertainRow {
                coeffs: e[v].iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(k, a)| (k, *a)).collect(),
                sense: Sense::Eq,
                rhs: d[v],
            })
            .collect()
    }

    pub fn build_problem(&self, flavor: Flavor) -> Result<EndogenousProblem> {
        let kind = self.regimes[0].cost_map.kind();
        let regimes = match (flavor, kind) {
            (Flavor::Interval, CostKind::Interval) | (Flavor::Correlated, CostKind::Correlated) => {
                self.regimes.clone()
            }
            (Flavor::Box, CostKind::Interval | CostKind::Correlated | CostKind::GeneralBox) => self
                .regimes
                .iter()
                .map(|r| {
                    let form = r.cost_map.to_box()?;
                    let cm = CostMap::general_box(form.nominal, form.loading)?;
                    Ok(Regime::new(r.label.clone(), r.activation_cost, cm))
                })
                .collect::<Result<_>>()?,
            _ => {
                return Err(Error::InvalidInput(format!("{flavor} model requested for {kind} cost maps")));
            }
        };
        let lp_exact = flavor != Flavor::Box;
        EndogenousProblem::new(self.label.clone(), self.arcs.len(), self.flow_rows(), regimes, lp_exact)
    }

    /// Simple source-sink paths as arc indicator vectors, at most `cap` of
    /// them.
    pub fn enumerate_paths(&self, cap: usize) -> PathEnumeration {
        let mut out = PathEnumeration { paths: Vec::new(), truncated: false };
        let mut on_path = vec![false; self.node_count];
        let mut used = vec![0.0; self.arcs.len()];
        on_path[self.source] = true;
        self.extend_paths(self.source, &mut on_path, &mut used, cap, &mut out);
        out
    }

    fn extend_paths(
        &self,
        v: usize,
        on_path: &mut [bool],
        used: &mut [f64],
        cap: usize,
        out: &mut PathEnumeration,
    ) {
        if v == self.sink {
            if out.paths.len() >= cap {
                out.truncated = true;
            } else {
                out.paths.push(used.to_vec());
            }
            return;
        }
        for (k, &(t, h)) in self.arcs.iter().enumerate() {
            if out.truncated {
                return;
            }
            if t != v || on_path[h] {
                continue;
            }
            on_path[h] = true;
            used[k] = 1.0;
            self.extend_paths(h, on_path, used, cap, out);
            used[k] = 0.0;
            on_path[h] = false;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEnumeration {
    pub paths: Vec<Vec<f64>>,
    /// Set when more paths exist than the cap allowed.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Interval,
    Correlated,
    Box,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Interval => "interval",
            Flavor::Correlated => "correlated",
            Flavor::Box => "box",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(Flavor::Interval),
            "correlated" => Ok(Flavor::Correlated),
            "box" => Ok(Flavor::Box),
            _ => Err(Error::InvalidInput(format!("unknown flavor '{s}'"))),
        }
    }
}

impl Flavor {
    /// Flavor that keeps a cost-map kind as is.
    pub fn of(kind: CostKind) -> Result<Self> {
        match kind {
            CostKind::Interval => Ok(Flavor::Interval),
            CostKind::Correlated => Ok(Flavor::Correlated),
            CostKind::GeneralBox => Ok(Flavor::Box),
            CostKind::Gamma => Err(Error::Unsupported("budgeted maps are not used for paths".into())),
        }
    }
}

fn interval_regime(label: &str, bounds: &[(f64, f64)]) -> Regime {
    let (lower, upper) = bounds.iter().copied().unzip();
    Regime::new(label, 0.0, CostMap::interval(lower, upper).expect("fixture bounds are ordered"))
}

/// Three ways from S to one of two targets (E1 and E2 reach T1, E3 reaches
/// T2) under three regimes; targets feed a super-sink through free arcs.
/// Nodes are S = 0, T1 = 1, T2 = 2, sink = 3.
pub fn example_three_regimes() -> SppInstance {
    let arcs = vec![(0, 1), (0, 1), (0, 2), (1, 3), (2, 3)];
    let free = (0.0, 0.0);
    let regimes = vec![
        interval_regime("U0", &[(4.0, 5.0), (4.0, 5.0), (4.0, 5.0), free, free]),
        interval_regime("U1", &[(3.0, 4.0), (2.0, 4.0), (3.0, 5.0), free, free]),
        interval_regime("U2", &[(2.0, 5.0), (2.0, 5.0), (1.0, 4.0), free, free]),
    ];
    SppInstance::new("three-regimes", 4, arcs, 0, 3, regimes).expect("fixture is valid")
}

/// Arc labels of [`example_three_regimes`].
pub const EXAMPLE_ARC_LABELS: [&str; 5] = ["E1", "E2", "E3", "T1-sink", "T2-sink"];

fn diamond_arcs() -> Vec<(usize, usize)> {
    vec![(0, 1), (0, 2), (1, 3), (2, 3)]
}

/// Two disjoint two-arc paths from node 0 to node 3, every arc in `[1, 2]`.
pub fn example_diamond_interval() -> SppInstance {
    let regime = interval_regime("U", &[(1.0, 2.0); 4]);
    SppInstance::new("diamond-interval", 4, diamond_arcs(), 0, 3, vec![regime]).expect("fixture is valid")
}

/// The diamond with every arc cost `1.5 + 0.5 u` for a single shared `u`.
pub fn example_diamond_correlated() -> SppInstance {
    let cm = CostMap::correlated(vec![1.5; 4], vec![vec![0.5]; 4]).expect("fixture is valid");
    SppInstance::new("diamond-correlated", 4, diamond_arcs(), 0, 3, vec![Regime::new("U", 0.0, cm)])
        .expect("fixture is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    /// Arcs between nearby nodes with probability one half; interval maps.
    EpsilonStudy,
    /// Arcs with probability decaying in index distance; interval maps.
    BilevelInterval,
    /// Same graphs with general box maps.
    BilevelBox,
    /// Same graphs with nonnegative loadings (correlated maps).
    BilevelCorrelated,
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::EpsilonStudy => "epsilon_study",
            GeneratorKind::BilevelInterval => "bilevel_interval",
            GeneratorKind::BilevelBox => "bilevel_box",
            GeneratorKind::BilevelCorrelated => "bilevel_correlated",
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "epsilon_study" | "spp_epsilon" => Ok(GeneratorKind::EpsilonStudy),
            "bilevel_interval" => Ok(GeneratorKind::BilevelInterval),
            "bilevel_box" => Ok(GeneratorKind::BilevelBox),
            "bilevel_correlated" => Ok(GeneratorKind::BilevelCorrelated),
            _ => Err(Error::InvalidInput(format!("unknown generator '{s}'"))),
        }
    }
}

/// When an arc `(i, j)`, `i < j`, is drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArcRule {
    /// With probability `p` when `j - i <= max_gap`.
    Window { max_gap: usize, p: f64 },
    /// With probability `scale / (j - i)`.
    Decay { scale: f64 },
}

impl ArcRule {
    fn probability(&self, gap: usize) -> f64 {
        match *self {
            ArcRule::Window { max_gap, p } => {
                if gap <= max_gap {
                    p
                } else {
                    0.0
                }
            }
            ArcRule::Decay { scale } => scale / gap as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorParams {
    pub kind: GeneratorKind,
    pub node_count: usize,
    pub regime_count: usize,
    /// Loading columns for box and correlated kinds.
    pub box_dim: usize,
    pub seed: u64,
    /// Overrides the kind's default arc rule.
    pub arc_rule: Option<ArcRule>,
}

impl GeneratorParams {
    pub fn new(kind: GeneratorKind, node_count: usize, regime_count: usize, seed: u64) -> Self {
        GeneratorParams { kind, node_count, regime_count, box_dim: 0, seed, arc_rule: None }
    }

    pub fn with_box_dim(mut self, q: usize) -> Self {
        self.box_dim = q;
        self
    }

    pub fn with_arc_rule(mut self, rule: ArcRule) -> Self {
        self.arc_rule = Some(rule);
        self
    }

    fn rule(&self) -> ArcRule {
        self.arc_rule.unwrap_or(match self.kind {
            GeneratorKind::EpsilonStudy => ArcRule::Window { max_gap: 10, p: 0.5 },
            _ => ArcRule::Decay { scale: 0.3 },
        })
    }
}

const GENERATOR_RETRIES: u64 = 64;

/// Seeded instance with node 0 as source and the last node as sink. Draws
/// that leave the sink unreachable are redrawn from derived seeds.
///
/// Draw order: one uniform per pair `(i, j)`, `i < j`, in lexicographic
/// order; then per arc, per regime, the map entries (lower then upper, or
/// the nominal cost then the loading row).
pub fn generate_instance(params: &GeneratorParams) -> Result<SppInstance> {
    if params.node_count < 2 || params.regime_count == 0 {
        return Err(Error::InvalidInput("need at least two nodes and one regime".into()));
    }
    let boxed = matches!(params.kind, GeneratorKind::BilevelBox | GeneratorKind::BilevelCorrelated);
    if boxed && params.box_dim == 0 {
        return Err(Error::InvalidInput("box generators need a positive loading width".into()));
    }
    for attempt in 0..GENERATOR_RETRIES {
        let seed = params.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let inst = draw(params, seed)?;
        if inst.sink_reachable() {
            return Ok(inst);
        }
    }
    Err(Error::InvalidInput(format!(
        "no connected instance after {GENERATOR_RETRIES} draws from seed {}",
        params.seed
    )))
}

fn draw(params: &GeneratorParams, seed: u64) -> Result<SppInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.node_count;
    let rule = params.rule();
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < rule.probability(j - i) {
                arcs.push((i, j));
            }
        }
    }
    let m = arcs.len();
    let sc = params.regime_count;
    let q = params.box_dim;
    let mut maps: Vec<Vec<(f64, Vec<f64>)>> = vec![Vec::with_capacity(m); sc];
    for _ in 0..m {
        for map in maps.iter_mut() {
            let entry = match params.kind {
                GeneratorKind::EpsilonStudy | GeneratorKind::BilevelInterval => {
                    let lo = rng.gen_range(8.0..=10.0);
                    let up = rng.gen_range(10.0..=12.0);
                    (lo, vec![up])
                }
                GeneratorKind::BilevelBox => {
                    let c0 = rng.gen_range(8.0..=12.0);
                    (c0, (0..q).map(|_| rng.gen_range(-0.5..=0.5)).collect())
                }
                GeneratorKind::BilevelCorrelated => {
                    let c0 = rng.gen_range(8.0..=12.0);
                    (c0, (0..q).map(|_| rng.gen_range(0.0..=0.5)).collect())
                }
            };
            map.push(entry);
        }
    }
    let regimes = maps
        .into_iter()
        .enumerate()
        .map(|(s, entries)| {
            let (first, rest): (Vec<f64>, Vec<Vec<f64>>) = entries.into_iter().unzip();
            let cm = match params.kind {
                GeneratorKind::EpsilonStudy | GeneratorKind::BilevelInterval => {
                    CostMap::interval(first, rest.into_iter().map(|r| r[0]).collect())?
                }
                GeneratorKind::BilevelBox => CostMap::general_box(first, rest)?,
                GeneratorKind::BilevelCorrelated => CostMap::correlated(first, rest)?,
            };
            Ok(Regime::new(format!("U{s}"), 0.0, cm))
        })
        .collect::<Result<Vec<_>>>()?;
    let label = format!("spp-{}-n{}-s{}-seed{}", params.kind.name(), n, sc, params.seed);
    SppInstance::new(label, n, arcs, 0, n - 1, regimes)
}
