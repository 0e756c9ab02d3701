//! Instance files (JSON) and their digests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::knapsack::KnapsackInstance;
use crate::spp::SppInstance;
use crate::uncertainty::{CostKind, CostMap, Regime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemType {
    Spp,
    Knapsack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyType {
    Interval,
    Correlated,
    Box,
    Gamma,
}

impl From<CostKind> for UncertaintyType {
    fn from(k: CostKind) -> Self {
        match k {
            CostKind::Interval => UncertaintyType::Interval,
            CostKind::Correlated => UncertaintyType::Correlated,
            CostKind::GeneralBox => UncertaintyType::Box,
            CostKind::Gamma => UncertaintyType::Gamma,
        }
    }
}

/// One regime entry. Which fields are required depends on the file's
/// uncertainty type: `lower`/`upper`, `c0`/`C`, or `abar`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<Vec<f64>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub loading: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abar: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SppFile {
    #[serde(rename = "type")]
    pub problem: ProblemType,
    pub uncertainty: UncertaintyType,
    #[serde(default)]
    pub label: String,
    pub nodes: usize,
    pub arcs: Vec<(usize, usize)>,
    pub source: usize,
    pub sink: usize,
    pub regimes: Vec<RegimeEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnapsackFile {
    #[serde(rename = "type")]
    pub problem: ProblemType,
    pub uncertainty: UncertaintyType,
    #[serde(default)]
    pub label: String,
    pub c: Vec<f64>,
    pub a0: Vec<f64>,
    pub b: f64,
    pub gamma: usize,
    pub regimes: Vec<RegimeEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InstanceFile {
    Spp(SppFile),
    Knapsack(KnapsackFile),
}

#[derive(Deserialize)]
struct Header {
    #[serde(rename = "type")]
    problem: ProblemType,
}

/// A loaded instance ready for solving.
#[derive(Clone, Debug)]
pub enum Instance {
    Spp(SppInstance),
    Knapsack(KnapsackInstance),
}

impl Instance {
    pub fn label(&self) -> &str {
        match self {
            Instance::Spp(i) => i.label(),
            Instance::Knapsack(k) => crate::robust::RobustFormulation::label(k),
        }
    }
}

fn missing(i: usize, field: &str, kind: UncertaintyType) -> Error {
    Error::InvalidInput(format!("regimes[{i}].{field}: required for {kind:?} uncertainty"))
}

fn field_error(i: usize, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("regimes[{i}]: {e}"))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let json = |e: serde_json::Error| Error::InvalidInput(format!("line {}, column {}: {e}", e.line(), e.column()));
        let header: Header = serde_json::from_str(text).map_err(json)?;
        Ok(match header.problem {
            ProblemType::Spp => InstanceFile::Spp(serde_json::from_str(text).map_err(json)?),
            ProblemType::Knapsack => InstanceFile::Knapsack(serde_json::from_str(text).map_err(json)?),
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = match self {
            InstanceFile::Spp(f) => serde_json::to_string_pretty(f),
            InstanceFile::Knapsack(f) => serde_json::to_string_pretty(f),
        }
        .expect("instance files serialize");
        s.push('\n');
        s
    }

    /// SHA-256 of the compact serialization, in hex.
    pub fn digest(&self) -> String {
        let compact = match self {
            InstanceFile::Spp(f) => serde_json::to_vec(f),
            InstanceFile::Knapsack(f) => serde_json::to_vec(f),
        }
        .expect("instance files serialize");
        Sha256::digest(&compact).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_spp(inst: &SppInstance) -> Self {
        let kind = inst.regimes()[0].cost_map.kind();
        let regimes = inst.regimes().iter().map(regime_entry).collect();
        InstanceFile::Spp(SppFile {
            problem: ProblemType::Spp,
            uncertainty: kind.into(),
            label: inst.label().to_string(),
            nodes: inst.node_count(),
            arcs: inst.arcs().to_vec(),
            source: inst.source(),
            sink: inst.sink(),
            regimes,
        })
    }

    pub fn from_knapsack(inst: &KnapsackInstance) -> Self {
        use crate::robust::RobustFormulation;
        let regimes = (0..inst.regime_count())
            .map(|s| RegimeEntry {
                label: None,
                cost: inst.activation_cost(s),
                lower: None,
                upper: None,
                c0: None,
                loading: None,
                abar: Some(inst.deviation(s).to_vec()),
            })
            .collect();
        InstanceFile::Knapsack(KnapsackFile {
            problem: ProblemType::Knapsack,
            uncertainty: UncertaintyType::Gamma,
            label: inst.label().to_string(),
            c: inst.utility().to_vec(),
            a0: inst.weight().to_vec(),
            b: inst.capacity(),
            gamma: inst.budget(),
            regimes,
        })
    }

    pub fn to_instance(&self) -> Result<Instance> {
        match self {
            InstanceFile::Spp(f) => {
                if f.problem != ProblemType::Spp {
                    return Err(Error::InvalidInput("type: expected \"spp\"".into()));
                }
                let regimes = f
                    .regimes
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let cm = match f.uncertainty {
                            UncertaintyType::Interval => CostMap::interval(
                                r.lower.clone().ok_or_else(|| missing(i, "lower", f.uncertainty))?,
                                r.upper.clone().ok_or_else(|| missing(i, "upper", f.uncertainty))?,
                            ),
                            UncertaintyType::Correlated | UncertaintyType::Box => {
                                let c0 = r.c0.clone().ok_or_else(|| missing(i, "c0", f.uncertainty))?;
                                let c = r.loading.clone().ok_or_else(|| missing(i, "C", f.uncertainty))?;
                                if f.uncertainty == UncertaintyType::Correlated {
                                    CostMap::correlated(c0, c)
                                } else {
                                    CostMap::general_box(c0, c)
                                }
                            }
                            UncertaintyType::Gamma => {
                                return Err(Error::InvalidInput(
                                    "uncertainty: \"gamma\" is only available for knapsack files".into(),
                                ))
                            }
                        }
                        .map_err(|e| field_error(i, e))?;
                        Ok(Regime::new(r.label.clone().unwrap_or_else(|| format!("U{i}")), r.cost, cm))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Instance::Spp(SppInstance::new(f.label.clone(), f.nodes, f.arcs.clone(), f.source, f.sink, regimes)?))
            }
            InstanceFile::Knapsack(f) => {
                if f.uncertainty != UncertaintyType::Gamma {
                    return Err(Error::InvalidInput("uncertainty: knapsack files use \"gamma\"".into()));
                }
                let mut deviation = Vec::with_capacity(f.regimes.len());
                let mut activation = Vec::with_capacity(f.regimes.len());
                for (i, r) in f.regimes.iter().enumerate() {
                    deviation.push(r.abar.clone().ok_or_else(|| missing(i, "abar", f.uncertainty))?);
                    activation.push(r.cost);
                }
                Ok(Instance::Knapsack(KnapsackInstance::new(
                    f.label.clone(),
                    f.c.clone(),
                    f.a0.clone(),
                    deviation,
                    f.b,
                    f.gamma,
                    activation,
                )?))
            }
        }
    }
}

fn regime_entry(r: &Regime) -> RegimeEntry {
    let mut e = RegimeEntry {
        label: Some(r.label.clone()),
        cost: r.activation_cost,
        lower: None,
        upper: None,
        c0: None,
        loading: None,
        abar: None,
    };
    match &r.cost_map {
        CostMap::Interval { lower, upper } => {
            e.lower = Some(lower.clone());
            e.upper = Some(upper.clone());
        }
        CostMap::Correlated { nominal, loading } | CostMap::GeneralBox { nominal, loading } => {
            e.c0 = Some(nominal.clone());
            e.loading = Some(loading.clone());
        }
        CostMap::Gamma { deviation, .. } => e.abar = Some(deviation.clone()),
    }
    e
}

pub fn load(path: &std::path::Path) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    InstanceFile::parse(&text).map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })
}
