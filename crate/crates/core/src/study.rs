//! Experiment harness: epsilon sweeps, pairwise trade-off probes, and the
//! regret-bound audit, with CSV output.
//!
//! Every CSV starts with `# key: value` header lines (seed, instance
//! digests, tolerances, policies) followed by a column row and the body.
//! Bodies contain no timings unless timings are requested, so reruns with
//! equal headers are byte-identical.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::preferences::{regret_exact_eval, PreferenceKind, RegretMode};
use crate::robust::{
    solve_endogenous_rc, solve_weighted, EndogenousProblem, Epsilon, Mode, RobustFormulation, SolveOptions,
    SolveOutput,
};

/// Values closer than this count as unchanged across probes.
pub const CHANGE_TOL: f64 = 1e-6;
/// Ranges below this leave normalized values empty.
pub const RANGE_TOL: f64 = 1e-9;

/// One problem in a study, with its id and file digest.
#[derive(Clone, Debug)]
pub struct StudyInstance<P> {
    pub id: String,
    pub digest: String,
    pub problem: P,
}

/// Formats `v` with 12 significant digits and no trailing zeros.
pub fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let magnitude = v.abs().log10().floor() as i32;
    if !(-6..=15).contains(&magnitude) {
        let s = format!("{v:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn opt_number(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| Error::InvalidInput(format!("'{s}': {e}")))
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub instance_id: String,
    pub probe_id: usize,
    pub mode: String,
    /// Attribute names joined by `|`.
    pub preferences: String,
    /// Epsilon, or the attribute weights joined by `|`.
    pub epsilon_or_alpha: String,
    pub regime_chosen: Option<usize>,
    pub worst_case: Option<f64>,
    pub preference_value_1: Option<f64>,
    pub preference_value_2: Option<f64>,
    pub normalized_1: Option<f64>,
    pub normalized_2: Option<f64>,
    pub time_seconds: Option<f64>,
    pub cuts_added: Option<usize>,
    /// `ok` or the error message of a failed solve.
    pub status: String,
}

pub const RESULT_COLUMNS: [&str; 14] = [
    "instance_id",
    "probe_id",
    "mode",
    "preferences",
    "epsilon_or_alpha",
    "regime_chosen",
    "worst_case",
    "preference_value_1",
    "preference_value_2",
    "normalized_1",
    "normalized_2",
    "time_seconds",
    "cuts_added",
    "status",
];

impl ResultRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.instance_id.clone(),
            self.probe_id.to_string(),
            self.mode.clone(),
            self.preferences.clone(),
            self.epsilon_or_alpha.clone(),
            self.regime_chosen.map(|s| s.to_string()).unwrap_or_default(),
            opt_number(self.worst_case),
            opt_number(self.preference_value_1),
            opt_number(self.preference_value_2),
            opt_number(self.normalized_1),
            opt_number(self.normalized_2),
            opt_number(self.time_seconds),
            self.cuts_added.map(|c| c.to_string()).unwrap_or_default(),
            self.status.clone(),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != RESULT_COLUMNS.len() {
            return Err(Error::InvalidInput(format!("expected {} fields, found {}", RESULT_COLUMNS.len(), r.len())));
        }
        let int = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| Error::InvalidInput(format!("'{s}': {e}")))
            }
        };
        Ok(ResultRow {
            instance_id: r[0].to_string(),
            probe_id: int(&r[1])?.unwrap_or(0),
            mode: r[2].to_string(),
            preferences: r[3].to_string(),
            epsilon_or_alpha: r[4].to_string(),
            regime_chosen: int(&r[5])?,
            worst_case: parse_opt(&r[6])?,
            preference_value_1: parse_opt(&r[7])?,
            preference_value_2: parse_opt(&r[8])?,
            normalized_1: parse_opt(&r[9])?,
            normalized_2: parse_opt(&r[10])?,
            time_seconds: parse_opt(&r[11])?,
            cuts_added: int(&r[12])?,
            status: r[13].to_string(),
        })
    }

    fn failed(instance_id: &str, probe_id: usize, mode: &str, prefs: &str, param: String, e: &Error) -> Self {
        ResultRow {
            instance_id: instance_id.to_string(),
            probe_id,
            mode: mode.to_string(),
            preferences: prefs.to_string(),
            epsilon_or_alpha: param,
            regime_chosen: None,
            worst_case: None,
            preference_value_1: None,
            preference_value_2: None,
            normalized_1: None,
            normalized_2: None,
            time_seconds: None,
            cuts_added: None,
            status: e.to_string().replace(['\n', '\r'], " "),
        }
    }
}

/// Ordered `key: value` pairs written above the columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunHeader {
    pub entries: Vec<(String, String)>,
}

impl RunHeader {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        Ok(())
    }

    fn standard<P>(instances: &[StudyInstance<P>], opts: &SolveOptions) -> Self {
        let mut h = RunHeader::default();
        h.push("instances", instances.len());
        h.push(
            "digests",
            instances.iter().map(|i| format!("{}={}", i.id, &i.digest[..i.digest.len().min(12)])).collect::<Vec<_>>().join(" "),
        );
        h.push("tolerance_total", "1e-6 relative");
        h.push("tolerance_integrality", <f64 as Scalar>::int_tol());
        h.push("tolerance_gap", <f64 as Scalar>::gap_tol());
        h.push("node_limit", opts.milp.max_nodes);
        h.push("tie_break", if opts.tie_break { "total, then worst case, then lowest regime index" } else { "off" });
        h.push("encoding", format!("{:?}", opts.encoding));
        h
    }
}

fn write_csv<W: Write>(mut out: W, header: &RunHeader, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("write failed: {e}"));
    header.write(&mut out).map_err(io)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("write failed: {e}"));
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn write_results<W: Write>(out: W, header: &RunHeader, rows: &[ResultRow]) -> Result<()> {
    let records: Vec<Vec<String>> = rows.iter().map(ResultRow::record).collect();
    write_csv(out, header, &RESULT_COLUMNS, &records)
}

/// Header and rows of a results CSV.
pub fn read_results<R: Read>(input: R) -> Result<(RunHeader, Vec<ResultRow>)> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text).map_err(|e| Error::InvalidInput(format!("read failed: {e}")))?;
    let mut header = RunHeader::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim_start().split_once(": ") {
            header.push(k, v);
        }
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let cols = r.headers().map_err(|e| Error::InvalidInput(e.to_string()))?.clone();
    if cols.iter().ne(RESULT_COLUMNS.iter().copied()) {
        return Err(Error::InvalidInput("unexpected column row".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(ResultRow::from_record(&rec.map_err(|e| Error::InvalidInput(e.to_string()))?)?);
    }
    Ok((header, rows))
}

/// `(v - min) / (max - min)` over the defined values, `None` where the
/// range vanishes.
pub fn normalize(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let defined = values.iter().flatten();
    let lo = defined.clone().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = defined.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !(hi - lo > RANGE_TOL) {
        return vec![None; values.len()];
    }
    values.iter().map(|v| v.map(|v| (v - lo) / (hi - lo))).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Timing {
    fn of(times: &[f64]) -> Option<Self> {
        if times.is_empty() {
            return None;
        }
        Some(Timing {
            mean: times.iter().sum::<f64>() / times.len() as f64,
            min: times.iter().copied().fold(f64::INFINITY, f64::min),
            max: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub preferences: Vec<PreferenceKind>,
    pub grid: Vec<f64>,
    pub relative: bool,
    pub record_times: bool,
    pub options: SolveOptions,
}

impl SweepConfig {
    /// Epsilon in 1%..10% (relative), three preferences.
    pub fn standard(options: SolveOptions) -> Self {
        SweepConfig {
            preferences: vec![
                PreferenceKind::Predictability,
                PreferenceKind::BestCase,
                PreferenceKind::Regret(RegretMode::Exact),
            ],
            grid: (1..=10).map(|k| k as f64 / 100.0).collect(),
            relative: true,
            record_times: false,
            options,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub header: RunHeader,
    pub rows: Vec<ResultRow>,
    pub averages: Vec<SweepPoint>,
    /// Per preference, when timings were recorded.
    pub timing: Vec<(PreferenceKind, Option<Timing>)>,
    /// `phi*` per instance.
    pub phi_star: Vec<Option<f64>>,
}

/// Mean normalized preference value and worst case at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub preference: PreferenceKind,
    pub epsilon: f64,
    pub mean_preference: Option<f64>,
    pub mean_worst_case: Option<f64>,
}

/// Solves every (instance, preference, epsilon) combination. Attribute 1 is
/// the preference, attribute 2 the worst case; both are normalized per
/// instance and preference over the grid.
pub fn epsilon_sweep<P>(instances: &[StudyInstance<P>], cfg: &SweepConfig) -> SweepReport
where
    P: RobustFormulation + Sync,
{
    let per_instance: Vec<(Vec<ResultRow>, Option<f64>)> = instances
        .par_iter()
        .map(|inst| {
            let rc = match solve_endogenous_rc(&inst.problem) {
                Ok(rc) => rc,
                Err(e) => {
                    let mut rows = Vec::new();
                    for pref in &cfg.preferences {
                        for (k, eps) in cfg.grid.iter().enumerate() {
                            rows.push(ResultRow::failed(&inst.id, k, "epsilon", pref.name(), format_number(*eps), &e));
                        }
                    }
                    return (rows, None);
                }
            };
            let opts = SolveOptions { rc: Some(rc.clone()), ..cfg.options.clone() };
            let mut rows = Vec::new();
            for pref in &cfg.preferences {
                let mut block = Vec::with_capacity(cfg.grid.len());
                for (k, &eps) in cfg.grid.iter().enumerate() {
                    let e = Epsilon { value: eps, relative: cfg.relative };
                    let row = match solve_weighted(&inst.problem, Mode::Epsilon(e), &[(*pref, 1.0)], &opts) {
                        Ok(out) => ResultRow {
                            instance_id: inst.id.clone(),
                            probe_id: k,
                            mode: "epsilon".into(),
                            preferences: pref.name().into(),
                            epsilon_or_alpha: format_number(eps),
                            regime_chosen: Some(out.regime),
                            worst_case: Some(out.worst_case),
                            preference_value_1: Some(out.preference_value),
                            preference_value_2: Some(out.worst_case),
                            normalized_1: None,
                            normalized_2: None,
                            time_seconds: cfg.record_times.then_some(out.wall_time),
                            cuts_added: Some(out.cuts_added),
                            status: "ok".into(),
                        },
                        Err(err) => ResultRow::failed(&inst.id, k, "epsilon", pref.name(), format_number(eps), &err),
                    };
                    block.push(row);
                }
                let n1 = normalize(&block.iter().map(|r| r.preference_value_1).collect::<Vec<_>>());
                let n2 = normalize(&block.iter().map(|r| r.preference_value_2).collect::<Vec<_>>());
                for (row, (a, b)) in block.iter_mut().zip(n1.into_iter().zip(n2)) {
                    row.normalized_1 = a;
                    row.normalized_2 = b;
                }
                rows.extend(block);
            }
            (rows, Some(rc.phi_star))
        })
        .collect();

    let phi_star = per_instance.iter().map(|(_, p)| *p).collect();
    let rows: Vec<ResultRow> = per_instance.into_iter().flat_map(|(r, _)| r).collect();
    let mut averages = Vec::new();
    let mut timing = Vec::new();
    for pref in &cfg.preferences {
        let of_pref: Vec<&ResultRow> = rows.iter().filter(|r| r.preferences == pref.name()).collect();
        for (k, &eps) in cfg.grid.iter().enumerate() {
            let at: Vec<&&ResultRow> = of_pref.iter().filter(|r| r.probe_id == k).collect();
            let mean = |f: fn(&ResultRow) -> Option<f64>| {
                let vals: Vec<f64> = at.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            averages.push(SweepPoint {
                preference: *pref,
                epsilon: eps,
                mean_preference: mean(|r| r.normalized_1),
                mean_worst_case: mean(|r| r.normalized_2),
            });
        }
        let times: Vec<f64> = of_pref.iter().filter_map(|r| r.time_seconds).collect();
        timing.push((*pref, Timing::of(&times)));
    }

    let mut header = RunHeader::standard(instances, &cfg.options);
    header.push("command", "epsilon-sweep");
    header.push("preferences", cfg.preferences.iter().map(|p| p.name()).collect::<Vec<_>>().join("|"));
    header.push("epsilon_grid", cfg.grid.iter().map(|e| format_number(*e)).collect::<Vec<_>>().join("|"));
    header.push("epsilon_semantics", if cfg.relative { "relative to |phi*|" } else { "absolute" });
    header.push("attributes", "1 = preference, 2 = worst case");
    header.push("normalization", "(v - min) / (max - min) per instance and preference over the grid; empty when the range is zero");
    header.push("timings", if cfg.record_times { "recorded" } else { "omitted" });
    SweepReport { header, rows, averages, timing, phi_star }
}

pub const SWEEP_SUMMARY_COLUMNS: [&str; 4] = ["preference", "epsilon", "mean_normalized_preference", "mean_normalized_worst_case"];

pub const TIMING_COLUMNS: [&str; 4] = ["preference", "T", "T_min", "T_max"];

impl SweepReport {
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        write_results(out, &self.header, &self.rows)
    }

    /// Per-epsilon averages (the curve data) followed by nothing else.
    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let records: Vec<Vec<String>> = self
            .averages
            .iter()
            .map(|a| {
                vec![
                    a.preference.name().to_string(),
                    format_number(a.epsilon),
                    opt_number(a.mean_preference),
                    opt_number(a.mean_worst_case),
                ]
            })
            .collect();
        write_csv(out, &self.header, &SWEEP_SUMMARY_COLUMNS, &records)
    }

    pub fn write_timing<W: Write>(&self, out: W) -> Result<()> {
        let records: Vec<Vec<String>> = self
            .timing
            .iter()
            .map(|(p, t)| {
                vec![
                    p.name().to_string(),
                    opt_number(t.map(|t| t.mean)),
                    opt_number(t.map(|t| t.min)),
                    opt_number(t.map(|t| t.max)),
                ]
            })
            .collect();
        write_csv(out, &self.header, &TIMING_COLUMNS, &records)
    }
}

/// A quantity compared in the trade-off study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attribute {
    WorstCase,
    Preference(PreferenceKind),
}

impl Attribute {
    pub fn name(&self) -> &'static str {
        match self {
            Attribute::WorstCase => "worst-case",
            Attribute::Preference(p) => p.name(),
        }
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst-case" | "worstcase" | "worst" => Ok(Attribute::WorstCase),
            _ => Ok(Attribute::Preference(s.parse()?)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TradeoffConfig {
    pub pair: (Attribute, Attribute),
    pub probes: usize,
    pub weights_seed: u64,
    /// Put the probes `(1, 0)` and `(0, 1)` first.
    pub include_extremes: bool,
    pub record_times: bool,
    pub options: SolveOptions,
}

/// One trade-off solution, kept for auditing.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSolution {
    pub instance: usize,
    pub probe: usize,
    pub x: Vec<f64>,
    pub regime: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffSummary {
    pub pair: String,
    pub timing: Option<Timing>,
    /// Instances where either attribute changed across probes.
    pub trade_offs: usize,
    /// Mean over instances of `(max - min) / max` in percent.
    pub delta_1: f64,
    pub delta_2: f64,
    pub instances: usize,
}

#[derive(Clone, Debug)]
pub struct TradeoffReport {
    pub header: RunHeader,
    pub rows: Vec<ResultRow>,
    pub summary: TradeoffSummary,
    pub solutions: Vec<ProbeSolution>,
}

pub const TRADEOFF_SUMMARY_COLUMNS: [&str; 7] = ["preferences", "T", "T_min", "T_max", "#TO", "Delta_1%", "Delta_2%"];

impl TradeoffReport {
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        write_results(out, &self.header, &self.rows)
    }

    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let s = &self.summary;
        let record = vec![
            s.pair.clone(),
            opt_number(s.timing.map(|t| t.mean)),
            opt_number(s.timing.map(|t| t.min)),
            opt_number(s.timing.map(|t| t.max)),
            s.trade_offs.to_string(),
            format_number(s.delta_1),
            format_number(s.delta_2),
        ];
        write_csv(out, &self.header, &TRADEOFF_SUMMARY_COLUMNS, &[record])
    }
}

fn attribute_value<P: RobustFormulation + ?Sized>(p: &P, a: Attribute, out: &SolveOutput) -> Result<f64> {
    match a {
        Attribute::WorstCase => Ok(out.worst_case),
        Attribute::Preference(k) => p.preference(&out.x, out.regime, k),
    }
}

/// Weight pairs per instance, drawn up front so results do not depend on
/// scheduling.
pub fn probe_weights(instances: usize, cfg: &TradeoffConfig) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.weights_seed);
    (0..instances)
        .map(|_| {
            let mut w = Vec::with_capacity(cfg.probes);
            if cfg.include_extremes {
                w.push((1.0, 0.0));
                w.push((0.0, 1.0));
            }
            while w.len() < cfg.probes {
                let a = rng.gen::<f64>();
                let b = rng.gen::<f64>();
                w.push((a, b));
            }
            w.truncate(cfg.probes);
            w
        })
        .collect()
}

fn delta_percent(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || hi.abs() < RANGE_TOL {
        0.0
    } else {
        100.0 * (hi - lo) / hi.abs()
    }
}

/// Bilevel solves with weighted pairs of attributes; the remaining
/// attributes are dropped.
pub fn tradeoff<P>(instances: &[StudyInstance<P>], cfg: &TradeoffConfig) -> Result<TradeoffReport>
where
    P: RobustFormulation + Sync,
{
    let (a1, a2) = cfg.pair;
    if a1 == a2 {
        return Err(Error::InvalidInput("the two attributes must differ".into()));
    }
    if cfg.probes == 0 {
        return Err(Error::InvalidInput("at least one probe is required".into()));
    }
    let weights = probe_weights(instances.len(), cfg);
    let pair_name = format!("{}|{}", a1.name(), a2.name());

    type Probe = (ResultRow, Option<(f64, f64)>, Option<ProbeSolution>);
    let per_instance: Vec<Vec<Probe>> = instances
        .par_iter()
        .enumerate()
        .map(|(idx, inst)| {
            let rc = solve_endogenous_rc(&inst.problem);
            weights[idx]
                .iter()
                .enumerate()
                .map(|(k, &(w1, w2))| {
                    let param = format!("{}|{}", format_number(w1), format_number(w2));
                    let run = || -> Result<(SolveOutput, f64, f64)> {
                        let rc = rc.as_ref().map_err(|e| Error::Infeasible(e.to_string()))?.clone();
                        let opts = SolveOptions { rc: Some(rc), ..cfg.options.clone() };
                        let mut alpha = 0.0;
                        let mut terms = Vec::new();
                        for (a, w) in [(a1, w1), (a2, w2)] {
                            match a {
                                Attribute::WorstCase => alpha = w,
                                Attribute::Preference(p) => terms.push((p, w)),
                            }
                        }
                        let out = solve_weighted(&inst.problem, Mode::Bilevel { alpha }, &terms, &opts)?;
                        let v1 = attribute_value(&inst.problem, a1, &out)?;
                        let v2 = attribute_value(&inst.problem, a2, &out)?;
                        Ok((out, v1, v2))
                    };
                    match run() {
                        Ok((out, v1, v2)) => (
                            ResultRow {
                                instance_id: inst.id.clone(),
                                probe_id: k,
                                mode: "bilevel".into(),
                                preferences: pair_name.clone(),
                                epsilon_or_alpha: param,
                                regime_chosen: Some(out.regime),
                                worst_case: Some(out.worst_case),
                                preference_value_1: Some(v1),
                                preference_value_2: Some(v2),
                                normalized_1: None,
                                normalized_2: None,
                                time_seconds: cfg.record_times.then_some(out.wall_time),
                                cuts_added: Some(out.cuts_added),
                                status: "ok".into(),
                            },
                            Some((v1, v2)),
                            Some(ProbeSolution { instance: idx, probe: k, x: out.x.clone(), regime: out.regime }),
                        ),
                        Err(e) => (ResultRow::failed(&inst.id, k, "bilevel", &pair_name, param, &e), None, None),
                    }
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    let (mut trade_offs, mut d1, mut d2, mut counted) = (0, 0.0, 0.0, 0);
    for probes in per_instance {
        let v1: Vec<f64> = probes.iter().filter_map(|p| p.1.map(|v| v.0)).collect();
        let v2: Vec<f64> = probes.iter().filter_map(|p| p.1.map(|v| v.1)).collect();
        let n1 = normalize(&probes.iter().map(|p| p.1.map(|v| v.0)).collect::<Vec<_>>());
        let n2 = normalize(&probes.iter().map(|p| p.1.map(|v| v.1)).collect::<Vec<_>>());
        let changed = |v: &[f64]| {
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo > CHANGE_TOL * hi.abs().max(1.0)
        };
        if !v1.is_empty() {
            counted += 1;
            if changed(&v1) || changed(&v2) {
                trade_offs += 1;
            }
            d1 += delta_percent(&v1);
            d2 += delta_percent(&v2);
        }
        for ((mut row, _, sol), (a, b)) in probes.into_iter().zip(n1.into_iter().zip(n2)) {
            row.normalized_1 = a;
            row.normalized_2 = b;
            rows.push(row);
            solutions.extend(sol);
        }
    }
    let times: Vec<f64> = rows.iter().filter_map(|r| r.time_seconds).collect();
    let denom = counted.max(1) as f64;
    let summary = TradeoffSummary {
        pair: pair_name.clone(),
        timing: Timing::of(&times),
        trade_offs,
        delta_1: d1 / denom,
        delta_2: d2 / denom,
        instances: counted,
    };

    let mut header = RunHeader::standard(instances, &cfg.options);
    header.push("command", "tradeoff");
    header.push("attributes", &pair_name);
    header.push("probes", cfg.probes);
    header.push("weights_seed", cfg.weights_seed);
    header.push("weights", "uniform [0,1] per attribute, drawn instance by instance");
    header.push("include_extremes", cfg.include_extremes);
    header.push("normalization", "(v - min) / (max - min) per instance over its probes; empty when the range is zero");
    header.push("#TO", "instances where either attribute changes across probes");
    header.push("Delta%", "(max - min) / max per instance in percent, averaged over instances");
    header.push("timings", if cfg.record_times { "recorded" } else { "omitted" });
    Ok(TradeoffReport { header, rows, summary, solutions })
}

/// Bound against exact regret at one solution.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub instance_id: String,
    pub probe_id: usize,
    pub regime: usize,
    pub bound: f64,
    pub exact: f64,
    /// `(bound - exact) / max(exact, 1)`.
    pub relative_gap: f64,
    pub tight: bool,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub header: RunHeader,
    pub rows: Vec<AuditRow>,
    pub tight: usize,
    pub total: usize,
    /// Evaluations abandoned at a resource limit.
    pub skipped: usize,
    pub max_gap: f64,
    /// Instance id and digest of the largest gap.
    pub max_gap_instance: Option<(String, String)>,
    /// Bounds found below the exact value; must stay empty.
    pub violations: Vec<AuditRow>,
}

pub const AUDIT_COLUMNS: [&str; 7] = ["instance_id", "probe_id", "regime", "bound", "exact", "relative_gap", "tight"];

impl AuditReport {
    pub fn tight_fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.tight as f64 / self.total as f64
        }
    }

    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        let records: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.instance_id.clone(),
                    r.probe_id.to_string(),
                    r.regime.to_string(),
                    format_number(r.bound),
                    format_number(r.exact),
                    format_number(r.relative_gap),
                    r.tight.to_string(),
                ]
            })
            .collect();
        write_csv(out, &self.header, &AUDIT_COLUMNS, &records)
    }
}

/// Compares the lifted regret bound with the exact regret at every given
/// solution.
pub fn audit_regret(instances: &[StudyInstance<EndogenousProblem>], solutions: &[ProbeSolution]) -> Result<AuditReport> {
    let bound_kind = PreferenceKind::Regret(RegretMode::RltBound);
    let evaluated: Vec<Result<Option<AuditRow>>> = solutions
        .par_iter()
        .map(|sol| {
            let inst = instances
                .get(sol.instance)
                .ok_or_else(|| Error::InvalidInput(format!("solution refers to instance {}", sol.instance)))?;
            let bound = inst.problem.preference(&sol.x, sol.regime, bound_kind)?;
            let exact = match regret_exact_eval(&inst.problem, &sol.x, sol.regime) {
                Ok(v) => v,
                Err(Error::ResourceExhausted(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let relative_gap = (bound - exact) / exact.max(1.0);
            Ok(Some(AuditRow {
                instance_id: inst.id.clone(),
                probe_id: sol.probe,
                regime: sol.regime,
                bound,
                exact,
                relative_gap,
                tight: relative_gap.abs() <= CHANGE_TOL,
            }))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for e in evaluated {
        match e? {
            Some(r) => rows.push(r),
            None => skipped += 1,
        }
    }
    let violations: Vec<AuditRow> = rows.iter().filter(|r| r.relative_gap < -CHANGE_TOL).cloned().collect();
    let tight = rows.iter().filter(|r| r.tight).count();
    let worst = rows.iter().max_by(|a, b| a.relative_gap.total_cmp(&b.relative_gap));
    let max_gap = worst.map_or(0.0, |r| r.relative_gap.max(0.0));
    let max_gap_instance = worst.filter(|r| r.relative_gap > CHANGE_TOL).and_then(|r| {
        instances.iter().find(|i| i.id == r.instance_id).map(|i| (i.id.clone(), i.digest.clone()))
    });
    let mut header = RunHeader::default();
    header.push("command", "audit-regret");
    header.push("instances", instances.len());
    header.push("solutions", solutions.len());
    header.push("tight", format!("{tight} of {}", rows.len()));
    header.push("skipped", skipped);
    header.push("max_relative_gap", format_number(max_gap));
    header.push(
        "max_gap_instance",
        max_gap_instance.as_ref().map_or("none".to_string(), |(id, d)| format!("{id}={d}")),
    );
    header.push("tightness", format!("|bound - exact| / max(exact, 1) <= {CHANGE_TOL}"));
    Ok(AuditReport { header, total: rows.len(), tight, rows, skipped, max_gap, max_gap_instance, violations })
}
