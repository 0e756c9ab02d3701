use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use endo_robust::io::{load, Instance, InstanceFile};
use endo_robust::knapsack::{generate_knapsack_instance, KnapsackParams};
use endo_robust::preferences::{PreferenceKind, RegretMode};
use endo_robust::robust::{
    solve_endogenous_rc, solve_weighted, Encoding, EndogenousProblem, Epsilon, Mode, RobustFormulation, RoptMethod,
    SolveOptions,
};
use endo_robust::spp::{
    example_diamond_correlated, example_diamond_interval, example_three_regimes, generate_instance, Flavor,
    GeneratorKind, GeneratorParams,
};
use endo_robust::study::{
    audit_regret, epsilon_sweep, format_number, tradeoff, write_results, Attribute, ResultRow, RunHeader,
    StudyInstance, SweepConfig, TradeoffConfig,
};
use endo_robust::uncertainty::CostKind;
use endo_robust::Error;

#[derive(Parser)]
#[command(name = "endo-robust", version, about = "Robust optimization with decision-dependent uncertainty regimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated or fixture instances as JSON files.
    Generate(GenerateArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Epsilon-constraint sweep over a set of instances.
    EpsilonSweep(SweepArgs),
    /// Weighted bilevel probes for a pair of attributes.
    Tradeoff(TradeoffArgs),
    /// Compare the lifted regret bound with exact regret at bilevel solutions.
    AuditRegret(AuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Spp,
    Knapsack,
    Fixture,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: Family,
    /// SPP generator kind: epsilon_study, bilevel_interval, bilevel_box, bilevel_correlated.
    #[arg(long, default_value = "epsilon_study")]
    kind: String,
    /// Fixture name: three-regimes, diamond-interval, diamond-correlated.
    #[arg(long, default_value = "three-regimes")]
    name: String,
    #[arg(long, default_value_t = 30)]
    nodes: usize,
    #[arg(long, default_value_t = 5)]
    regimes: usize,
    #[arg(long)]
    box_dim: Option<usize>,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    #[arg(long, default_value_t = 12.0)]
    capacity: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMode {
    Rc,
    Epsilon,
    Bilevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    OneHot,
    Enumerated,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::OneHot => Encoding::OneHot,
            EncodingArg::Enumerated => Encoding::Enumerated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RoptArg {
    Duality,
    Bigm,
    Incumbent,
    Lazy,
}

impl From<RoptArg> for RoptMethod {
    fn from(r: RoptArg) -> Self {
        match r {
            RoptArg::Duality => RoptMethod::Duality,
            RoptArg::Bigm => RoptMethod::BigM { bounds: None },
            RoptArg::Incumbent => RoptMethod::Incumbent { anchors: None },
            RoptArg::Lazy => RoptMethod::Lazy,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "bilevel")]
    mode: SolveMode,
    /// predictability, best-case, regret, regret-exact, regret-rlt, regret-columnwise.
    /// Plain `regret` is exact on interval instances and the lifted bound otherwise.
    #[arg(long, default_value = "predictability")]
    pref: String,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Read --eps as a fraction of the robust optimum.
    #[arg(long)]
    relative: bool,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, value_enum)]
    ropt: Option<RoptArg>,
    #[arg(long, value_enum, default_value = "one-hot")]
    encoding: EncodingArg,
    /// Write the result as a one-row CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Instance files (all SPP or all knapsack).
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    timings: bool,
    #[arg(long, value_enum, default_value = "enumerated")]
    encoding: EncodingArg,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Comma-separated preferences. Plain `regret` is exact when every
    /// instance has interval costs and the lifted bound otherwise.
    #[arg(long, default_value = "predictability,best-case,regret")]
    prefs: String,
    /// Comma-separated epsilon values; defaults to 1%..10%.
    #[arg(long)]
    grid: Option<String>,
    /// Interpret the grid as absolute values.
    #[arg(long)]
    absolute: bool,
}

#[derive(Args)]
struct TradeoffArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Two comma-separated attributes (worst-case or a preference).
    #[arg(long, default_value = "predictability,regret")]
    pair: String,
    #[arg(long, default_value_t = 10)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the probes (1,0) and (0,1).
    #[arg(long)]
    extremes: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[arg(long, default_value_t = 5)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => 2,
        Some(Error::InvalidInput(_) | Error::Unsupported(_) | Error::Model(_) | Error::Uncertainty(_)) => 3,
        Some(Error::ResourceExhausted(_) | Error::CapExceeded(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::EpsilonSweep(a) => sweep(a),
        Command::Tradeoff(a) => run_tradeoff(a),
        Command::AuditRegret(a) => audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_instance(dir: &Path, name: &str, file: &InstanceFile) -> anyhow::Result<()> {
    let path = dir.join(format!("{name}.json"));
    let mut w = create(&path)?;
    w.write_all(file.to_json().as_bytes())?;
    w.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    match a.family {
        Family::Fixture => {
            let inst = match a.name.as_str() {
                "three-regimes" => example_three_regimes(),
                "diamond-interval" => example_diamond_interval(),
                "diamond-correlated" => example_diamond_correlated(),
                other => return Err(Error::InvalidInput(format!("unknown fixture '{other}'")).into()),
            };
            write_instance(&a.out, &a.name, &InstanceFile::from_spp(&inst))
        }
        Family::Spp => {
            let kind: GeneratorKind = a.kind.parse()?;
            for k in 0..a.count {
                let seed = a.seed + k as u64;
                let mut params = GeneratorParams::new(kind, a.nodes, a.regimes, seed);
                if let Some(d) = a.box_dim {
                    params = params.with_box_dim(d);
                }
                let inst = generate_instance(&params)?;
                write_instance(&a.out, &format!("{}_{seed}", kind.name()), &InstanceFile::from_spp(&inst))?;
            }
            Ok(())
        }
        Family::Knapsack => {
            let params = KnapsackParams { items: a.items, budget: a.budget, capacity: a.capacity, regimes: a.regimes };
            for k in 0..a.count {
                let seed = a.seed + k as u64;
                let inst = generate_knapsack_instance(&params, seed)?;
                write_instance(&a.out, &format!("knapsack_{seed}"), &InstanceFile::from_knapsack(&inst))?;
            }
            Ok(())
        }
    }
}

fn spp_problem(inst: &endo_robust::spp::SppInstance) -> anyhow::Result<EndogenousProblem> {
    let kind = inst.regimes()[0].cost_map.kind();
    Ok(inst.build_problem(Flavor::of(kind)?)?)
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let file = load(&a.instance)?;
    let digest = file.digest();
    match file.to_instance()? {
        Instance::Spp(inst) => {
            let p = spp_problem(&inst)?;
            solve_with(&p, &a, &digest, PreferenceKind::regret_for(p.kind()))
        }
        Instance::Knapsack(inst) => solve_with(&inst, &a, &digest, BOUND),
    }
}

fn solve_with<P: RobustFormulation>(p: &P, a: &SolveArgs, digest: &str, regret: PreferenceKind) -> anyhow::Result<()> {
    let opts = SolveOptions { encoding: a.encoding.into(), ropt: a.ropt.map(Into::into), ..SolveOptions::default() };
    let pref = parse_pref(&a.pref, regret)?;
    let (mode, param, out) = match a.mode {
        SolveMode::Rc => {
            let rc = solve_endogenous_rc(p)?;
            for (s, phi) in rc.phi.iter().enumerate() {
                match phi {
                    Some(v) => println!("regime {s}: robust optimum {}", format_number(*v)),
                    None => println!("regime {s}: infeasible"),
                }
            }
            println!("best regime {} with robust optimum {}", rc.best, format_number(rc.phi_star));
            return Ok(());
        }
        SolveMode::Epsilon => {
            let eps = Epsilon { value: a.eps, relative: a.relative };
            ("epsilon", format_number(a.eps), solve_weighted(p, Mode::Epsilon(eps), &[(pref, 1.0)], &opts)?)
        }
        SolveMode::Bilevel => {
            ("bilevel", format_number(a.alpha), solve_weighted(p, Mode::Bilevel { alpha: a.alpha }, &[(pref, 1.0)], &opts)?)
        }
    };
    println!("regime {}", out.regime);
    println!("worst case {}", format_number(out.worst_case));
    println!("{pref} {}", format_number(out.preference_value));
    println!("total objective {}", format_number(out.total_objective));
    let chosen: Vec<String> = out.x.iter().enumerate().filter(|(_, v)| v.abs() > 1e-9).map(|(i, v)| {
        if (v - 1.0).abs() < 1e-9 { i.to_string() } else { format!("{i}:{}", format_number(*v)) }
    }).collect();
    println!("x {}", chosen.join(" "));
    if let Some(path) = &a.csv {
        let row = ResultRow {
            instance_id: p.label().to_string(),
            probe_id: 0,
            mode: mode.into(),
            preferences: pref.name().into(),
            epsilon_or_alpha: param,
            regime_chosen: Some(out.regime),
            worst_case: Some(out.worst_case),
            preference_value_1: Some(out.preference_value),
            preference_value_2: Some(out.worst_case),
            normalized_1: None,
            normalized_2: None,
            time_seconds: a.timings.then_some(out.wall_time),
            cuts_added: Some(out.cuts_added),
            status: "ok".into(),
        };
        let mut header = RunHeader::default();
        header.push("command", "solve");
        header.push("digest", digest);
        header.push("encoding", format!("{:?}", opts.encoding));
        if let Some(m) = out.method {
            header.push("ropt", m);
        }
        header.push("timings", if a.timings { "recorded" } else { "omitted" });
        let mut w = create(path)?;
        write_results(&mut w, &header, &[row])?;
        w.flush()?;
    }
    Ok(())
}

enum Loaded {
    Spp(Vec<StudyInstance<EndogenousProblem>>),
    Knapsack(Vec<StudyInstance<endo_robust::knapsack::KnapsackInstance>>),
}

fn load_study(paths: &[PathBuf]) -> anyhow::Result<Loaded> {
    let mut spp = Vec::new();
    let mut knap = Vec::new();
    for path in paths {
        let file = load(path)?;
        let digest = file.digest();
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match file.to_instance()? {
            Instance::Spp(i) => spp.push(StudyInstance { id, digest, problem: spp_problem(&i)? }),
            Instance::Knapsack(k) => knap.push(StudyInstance { id, digest, problem: k }),
        }
    }
    match (spp.is_empty(), knap.is_empty()) {
        (false, true) => Ok(Loaded::Spp(spp)),
        (true, false) => Ok(Loaded::Knapsack(knap)),
        _ => Err(Error::InvalidInput("a study takes either SPP or knapsack instances, not both".into()).into()),
    }
}

const BOUND: PreferenceKind = PreferenceKind::Regret(RegretMode::RltBound);

impl Loaded {
    /// What plain `regret` means for the whole set: exact only when every
    /// instance has interval costs.
    fn regret(&self) -> PreferenceKind {
        match self {
            Loaded::Spp(i) if i.iter().all(|s| s.problem.kind() == CostKind::Interval) => {
                PreferenceKind::Regret(RegretMode::Exact)
            }
            _ => BOUND,
        }
    }
}

fn parse_pref(s: &str, regret: PreferenceKind) -> anyhow::Result<PreferenceKind> {
    match s.trim() {
        "regret" => Ok(regret),
        t => Ok(t.parse()?),
    }
}

fn options(s: &StudyArgs) -> SolveOptions {
    SolveOptions { encoding: s.encoding.into(), ..SolveOptions::default() }
}

fn save(dir: &Path, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> endo_robust::Result<()>) -> anyhow::Result<()> {
    let path = dir.join(name);
    let mut w = create(&path)?;
    write(&mut w)?;
    w.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',').map(|p| p.trim().parse::<T>().map_err(anyhow::Error::from)).collect()
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let loaded = load_study(&a.study.instances)?;
    let mut cfg = SweepConfig::standard(options(&a.study));
    cfg.preferences = a.prefs.split(',').map(|p| parse_pref(p, loaded.regret())).collect::<anyhow::Result<_>>()?;
    if let Some(g) = &a.grid {
        cfg.grid = parse_list(g)?;
    }
    cfg.relative = !a.absolute;
    cfg.record_times = a.study.timings;
    let report = match loaded {
        Loaded::Spp(i) => epsilon_sweep(&i, &cfg),
        Loaded::Knapsack(i) => epsilon_sweep(&i, &cfg),
    };
    save(&a.study.out, "sweep_rows.csv", |w| report.write_rows(w))?;
    save(&a.study.out, "sweep_summary.csv", |w| report.write_summary(w))?;
    if a.study.timings {
        save(&a.study.out, "sweep_timing.csv", |w| report.write_timing(w))?;
    }
    let failed = report.rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} solves failed; see the status column", report.rows.len());
    }
    Ok(())
}

fn run_tradeoff(a: TradeoffArgs) -> anyhow::Result<()> {
    let loaded = load_study(&a.study.instances)?;
    let pair = a
        .pair
        .split(',')
        .map(|t| match t.trim() {
            "regret" => Ok(Attribute::Preference(loaded.regret())),
            t => t.parse::<Attribute>().map_err(anyhow::Error::from),
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if pair.len() != 2 {
        bail!(Error::InvalidInput(format!("--pair takes two attributes, got {}", pair.len())));
    }
    let cfg = TradeoffConfig {
        pair: (pair[0], pair[1]),
        probes: a.probes,
        weights_seed: a.seed,
        include_extremes: a.extremes,
        record_times: a.study.timings,
        options: options(&a.study),
    };
    let report = match loaded {
        Loaded::Spp(i) => tradeoff(&i, &cfg)?,
        Loaded::Knapsack(i) => tradeoff(&i, &cfg)?,
    };
    save(&a.study.out, "tradeoff_rows.csv", |w| report.write_rows(w))?;
    save(&a.study.out, "tradeoff_summary.csv", |w| report.write_summary(w))?;
    let s = &report.summary;
    println!(
        "{}: #TO {} of {}, Delta1 {}%, Delta2 {}%",
        s.pair,
        s.trade_offs,
        s.instances,
        format_number(s.delta_1),
        format_number(s.delta_2)
    );
    Ok(())
}

fn audit(a: AuditArgs) -> anyhow::Result<()> {
    let Loaded::Spp(instances) = load_study(&a.study.instances)? else {
        bail!(Error::Unsupported("the regret audit runs on SPP instances".into()));
    };
    let cfg = TradeoffConfig {
        pair: (Attribute::WorstCase, Attribute::Preference(PreferenceKind::Regret(RegretMode::RltBound))),
        probes: a.probes,
        weights_seed: a.seed,
        include_extremes: true,
        record_times: false,
        options: options(&a.study),
    };
    let solutions = tradeoff(&instances, &cfg)?.solutions;
    let report = audit_regret(&instances, &solutions)?;
    save(&a.study.out, "audit_regret.csv", |w| report.write_rows(w))?;
    println!(
        "tight {} of {} ({} skipped), max relative gap {}",
        report.tight,
        report.total,
        report.skipped,
        format_number(report.max_gap)
    );
    if let Some((id, digest)) = &report.max_gap_instance {
        println!("largest gap on {id} ({digest})");
    }
    if !report.violations.is_empty() {
        bail!(Error::Inconsistent(format!("{} bounds fall below the exact regret", report.violations.len())));
    }
    Ok(())
}
