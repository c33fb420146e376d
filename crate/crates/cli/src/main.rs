use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rockrelax::chance::ParamSet;
use rockrelax::diagnostics::{default_eps_ladder, minkowski_content, subregularity_probe, Lattice};
use rockrelax::distributions::{Distribution, PerturbationSequence};
use rockrelax::experiments::{
    chance_preset, compare_expected, composite_preset, default_grid, default_horizon, default_schedule,
    distance_column, epi_distance_sequence, mi_grid, registered_expectations, run_composite, run_preset, run_rate,
    select_claims, ChanceSetting, ClaimVerdict, CompositeStudy, Expectation, RunOptions, SolveReport, Variant,
};
use rockrelax::metrics::{metric, MetricKind};
use rockrelax::model::{CompositeProblem, PenaltyTag, Support};
use rockrelax::schedules::{for_proposition, validate, Proposition, Schedule};
use rockrelax_cli::config::{DistributionLiteral, Format};
use rockrelax_cli::output::{emit, render_report, Envelope};
use rockrelax_cli::{parse_config, ConfigError, RunConfig, Syntax, THREADS_ENV};

#[derive(Parser)]
#[command(name = "rockrelax", version, about = "Rockafellian relaxation under distributional perturbation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Tv,
    W1,
    Bl,
    Fm,
    Mi,
    Kl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Setting {
    S1,
    S2,
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Compare against every registered claim of the preset.
    #[arg(long)]
    check: bool,
    /// Compare against the named registered claims.
    #[arg(long, value_delimiter = ',')]
    claims: Vec<String>,
    /// Compare against expectations listed in a JSON file.
    #[arg(long)]
    expect: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a registered preset and write its report.
    RunExample {
        name: String,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output path; `.csv` selects CSV, anything else JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Run a JSON or TOML configuration.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the validated configuration with defaults filled and exit.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Distance between two discrete distributions.
    Metrics {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Preset supplying the function class of `mi`.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Rate run of a chance-constrained preset.
    Rate {
        #[arg(value_enum)]
        setting: Setting,
        /// `rate-s1`, `rate-s2` or `finite-I-chance`; defaults to the setting's instance.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, default_value_t = 50)]
        horizon: u64,
        /// Use the base distribution at every index.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncated epi-distance estimates between the relaxed and limit Rockafellians.
    EpiDist {
        #[arg(long)]
        preset: String,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
        nus: Vec<u64>,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        /// Lattice points per axis over `[-rho, rho]`.
        #[arg(long, default_value_t = 81)]
        resolution: usize,
        /// JSON schedule; the preset default when absent.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minkowski content of a parametric set boundary.
    Content {
        #[arg(long)]
        dist: PathBuf,
        /// JSON parametric set.
        #[arg(long)]
        set: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical lower estimate of the subregularity modulus.
    ProbeKappa {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 201)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tail checks of a schedule on `d_nu = nu^-q`, `nu = 2^k`.
    ValidateSchedule {
        #[arg(long)]
        proposition: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// JSON schedule overriding the proposition default.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Number of geometric indices `k = 1..=levels`.
        #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..=63))]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] rockrelax::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, contents: &str) -> CliResult<()> {
    emit(path, contents)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.map_or("stdout".into(), |p| p.display().to_string()))))
}

fn json_out<T: Serialize>(path: Option<&Path>, command: &str, seed: Option<u64>, result: T) -> CliResult<()> {
    write(path, &Envelope::new(command, seed, result).to_json())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))
}

/// Expectations selected by the flags; `None` when no comparison was requested.
fn expectations(report: &SolveReport, args: &CheckArgs) -> CliResult<Option<Vec<Expectation>>> {
    let mut exps = Vec::new();
    if args.check {
        exps.extend(registered_expectations(report));
    }
    if !args.claims.is_empty() {
        exps.extend(select_claims(report, &args.claims)?);
    }
    if let Some(path) = &args.expect {
        exps.extend(read_json::<Vec<Expectation>>(path)?);
    }
    let requested = args.check || !args.claims.is_empty() || args.expect.is_some();
    Ok(requested.then_some(exps))
}

fn verdict_line(v: &ClaimVerdict) -> String {
    let nu = v.worst_nu.map_or_else(|| "-".to_string(), |n| n.to_string());
    format!(
        "{} {}: rows {}, worst delta {:e} at nu {nu}",
        if v.pass { "PASS" } else { "FAIL" },
        v.claim,
        v.rows_checked,
        v.worst_delta
    )
}

fn check_report(report: &SolveReport, args: &CheckArgs) -> CliResult<()> {
    let Some(exps) = expectations(report, args)? else { return Ok(()) };
    let verdicts = compare_expected(report, &exps)?;
    for v in &verdicts {
        eprintln!("{}", verdict_line(v));
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} claims failed", verdicts.len())));
    }
    Ok(())
}

fn output_target(out: Option<PathBuf>, cfg_path: Option<PathBuf>) -> (Option<PathBuf>, Format) {
    let path = out.or(cfg_path);
    let format = path.as_deref().map_or(Format::Json, Format::from_path);
    (path, format)
}

fn run_example(name: &str, horizon: Option<u64>, seed: u64, out: Option<PathBuf>, check: &CheckArgs) -> CliResult<()> {
    let horizon = match horizon {
        Some(h) => h,
        None => default_horizon(name)?,
    };
    let report = run_preset(name, horizon, &RunOptions { seed, ..RunOptions::default() })?;
    let (path, format) = output_target(out, None);
    write(path.as_deref(), &render_report(&report, format)?)?;
    check_report(&report, check)
}

fn custom_report(cfg: &RunConfig, schedule: Schedule) -> CliResult<SolveReport> {
    let p = &cfg.problem;
    let base = cfg.distribution.as_ref().expect("validated").build()?;
    let support = match &base {
        Distribution::Discrete(d) => Support::Atoms { atoms: d.support().map(|(a, _)| a.clone()).collect() },
        Distribution::Uniform(u) => Support::Interval { lower: u.lower(), upper: u.upper() },
    };
    let problem = CompositeProblem::new(
        p.n.expect("validated"),
        base.dim(),
        p.g0.clone().expect("validated"),
        p.h.clone().expect("validated"),
        p.components.clone().expect("validated"),
        support,
        p.bound_mx.expect("validated"),
    )?;
    let mut variants = vec![Variant::Plain];
    variants.extend(p.envelope.map(Variant::Envelope));
    let solver = cfg.solver.clone().expect("filled");
    let study = CompositeStudy {
        name: "custom".into(),
        problem,
        sequence: PerturbationSequence::new(base, cfg.perturbation.clone().expect("validated")),
        variants,
        schedule_distance: distance_column(&schedule),
        schedule,
        penalty: PenaltyTag::EuclideanPower,
        grid: solver.grid.expect("filled"),
        nus: (1..=cfg.horizon.expect("filled")).collect(),
        reference: p.reference.clone(),
        lp_cap: solver.lp_cap.expect("filled"),
    };
    Ok(run_composite(&study)?)
}

fn solve(config: &Path, out: Option<PathBuf>, print_config: bool, check: &CheckArgs) -> CliResult<()> {
    let syntax = Syntax::from_path(config);
    let cfg = parse_config(&read(config)?, syntax)?;
    if print_config {
        return write(out.as_deref(), &(rockrelax_cli::serialize_config(&cfg, syntax) + "\n"));
    }
    let schedule = cfg.schedule.as_ref().expect("filled").resolve()?;
    let solver = cfg.solver.clone().expect("filled");
    let report = match &cfg.problem.preset {
        Some(name) => {
            let opts = RunOptions {
                seed: cfg.seed.expect("filled"),
                schedule: Some(schedule),
                grid: solver.grid,
                lp_cap: solver.lp_cap.expect("filled"),
                exact: false,
            };
            run_preset(name, cfg.horizon.expect("filled"), &opts)?
        }
        None => custom_report(&cfg, schedule)?,
    };
    let output = cfg.output.clone().unwrap_or_default();
    let (path, format) = match out {
        Some(o) => output_target(Some(o), None),
        None => (output.path, output.format.unwrap_or(Format::Json)),
    };
    write(path.as_deref(), &render_report(&report, format)?)?;
    check_report(&report, check)
}

fn metrics(kind: Kind, beta: f64, a: &Path, b: &Path, preset: Option<&str>) -> CliResult<()> {
    let da = read_json::<DistributionLiteral>(a)?.build_discrete()?;
    let db = read_json::<DistributionLiteral>(b)?.build_discrete()?;
    let kind = match kind {
        Kind::Tv => MetricKind::Tv,
        Kind::W1 => MetricKind::W1,
        Kind::Bl => MetricKind::Bl,
        Kind::Fm => MetricKind::Fm { beta },
        Kind::Mi => MetricKind::Mi,
        Kind::Kl => MetricKind::Kl,
    };
    let value = match (kind, preset) {
        (MetricKind::Mi, None) => return Err(CliError::Usage("--kind mi requires --preset".into())),
        (MetricKind::Mi, Some(name)) => {
            let p = composite_preset(name, default_horizon(name)?, 1)?;
            let grid = mi_grid(&default_grid(name))?;
            metric(kind, &da, &db, Some((&p.problem, &grid)))?
        }
        _ => metric(kind, &da, &db, None)?,
    };
    println!("{value}");
    Ok(())
}

fn rate(setting: Setting, instance: Option<String>, horizon: u64, exact: bool, out: Option<PathBuf>) -> CliResult<()> {
    let (setting, default) = match setting {
        Setting::S1 => (ChanceSetting::S1, "rate-s1"),
        Setting::S2 => (ChanceSetting::S2, "rate-s2"),
    };
    let instance = chance_preset(instance.as_deref().unwrap_or(default))?;
    let report = run_rate(setting, &instance, horizon, &RunOptions { exact, ..RunOptions::default() })?;
    let (path, format) = output_target(out, None);
    write(path.as_deref(), &render_report(&report, format)?)
}

#[derive(Serialize)]
struct EpiRow {
    nu: u64,
    #[serde(flatten)]
    estimate: rockrelax::diagnostics::EpiDistanceEstimate,
}

#[derive(Serialize)]
struct EpiOutput {
    preset: String,
    schedule: Schedule,
    rho: f64,
    rows: Vec<EpiRow>,
}

fn epi_dist(
    preset: &str,
    nus: &[u64],
    rho: f64,
    resolution: usize,
    schedule: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let horizon = nus.iter().copied().max().unwrap_or(1).max(default_horizon(preset)?);
    let p = composite_preset(preset, horizon, 1)?;
    let schedule = match schedule {
        Some(path) => read_json::<Schedule>(&path)?,
        None => default_schedule(preset)?,
    };
    let lattice = Lattice::new(vec![(-rho, rho); p.problem.m + p.problem.n], resolution)?;
    let seq = epi_distance_sequence(&p, &schedule, nus, rho, &lattice)?;
    let rows = seq.into_iter().map(|(nu, estimate)| EpiRow { nu, estimate }).collect();
    json_out(out.as_deref(), "epi-dist", None, EpiOutput { preset: preset.into(), schedule, rho, rows })
}

#[derive(Serialize)]
struct ContentOutput {
    x: Vec<f64>,
    eps: Vec<f64>,
    values: Vec<f64>,
}

fn content(dist: &Path, set: &Path, x: Vec<f64>, eps: Vec<f64>, out: Option<PathBuf>) -> CliResult<()> {
    let mu = read_json::<DistributionLiteral>(dist)?.build()?;
    let set: ParamSet = read_json(set)?;
    let eps = if eps.is_empty() { default_eps_ladder() } else { eps };
    let x = if x.is_empty() { vec![0.0] } else { x };
    let values = minkowski_content(&mu, &set, &x, &eps)?;
    json_out(out.as_deref(), "content", None, ContentOutput { x, eps, values })
}

#[derive(Serialize)]
struct KappaOutput {
    instance: String,
    samples: Vec<Vec<f64>>,
    #[serde(flatten)]
    probe: rockrelax::diagnostics::KappaProbe,
}

fn probe_kappa(instance: &str, samples: usize, seed: u64, resolution: usize, out: Option<PathBuf>) -> CliResult<()> {
    let p = chance_preset(instance)?;
    let bounds = default_grid(p.name).bounds;
    let lattice = Lattice::new(bounds.clone(), resolution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> =
        (0..samples).map(|_| bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect()).collect();
    let probe = subregularity_probe(&p.problem, &p.mu, &points, &lattice)?;
    json_out(
        out.as_deref(),
        "probe-kappa",
        Some(seed),
        KappaOutput { instance: instance.into(), samples: points, probe },
    )
}

fn parse_proposition(name: &str) -> CliResult<Proposition> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| CliError::Usage(format!("unknown proposition `{name}`")))
}

fn validate_schedule(
    proposition: Option<String>,
    alpha: f64,
    schedule: Option<PathBuf>,
    q: f64,
    levels: u32,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let schedule = match (schedule, proposition) {
        (Some(path), _) => read_json::<Schedule>(&path)?,
        (None, Some(p)) => for_proposition(parse_proposition(&p)?, alpha)?,
        (None, None) => return Err(CliError::Usage("either --proposition or --schedule is required".into())),
    };
    if !(q > 0.0) {
        return Err(CliError::Usage(format!("--q must be positive, got {q}")));
    }
    let nus: Vec<u64> = (1..=levels).map(|k| 1u64 << k).collect();
    let distances: Vec<f64> = nus.iter().map(|&nu| (nu as f64).powf(-q)).collect();
    let report = validate(&schedule, &nus, &distances)?;
    let pass = report.pass;
    json_out(out.as_deref(), "validate-schedule", None, report)?;
    if !pass {
        return Err(CliError::Failed("schedule conditions failed".into()));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::RunExample { name, horizon, seed, out, check } => run_example(&name, horizon, seed, out, &check),
        Command::Solve { config, out, print_config, check } => solve(&config, out, print_config, &check),
        Command::Metrics { kind, beta, a, b, preset } => metrics(kind, beta, &a, &b, preset.as_deref()),
        Command::Rate { setting, instance, horizon, exact, out } => rate(setting, instance, horizon, exact, out),
        Command::EpiDist { preset, nus, rho, resolution, schedule, out } => {
            epi_dist(&preset, &nus, rho, resolution, schedule, out)
        }
        Command::Content { dist, set, x, eps, out } => content(&dist, &set, x, eps, out),
        Command::ProbeKappa { instance, samples, seed, resolution, out } => {
            probe_kappa(&instance, samples, seed, resolution, out)
        }
        Command::ValidateSchedule { proposition, alpha, schedule, q, levels, out } => {
            validate_schedule(proposition, alpha, schedule, q, levels, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
