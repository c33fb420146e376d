//! End-to-end runs of the preset instances and the two rate settings.

pub mod presets;
mod report;

pub use report::{
    compare_expected, registered_expectations, select_claims, ClaimVerdict, Expectation, Expected, Relation, ReportRow,
    SolveReport, COLUMNS, SCHEMA_VERSION,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chance::{chance_phi, penalized_s1, penalized_s2, violation, ChanceProblem};
use crate::diagnostics::{epi_distance, rate_fit, EpiDistanceEstimate, Lattice};
use crate::distributions::{make_discrete, perturb, DiscreteDistribution, Distribution, PerturbationSequence, Scheme};
use crate::envelopes::NamedEnvelope;
use crate::metrics::{
    bounded_lipschitz_certificate, transport, tv, wasserstein1_cdf, wasserstein1_uniform, DEFAULT_LP_CAP,
};
use crate::model::{
    eval_approx_rockafellian, eval_plugin, eval_rockafellian, expected_components, partial_min_u_with_arg, Component,
    CompositeProblem, PenaltyKind, PenaltyTag,
};
use crate::schedules::{schedule_empirical, schedule_rate_s1, schedule_rate_s2, Proposition, Rule, Schedule};
use crate::solvers::{grid_minimize, GridSpec};
use crate::{Error, Point, Result, XReal};

use presets::{ChancePreset, Preset, Reference};

/// Registered preset names.
pub const PRESETS: [&str; 7] =
    ["finite-I", "finite-II", "discrete-I", "discrete-II", "empirical-I", "rate-s1", "rate-s2"];

/// Smallest accepted horizon.
pub const MIN_HORIZON: u64 = 5;

/// Most lattice points used for the minimal-information grid.
const MI_GRID_POINTS: usize = 2000;

/// Which measured distance feeds the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceColumn {
    Tv,
    W1,
    Bl,
    Mi,
    /// The schedule ignores the distance.
    None,
}

/// Approximating mapping used for `G_nu`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `G_nu = G`.
    Plain,
    Envelope(NamedEnvelope),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "g",
            Variant::Envelope(_) => "envelope",
        }
    }

    fn components(&self, problem: &CompositeProblem, nu: u64) -> Vec<Component> {
        match self {
            Variant::Plain => problem.components.clone(),
            Variant::Envelope(e) => e.components(nu),
        }
    }
}

/// Penalty formulation of a chance-constrained run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChanceSetting {
    /// Power penalty of the probability shortfall.
    S1,
    /// Power penalty of the Pasch-Hausdorff envelope shortfall.
    S2,
}

impl ChanceSetting {
    pub fn name(&self) -> &'static str {
        match self {
            ChanceSetting::S1 => "s1",
            ChanceSetting::S2 => "s2",
        }
    }
}

/// A fully specified composite run.
#[derive(Clone, Debug)]
pub struct CompositeStudy {
    pub name: String,
    pub problem: CompositeProblem,
    pub sequence: PerturbationSequence,
    pub variants: Vec<Variant>,
    pub schedule: Schedule,
    pub schedule_distance: DistanceColumn,
    pub penalty: PenaltyTag,
    pub grid: GridSpec,
    pub nus: Vec<u64>,
    pub reference: Option<Reference>,
    pub lp_cap: usize,
}

/// A fully specified chance-constrained run.
#[derive(Clone, Debug)]
pub struct ChanceStudy {
    pub name: String,
    pub problem: ChanceProblem,
    pub sequence: PerturbationSequence,
    pub setting: ChanceSetting,
    pub schedule: Schedule,
    pub schedule_distance: DistanceColumn,
    pub grid: GridSpec,
    pub nus: Vec<u64>,
    pub reference: Option<Reference>,
    pub lp_cap: usize,
    /// Use `mu_nu = mu` for every `nu`.
    pub exact: bool,
}

/// Overrides for preset runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub schedule: Option<Schedule>,
    pub grid: Option<GridSpec>,
    pub lp_cap: usize,
    pub exact: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 1, schedule: None, grid: None, lp_cap: DEFAULT_LP_CAP, exact: false }
    }
}

/// Default horizon of a preset.
pub fn default_horizon(name: &str) -> Result<u64> {
    match name {
        "empirical-I" => Ok(1 << 14),
        n if PRESETS.contains(&n) => Ok(50),
        n => Err(Error::InvalidInput(format!("unknown preset `{n}`; known: {}", PRESETS.join(", ")))),
    }
}

fn seed_of(seq: &PerturbationSequence) -> Option<u64> {
    match seq.scheme {
        Scheme::IidEmpirical { seed } => Some(seed),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Distances {
    tv: Option<f64>,
    w1: Option<f64>,
    bl: Option<f64>,
    mi: Option<f64>,
}

impl Distances {
    fn zero() -> Self {
        Distances { tv: Some(0.0), w1: Some(0.0), bl: Some(0.0), mi: Some(0.0) }
    }

    fn pick(&self, col: DistanceColumn) -> Result<f64> {
        let v = match col {
            DistanceColumn::Tv => self.tv,
            DistanceColumn::W1 => self.w1,
            DistanceColumn::Bl => self.bl,
            DistanceColumn::Mi => self.mi,
            DistanceColumn::None => Some(0.0),
        };
        v.ok_or_else(|| Error::Unsupported(format!("schedule distance {col:?} is not computable for this pair")))
    }
}

/// Lattice of at most [`MI_GRID_POINTS`] points spanning the solver box.
pub fn mi_grid(grid: &GridSpec) -> Result<Vec<Point>> {
    let per_axis = (MI_GRID_POINTS as f64).powf(1.0 / grid.dim() as f64).floor() as usize;
    Lattice::new(grid.bounds.clone(), grid.resolution.min(per_axis).max(2)).map(|l| l.points())
}

fn distances(
    mu: &Distribution,
    mu_nu: &DiscreteDistribution,
    components: &[Component],
    xgrid: &[Point],
    cap: usize,
) -> Result<Distances> {
    let mut d = Distances::default();
    let positive = |x: &DiscreteDistribution| -> Result<DiscreteDistribution> {
        let (atoms, w): (Vec<Point>, Vec<f64>) = x.support().map(|(a, w)| (a.clone(), w)).unzip();
        make_discrete(atoms, w)
    };
    match mu {
        Distribution::Discrete(a) => {
            // Zero-weight atoms are dropped; every cost used here is a metric, so the values are unchanged.
            let (a, mu_nu) = (&positive(a)?, &positive(mu_nu)?);
            d.tv = Some(tv(a, mu_nu)?);
            d.w1 = if a.dim() == 1 { Some(wasserstein1_cdf(a, mu_nu)) } else { transport(a, mu_nu, cap).ok() };
            d.bl = bounded_lipschitz_certificate(a, mu_nu, cap).ok().map(|c| c.value);
        }
        Distribution::Uniform(u) => {
            d.tv = Some(2.0);
            d.w1 = Some(wasserstein1_uniform(u, mu_nu)?);
        }
    }
    let b: Distribution = mu_nu.clone().into();
    let mut best: f64 = 0.0;
    let mut ok = true;
    for x in xgrid {
        match (expected_components(components, mu, x), expected_components(components, &b, x)) {
            (Ok(ea), Ok(eb)) => {
                for (p, q) in ea.iter().zip(&eb) {
                    best = best.max((p - q).abs());
                }
            }
            _ => ok = false,
        }
    }
    d.mi = ok.then_some(best);
    Ok(d)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn composite_row(study: &CompositeStudy, variant: Variant, nu: u64, xgrid: &[Point]) -> Result<ReportRow> {
    let p = &study.problem;
    let mu = &study.sequence.base;
    let mu_nu_d = perturb(&study.sequence, nu)?;
    let dist = distances(mu, &mu_nu_d, &p.components, xgrid, study.lp_cap)?;
    let sv = study.schedule.at(nu, dist.pick(study.schedule_distance)?)?;
    let pen = PenaltyKind::new(study.penalty, study.schedule.alpha, sv.lambda)?;
    let mu_nu: Distribution = mu_nu_d.into();
    let g_nu = variant.components(p, nu);

    let plugin = grid_minimize(&|x: &[f64]| eval_plugin(p, &mu_nu, x), &study.grid)?;
    let stab = grid_minimize(&|x: &[f64]| partial_min_u_with_arg(p, &mu_nu, &g_nu, &pen, x).map(|r| r.0), &study.grid)?;
    let x_rep = stab.representatives.first().cloned();
    let u_rep = match &x_rep {
        Some(x) => Some(partial_min_u_with_arg(p, &mu_nu, &g_nu, &pen, x)?.1),
        None => None,
    };
    let dist_ref = match (&study.reference, &x_rep, &u_rep) {
        (Some(r), Some(x), Some(u)) => {
            let un = u.iter().map(|v| v * v).sum::<f64>();
            r.argmin.iter().map(|a| (un + euclid(x, a).powi(2)).sqrt()).reduce(f64::min)
        }
        _ => None,
    };
    let worst_violation = match &x_rep {
        Some(x) => {
            Some(expected_components(&p.components, mu, x)?.iter().map(|v| 0.0 - v).fold(f64::INFINITY, f64::min))
        }
        None => None,
    };
    let eta_proxy = match &study.reference {
        Some(r) if r.inf_phi.is_finite() && stab.value.is_finite() => {
            Some((stab.value.value() - r.inf_phi.value()).abs())
        }
        _ => None,
    };
    Ok(ReportRow {
        nu,
        variant: variant.name().to_string(),
        d_tv: dist.tv,
        d_w1: dist.w1,
        d_bl: dist.bl,
        d_mi: dist.mi,
        lambda: sv.lambda,
        theta: sv.theta,
        inf_plugin: plugin.value,
        x_plugin: plugin.representatives.first().cloned(),
        inf_stabilized: stab.value,
        u_rep,
        x_rep,
        dist_ref,
        worst_violation,
        eta_proxy,
        box_clipped: stab.box_clipped,
    })
}

fn check_nus(nus: &[u64]) -> Result<()> {
    if nus.is_empty() || nus[0] == 0 || nus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("nu values must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Rows for every variant and `nu`, computed in parallel and ordered by (variant, `nu`).
pub fn run_composite(study: &CompositeStudy) -> Result<SolveReport> {
    check_nus(&study.nus)?;
    study.schedule.validate_rules()?;
    study.grid.validate()?;
    if study.grid.dim() != study.problem.n {
        return Err(Error::InvalidInput(format!(
            "grid dimension {} differs from n = {}",
            study.grid.dim(),
            study.problem.n
        )));
    }
    let xgrid = mi_grid(&study.grid)?;
    let jobs: Vec<(Variant, u64)> =
        study.variants.iter().flat_map(|v| study.nus.iter().map(move |nu| (*v, *nu))).collect();
    let rows = jobs.par_iter().map(|&(v, nu)| composite_row(study, v, nu, &xgrid)).collect::<Result<Vec<_>>>()?;
    Ok(SolveReport {
        schema: SCHEMA_VERSION,
        preset: study.name.clone(),
        schedule: study.schedule.clone(),
        seed: seed_of(&study.sequence),
        grid: study.grid.clone(),
        horizon: *study.nus.last().expect("nonempty"),
        reference: study.reference.clone(),
        rate_fit: None,
        rows,
    })
}

fn chance_row(study: &ChanceStudy, nu: u64, xgrid: &[Point]) -> Result<ReportRow> {
    let cp = &study.problem;
    let mu = &study.sequence.base;
    let components = cp.components();
    let (mu_nu, dist) = if study.exact {
        (mu.clone(), Distances::zero())
    } else {
        let m = perturb(&study.sequence, nu)?;
        let dist = distances(mu, &m, &components, xgrid, study.lp_cap)?;
        (m.into(), dist)
    };
    let sv = study.schedule.at(nu, dist.pick(study.schedule_distance)?)?;
    let alpha = study.schedule.alpha;
    let theta = match study.setting {
        ChanceSetting::S1 => None,
        ChanceSetting::S2 => Some(sv.theta.ok_or_else(|| Error::InvalidInput("s2 needs a theta rule".into()))?),
    };
    let plugin = grid_minimize(&|x: &[f64]| chance_phi(cp, &mu_nu, x), &study.grid)?;
    let stab = grid_minimize(
        &|x: &[f64]| match theta {
            None => penalized_s1(cp, &mu_nu, sv.lambda, alpha, x),
            Some(t) => penalized_s2(cp, &mu_nu, sv.lambda, t, alpha, x),
        },
        &study.grid,
    )?;
    let x_rep = stab.representatives.first().cloned();
    let (u_rep, worst_violation) = match &x_rep {
        Some(x) => {
            let g = match theta {
                None => components.clone(),
                Some(t) => cp.envelope_components(1.0, t),
            };
            let v = expected_components(&g, &mu_nu, x)?;
            (Some(v.iter().map(|v| 0.0 - v.max(0.0)).collect()), Some(violation(cp, mu, x)?.worst))
        }
        None => (None, None),
    };
    Ok(ReportRow {
        nu,
        variant: study.setting.name().to_string(),
        d_tv: dist.tv,
        d_w1: dist.w1,
        d_bl: dist.bl,
        d_mi: dist.mi,
        lambda: sv.lambda,
        theta: sv.theta,
        inf_plugin: plugin.value,
        x_plugin: plugin.representatives.first().cloned(),
        inf_stabilized: stab.value,
        u_rep,
        x_rep,
        dist_ref: None,
        worst_violation,
        eta_proxy: None,
        box_clipped: stab.box_clipped,
    })
}

/// Chance run with value errors, their log-log fit against the schedule distance,
/// the fitted proxy `eta_nu = exp(intercept) d_nu^slope` and the distance of `x_nu`
/// to the `(eps_nu + 2 eta_nu)`-level set of `phi`.
///
/// Without a fit (exact runs) the proxy is the value error itself.
pub fn run_chance(study: &ChanceStudy, level_set: Option<fn(f64) -> Vec<(f64, f64)>>) -> Result<SolveReport> {
    check_nus(&study.nus)?;
    study.schedule.validate_rules()?;
    study.grid.validate()?;
    if study.grid.dim() != study.problem.n {
        return Err(Error::InvalidInput(format!(
            "grid dimension {} differs from n = {}",
            study.grid.dim(),
            study.problem.n
        )));
    }
    if let Some(r) = &study.reference {
        if !r.inf_phi.is_finite() {
            return Err(Error::InvalidInput("the instance has no finite optimal value".into()));
        }
    }
    let xgrid = mi_grid(&study.grid)?;
    let mut rows = study.nus.par_iter().map(|&nu| chance_row(study, nu, &xgrid)).collect::<Result<Vec<ReportRow>>>()?;

    let mut fit = None;
    if let Some(r) = &study.reference {
        let inf_phi = r.inf_phi.value();
        let err = |row: &ReportRow| (row.inf_stabilized.value() - inf_phi).abs();
        let dist_of = |row: &ReportRow| -> Option<f64> {
            match study.schedule_distance {
                DistanceColumn::Tv => row.d_tv,
                DistanceColumn::W1 => row.d_w1,
                DistanceColumn::Bl => row.d_bl,
                DistanceColumn::Mi => row.d_mi,
                DistanceColumn::None => None,
            }
        };
        let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|row| dist_of(row).map(|d| (d, err(row)))).collect();
        fit = rate_fit(&pairs).ok();
        for row in &mut rows {
            let eta = match (&fit, dist_of(row)) {
                (Some(f), Some(d)) if d > 0.0 => f.intercept.exp() * d.powf(f.slope),
                _ => err(row),
            };
            row.eta_proxy = Some(eta);
            if let (Some(ls), Some(x)) = (level_set, &row.x_rep) {
                let d = dist_of(row).unwrap_or(0.0);
                let eps = study.schedule.epsilon.eval(row.nu, d).unwrap_or(0.0);
                row.dist_ref = ls(eps + 2.0 * eta)
                    .iter()
                    .map(|(lo, hi)| {
                        if x[0] < *lo {
                            lo - x[0]
                        } else if x[0] > *hi {
                            x[0] - hi
                        } else {
                            0.0
                        }
                    })
                    .reduce(f64::min);
            } else if let Some(x) = &row.x_rep {
                row.dist_ref = r.argmin.iter().map(|a| euclid(x, a)).reduce(f64::min);
            }
        }
    }
    Ok(SolveReport {
        schema: SCHEMA_VERSION,
        preset: study.name.clone(),
        schedule: study.schedule.clone(),
        seed: seed_of(&study.sequence),
        grid: study.grid.clone(),
        horizon: *study.nus.last().expect("nonempty"),
        reference: study.reference.clone(),
        rate_fit: fit,
        rows,
    })
}

/// Default solver grid of a preset.
pub fn default_grid(name: &str) -> GridSpec {
    let (bounds, res, rounds) = match name {
        "empirical-I" => ((-1.0, 1.0), 81, 2),
        "rate-s1" | "rate-s2" => ((0.0, 2.0), 101, 3),
        _ => ((-1.0, 3.0), 81, 3),
    };
    GridSpec::new(vec![bounds], res, rounds, 0.05).expect("valid default grid")
}

fn nu_power(alpha: f64, exponent: f64) -> Schedule {
    Schedule {
        alpha,
        proposition: Proposition::Tv,
        lambda: Rule::NuPower { exponent },
        theta: Rule::Absent,
        epsilon: Rule::Absent,
    }
}

/// Default schedule of a preset.
pub fn default_schedule(name: &str) -> Result<Schedule> {
    match name {
        "finite-I" => Ok(nu_power(1.0, 0.5)),
        "finite-II" => Ok(nu_power(2.0, 0.5)),
        "discrete-I" | "discrete-II" => Ok(nu_power(1.0, 1.0)),
        "empirical-I" => schedule_empirical(2.0),
        "rate-s1" => schedule_rate_s1(1.0),
        "rate-s2" => schedule_rate_s2(1.0),
        n => Err(Error::InvalidInput(format!("unknown preset `{n}`; known: {}", PRESETS.join(", ")))),
    }
}

/// Distance consumed by a composite schedule; `None` when `lambda` ignores it.
pub fn distance_column(schedule: &Schedule) -> DistanceColumn {
    match schedule.lambda {
        Rule::DistancePower { .. } => match schedule.proposition {
            Proposition::Bl | Proposition::RateS2 => DistanceColumn::Bl,
            Proposition::Mi | Proposition::RateS1 => DistanceColumn::Mi,
            Proposition::Fm => DistanceColumn::W1,
            _ => DistanceColumn::Tv,
        },
        _ => DistanceColumn::None,
    }
}

/// The composite preset `name`; discrete presets carry `horizon` atoms.
pub fn composite_preset(name: &str, horizon: u64, seed: u64) -> Result<Preset> {
    match name {
        "finite-I" => Ok(presets::finite_i()),
        "finite-II" => Ok(presets::finite_ii()),
        "discrete-I" => Ok(presets::discrete_i(horizon)),
        "discrete-II" => Ok(presets::discrete_ii(horizon)),
        "empirical-I" => Ok(presets::empirical_i(seed)),
        n => Err(Error::InvalidInput(format!("`{n}` is not a composite preset"))),
    }
}

/// The chance-constrained preset `name`.
pub fn chance_preset(name: &str) -> Result<ChancePreset> {
    match name {
        "rate-s1" => Ok(presets::rate_s1()),
        "rate-s2" => Ok(presets::rate_s2()),
        "finite-I-chance" => Ok(presets::finite_i_chance()),
        n => Err(Error::InvalidInput(format!("`{n}` is not a chance-constrained preset"))),
    }
}

fn composite_study(preset: Preset, nus: Vec<u64>, opts: &RunOptions) -> Result<CompositeStudy> {
    let mut variants = vec![Variant::Plain];
    variants.extend(preset.envelope.map(Variant::Envelope));
    let schedule = match &opts.schedule {
        Some(s) => s.clone(),
        None => default_schedule(preset.name)?,
    };
    let schedule_distance = distance_column(&schedule);
    Ok(CompositeStudy {
        name: preset.name.to_string(),
        grid: opts.grid.clone().unwrap_or_else(|| default_grid(preset.name)),
        problem: preset.problem,
        sequence: preset.sequence,
        variants,
        schedule,
        schedule_distance,
        penalty: PenaltyTag::EuclideanPower,
        nus,
        reference: Some(preset.reference),
        lp_cap: opts.lp_cap,
    })
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon < MIN_HORIZON {
        return Err(Error::InvalidInput(format!("horizon {horizon} is below the minimum {MIN_HORIZON}")));
    }
    Ok(())
}

/// Runs a registered preset up to `horizon`: `nu = 1..=horizon`, or `nu = 2^k <= horizon`
/// for the empirical preset.
pub fn run_preset(name: &str, horizon: u64, opts: &RunOptions) -> Result<SolveReport> {
    check_horizon(horizon)?;
    let linear: Vec<u64> = (1..=horizon).collect();
    match name {
        "finite-I" => run_composite(&composite_study(presets::finite_i(), linear, opts)?),
        "finite-II" => run_composite(&composite_study(presets::finite_ii(), linear, opts)?),
        "discrete-I" => run_composite(&composite_study(presets::discrete_i(horizon), linear, opts)?),
        "discrete-II" => run_composite(&composite_study(presets::discrete_ii(horizon), linear, opts)?),
        "empirical-I" => {
            let nus: Vec<u64> = (1..64).map(|k| 1u64 << k).take_while(|n| *n <= horizon).collect();
            run_composite(&composite_study(presets::empirical_i(opts.seed), nus, opts)?)
        }
        "rate-s1" => run_rate(ChanceSetting::S1, &presets::rate_s1(), horizon, opts),
        "rate-s2" => run_rate(ChanceSetting::S2, &presets::rate_s2(), horizon, opts),
        n => Err(Error::InvalidInput(format!("unknown preset `{n}`; known: {}", PRESETS.join(", ")))),
    }
}

/// Rate run of `instance` under `setting` for `nu = 1..=horizon`.
///
/// The schedule distance is total variation in (S1) and the 1-Wasserstein distance
/// in (S2); the latter dominates the bounded Lipschitz distance.
pub fn run_rate(
    setting: ChanceSetting,
    instance: &ChancePreset,
    horizon: u64,
    opts: &RunOptions,
) -> Result<SolveReport> {
    check_horizon(horizon)?;
    if !instance.reference.inf_phi.is_finite() {
        return Err(Error::InvalidInput(format!("{} has no finite optimal value", instance.name)));
    }
    let schedule = match (&opts.schedule, setting) {
        (Some(s), _) => s.clone(),
        (None, ChanceSetting::S1) => schedule_rate_s1(1.0)?,
        (None, ChanceSetting::S2) => schedule_rate_s2(1.0)?,
    };
    let schedule_distance = match (setting, &instance.sequence.base) {
        (ChanceSetting::S1, Distribution::Discrete(_)) => DistanceColumn::Tv,
        (ChanceSetting::S1, Distribution::Uniform(_)) => DistanceColumn::Mi,
        (ChanceSetting::S2, Distribution::Discrete(_)) => DistanceColumn::Bl,
        (ChanceSetting::S2, Distribution::Uniform(_)) => DistanceColumn::W1,
    };
    let study = ChanceStudy {
        name: instance.name.to_string(),
        problem: instance.problem.clone(),
        sequence: instance.sequence.clone(),
        setting,
        schedule,
        schedule_distance,
        grid: opts.grid.clone().unwrap_or_else(|| default_grid(instance.name)),
        nus: (1..=horizon).collect(),
        reference: Some(instance.reference.clone()),
        lp_cap: opts.lp_cap,
        exact: opts.exact,
    };
    run_chance(&study, Some(instance.level_set))
}

/// Epi-distance estimates between `f_nu` and `f` on a lattice over `(u, x)`.
pub fn epi_distance_sequence(
    preset: &Preset,
    schedule: &Schedule,
    nus: &[u64],
    rho: f64,
    lattice: &Lattice,
) -> Result<Vec<(u64, EpiDistanceEstimate)>> {
    let p = &preset.problem;
    let split = |z: &[f64]| -> (Vec<f64>, Vec<f64>) { (z[..p.m].to_vec(), z[p.m..].to_vec()) };
    if lattice.bounds.len() != p.m + p.n {
        return Err(Error::InvalidInput(format!("lattice must span (u, x) of dimension {}", p.m + p.n)));
    }
    let f = |z: &[f64]| -> Result<XReal> {
        let (u, x) = split(z);
        eval_rockafellian(p, &preset.mu, &u, &x)
    };
    nus.par_iter()
        .map(|&nu| {
            let mu_nu_d = preset.perturb(nu)?;
            let d = tv(
                preset.mu.as_discrete().ok_or_else(|| Error::Unsupported("needs a discrete base".into()))?,
                &mu_nu_d,
            )?;
            let sv = schedule.at(nu, d)?;
            let pen = PenaltyKind::new(PenaltyTag::EuclideanPower, schedule.alpha, sv.lambda)?;
            let mu_nu: Distribution = mu_nu_d.into();
            let g_nu = p.components.clone();
            let f_nu = |z: &[f64]| -> Result<XReal> {
                let (u, x) = split(z);
                eval_approx_rockafellian(p, &mu_nu, &g_nu, &pen, &u, &x)
            };
            Ok((nu, epi_distance(&f_nu, &f, rho, lattice)?))
        })
        .collect()
}
