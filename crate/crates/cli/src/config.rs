//! Run configuration: parsing, semantic validation and default filling.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rockrelax::distributions::{empirical, make_discrete, DiscreteDistribution, Distribution, Scheme, Uniform1D};
use rockrelax::envelopes::NamedEnvelope;
use rockrelax::experiments::presets::Reference;
use rockrelax::experiments::{default_grid, default_horizon, default_schedule, MIN_HORIZON, PRESETS};
use rockrelax::metrics::DEFAULT_LP_CAP;
use rockrelax::model::{Component, Objective, OuterFunction};
use rockrelax::schedules::{for_proposition, Proposition, Rule, Schedule};
use rockrelax::solvers::GridSpec;
use rockrelax::Point;

/// Horizon of custom problems when none is given.
pub const CUSTOM_HORIZON: u64 = 50;

/// Seed recorded when none is given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{format} parse error: {message}")]
    Parse { format: &'static str, message: String },
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Semantic(Vec<String>),
}

/// A distribution literal: listed atoms, a uniform law on an interval, or an empirical draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionLiteral {
    Atoms(AtomsLiteral),
    Tagged(TaggedLiteral),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsLiteral {
    pub atoms: Vec<Point>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaggedLiteral {
    Uniform1d { lower: f64, upper: f64 },
    Empirical { base: Box<DistributionLiteral>, n: u64, seed: u64 },
}

impl DistributionLiteral {
    pub fn build(&self) -> rockrelax::Result<Distribution> {
        match self {
            DistributionLiteral::Atoms(a) => Ok(make_discrete(a.atoms.clone(), a.weights.clone())?.into()),
            DistributionLiteral::Tagged(TaggedLiteral::Uniform1d { lower, upper }) => {
                Ok(Uniform1D::new(*lower, *upper)?.into())
            }
            DistributionLiteral::Tagged(TaggedLiteral::Empirical { base, n, seed }) => {
                Ok(empirical(&base.build()?, *n, *seed)?.into())
            }
        }
    }

    pub fn build_discrete(&self) -> rockrelax::Result<DiscreteDistribution> {
        match self.build()? {
            Distribution::Discrete(d) => Ok(d),
            Distribution::Uniform(_) => {
                Err(rockrelax::Error::Unsupported("a discrete distribution is required here".into()))
            }
        }
    }
}

/// Either a registered preset or a catalog problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<OuterFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Component>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_mx: Option<f64>,
    /// Hand-designed `G_nu` run alongside `G`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<NamedEnvelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl ProblemBlock {
    fn catalog_fields(&self) -> Vec<&'static str> {
        [
            ("n", self.n.is_some()),
            ("g0", self.g0.is_some()),
            ("h", self.h.is_some()),
            ("components", self.components.is_some()),
            ("bound_mx", self.bound_mx.is_some()),
            ("envelope", self.envelope.is_some()),
            ("reference", self.reference.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, set)| set.then_some(k))
        .collect()
    }
}

/// Rules replacing those of the proposition's default schedule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Rule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub proposition: Proposition,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<Overrides>,
}

impl ScheduleBlock {
    pub fn resolve(&self) -> rockrelax::Result<Schedule> {
        let mut s = for_proposition(self.proposition, self.alpha)?;
        if let Some(o) = &self.overrides {
            s.lambda = o.lambda.unwrap_or(s.lambda);
            s.theta = o.theta.unwrap_or(s.theta);
            s.epsilon = o.epsilon.unwrap_or(s.epsilon);
        }
        s.validate_rules()?;
        Ok(s)
    }

    /// The block reproducing `s` with every rule explicit.
    pub fn explicit(s: &Schedule) -> Self {
        ScheduleBlock {
            proposition: s.proposition,
            alpha: s.alpha,
            overrides: Some(Overrides { lambda: Some(s.lambda), theta: Some(s.theta), epsilon: Some(s.epsilon) }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_cap: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// `csv` for a `.csv` extension, `json` otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Surface syntax of a config text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Syntax {
    Json,
    Toml,
}

impl Syntax {
    /// TOML for a `.toml` extension, JSON otherwise.
    pub fn from_path(path: &Path) -> Syntax {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("toml") => Syntax::Toml,
            _ => Syntax::Json,
        }
    }
}

/// Parses, validates and fills defaults; every semantic error is reported at once.
pub fn parse_config(text: &str, syntax: Syntax) -> Result<RunConfig, ConfigError> {
    let raw: RunConfig = match syntax {
        Syntax::Json => {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse { format: "JSON", message: e.to_string() })?
        }
        Syntax::Toml => {
            toml::from_str(text).map_err(|e| ConfigError::Parse { format: "TOML", message: e.to_string() })?
        }
    };
    let errors = semantic_errors(&raw);
    if !errors.is_empty() {
        return Err(ConfigError::Semantic(errors));
    }
    Ok(fill_defaults(raw))
}

pub fn serialize_config(cfg: &RunConfig, syntax: Syntax) -> String {
    match syntax {
        Syntax::Json => serde_json::to_string_pretty(cfg).expect("config serializes"),
        Syntax::Toml => toml::to_string(cfg).expect("config serializes"),
    }
}

fn semantic_errors(cfg: &RunConfig) -> Vec<String> {
    let mut errors = Vec::new();
    let p = &cfg.problem;
    match &p.preset {
        Some(name) => {
            if !PRESETS.contains(&name.as_str()) {
                errors.push(format!("problem.preset: unknown preset `{name}`; known: {}", PRESETS.join(", ")));
            }
            let extra = p.catalog_fields();
            if !extra.is_empty() {
                errors.push(format!("problem: preset conflicts with catalog fields {}", extra.join(", ")));
            }
            if cfg.distribution.is_some() {
                errors.push("distribution: conflicts with problem.preset, which fixes its own distribution".into());
            }
            if cfg.perturbation.is_some() {
                errors.push("perturbation: conflicts with problem.preset, which fixes its own sequence".into());
            }
        }
        None => {
            for (key, missing) in [
                ("problem.n", p.n.is_none()),
                ("problem.g0", p.g0.is_none()),
                ("problem.h", p.h.is_none()),
                ("problem.components", p.components.is_none()),
                ("problem.bound_mx", p.bound_mx.is_none()),
                ("distribution", cfg.distribution.is_none()),
                ("perturbation", cfg.perturbation.is_none()),
            ] {
                if missing {
                    errors.push(format!("{key}: required without problem.preset"));
                }
            }
            if let Some(d) = &cfg.distribution {
                if let Err(e) = d.build() {
                    errors.push(format!("distribution: {e}"));
                }
            }
            if p.components.as_ref().is_some_and(Vec::is_empty) {
                errors.push("problem.components: at least one component is required".into());
            }
            if let (Some(h), Some(c)) = (&p.h, &p.components) {
                if let Err(e) = h.validate(c.len()) {
                    errors.push(format!("problem.h: {e}"));
                }
            }
            if p.bound_mx.is_some_and(|b| !(b >= 0.0)) {
                errors.push("problem.bound_mx: must be >= 0".into());
            }
        }
    }
    if let Some(s) = &cfg.schedule {
        if let Err(e) = s.resolve() {
            errors.push(format!("schedule: {e}"));
        }
    }
    if let Some(g) = cfg.solver.as_ref().and_then(|s| s.grid.as_ref()) {
        if let Err(e) = g.validate() {
            errors.push(format!("solver.grid: {e}"));
        } else if let Some(n) = p.n {
            if g.dim() != n {
                errors.push(format!("solver.grid: dimension {} differs from problem.n = {n}", g.dim()));
            }
        }
    }
    if cfg.solver.as_ref().and_then(|s| s.lp_cap) == Some(0) {
        errors.push("solver.lp_cap: must be positive".into());
    }
    if let Some(h) = cfg.horizon {
        if h < MIN_HORIZON {
            errors.push(format!("horizon: {h} is below the minimum {MIN_HORIZON}"));
        }
    }
    if let Some(OutputBlock { path: Some(path), format: Some(f) }) = &cfg.output {
        if Format::from_path(path) != *f && path.extension().is_some() {
            errors.push(format!("output: format {f:?} disagrees with the extension of {}", path.display()));
        }
    }
    errors
}

fn fill_defaults(mut cfg: RunConfig) -> RunConfig {
    let preset = cfg.problem.preset.clone();
    let horizon = cfg.horizon.unwrap_or_else(|| match &preset {
        Some(name) => default_horizon(name).expect("validated preset"),
        None => CUSTOM_HORIZON,
    });
    cfg.horizon = Some(horizon);
    cfg.seed = Some(cfg.seed.unwrap_or(DEFAULT_SEED));
    if cfg.schedule.is_none() {
        let s = match &preset {
            Some(name) => default_schedule(name).expect("validated preset"),
            None => for_proposition(Proposition::Tv, 1.0).expect("valid default schedule"),
        };
        cfg.schedule = Some(ScheduleBlock::explicit(&s));
    }
    let mut solver = cfg.solver.take().unwrap_or_default();
    if solver.grid.is_none() {
        solver.grid = Some(match &preset {
            Some(name) => default_grid(name),
            None => {
                let n = cfg.problem.n.unwrap_or(1);
                GridSpec::new(vec![(-3.0, 3.0); n], 81, 3, 0.05).expect("valid default grid")
            }
        });
    }
    solver.lp_cap = Some(solver.lp_cap.unwrap_or(DEFAULT_LP_CAP));
    cfg.solver = Some(solver);
    let mut output = cfg.output.take().unwrap_or_default();
    if output.format.is_none() {
        output.format = Some(output.path.as_deref().map_or(Format::Json, Format::from_path));
    }
    cfg.output = Some(output);
    cfg
}
