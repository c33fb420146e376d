//! Solve reports, their CSV surface and comparison against registered expectations.

use serde::{Deserialize, Serialize};

use crate::diagnostics::RateFit;
use crate::experiments::presets::Reference;
use crate::schedules::Schedule;
use crate::solvers::GridSpec;
use crate::{Error, Point, Result, XReal};

/// Version of the serialized report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Row fields in serialization order.
pub const COLUMNS: [&str; 17] = [
    "nu",
    "variant",
    "d_tv",
    "d_w1",
    "d_bl",
    "d_mi",
    "lambda",
    "theta",
    "inf_plugin",
    "x_plugin",
    "inf_stabilized",
    "u_rep",
    "x_rep",
    "dist_ref",
    "worst_violation",
    "eta_proxy",
    "box_clipped",
];

/// One index `nu` of one variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub nu: u64,
    pub variant: String,
    pub d_tv: Option<f64>,
    pub d_w1: Option<f64>,
    pub d_bl: Option<f64>,
    pub d_mi: Option<f64>,
    pub lambda: f64,
    pub theta: Option<f64>,
    /// `inf phi_nu` over the grid; `+inf` only when no evaluated point is feasible.
    pub inf_plugin: XReal,
    pub x_plugin: Option<Point>,
    /// `inf f_nu` (composite) or the penalized value (chance).
    pub inf_stabilized: XReal,
    pub u_rep: Option<Point>,
    pub x_rep: Option<Point>,
    /// Distance from `(u_rep, x_rep)` to `{0} x argmin phi`, or from `x_rep` to the
    /// tolerance-enlarged level set in rate runs.
    pub dist_ref: Option<f64>,
    /// `min_i -E_mu[g_i(., x_rep)]`; negative values are violations under `mu`.
    pub worst_violation: Option<f64>,
    pub eta_proxy: Option<f64>,
    pub box_clipped: bool,
}

/// Rows ordered by variant then `nu`, with everything needed to reproduce them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: u32,
    pub preset: String,
    pub schedule: Schedule,
    pub seed: Option<u64>,
    pub grid: GridSpec,
    pub horizon: u64,
    pub reference: Option<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFit>,
    pub rows: Vec<ReportRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn point(v: &Option<Point>) -> String {
    v.as_ref().map_or_else(String::new, |p| p.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
}

impl ReportRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.nu.to_string(),
            self.variant.clone(),
            opt(self.d_tv),
            opt(self.d_w1),
            opt(self.d_bl),
            opt(self.d_mi),
            self.lambda.to_string(),
            opt(self.theta),
            self.inf_plugin.to_string(),
            point(&self.x_plugin),
            self.inf_stabilized.to_string(),
            point(&self.u_rep),
            point(&self.x_rep),
            opt(self.dist_ref),
            opt(self.worst_violation),
            opt(self.eta_proxy),
            self.box_clipped.to_string(),
        ]
    }

    /// Scalar view of a column; vectors yield their first coordinate, flags `0`/`1`.
    pub fn column(&self, name: &str) -> Result<Option<XReal>> {
        let first = |p: &Option<Point>| p.as_ref().and_then(|p| p.first().copied()).map(XReal::finite);
        let some = |v: Option<f64>| v.map(XReal::new).transpose();
        Ok(match name {
            "nu" => Some(XReal::finite(self.nu as f64)),
            "d_tv" => some(self.d_tv)?,
            "d_w1" => some(self.d_w1)?,
            "d_bl" => some(self.d_bl)?,
            "d_mi" => some(self.d_mi)?,
            "lambda" => Some(XReal::new(self.lambda)?),
            "theta" => some(self.theta)?,
            "inf_plugin" => Some(self.inf_plugin),
            "x_plugin" => first(&self.x_plugin),
            "inf_stabilized" => Some(self.inf_stabilized),
            "u_rep" => first(&self.u_rep),
            "x_rep" => first(&self.x_rep),
            "dist_ref" => some(self.dist_ref)?,
            "worst_violation" => some(self.worst_violation)?,
            "eta_proxy" => some(self.eta_proxy)?,
            "box_clipped" => Some(XReal::finite(if self.box_clipped { 1.0 } else { 0.0 })),
            other => return Err(Error::MissingColumn(other.to_string())),
        })
    }
}

impl SolveReport {
    /// Header row plus one line per report row; vectors are `;`-joined, absent values empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        w.write_record(COLUMNS).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.record()).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("csv: {e}")))
    }

    pub fn variant_rows<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.variant == variant)
    }
}

/// Target of a claim: a constant, the penalty floor `offset + gap^alpha/(alpha lambda_nu)`,
/// or `scale` times another column of the same row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Value(XReal),
    PenaltyFloor { gap: f64, offset: f64 },
    Column { column: String, scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `|actual - expected| <= tol`; infinite targets must match exactly.
    #[default]
    Within,
    /// `actual >= expected - tol`.
    AtLeast,
}

/// A registered claim about one column over a selection of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub claim: String,
    pub column: String,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub nu_min: Option<u64>,
    #[serde(default)]
    pub nu_max: Option<u64>,
    /// Only the largest `nu` of the selection.
    #[serde(default)]
    pub final_only: bool,
    /// Only rows with `lambda` strictly below this value.
    #[serde(default)]
    pub lambda_below: Option<f64>,
    pub expected: Expected,
    #[serde(default)]
    pub relation: Relation,
    #[serde(default)]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimVerdict {
    pub claim: String,
    pub pass: bool,
    pub rows_checked: usize,
    /// Largest `|actual - expected|` (or shortfall for `at-least`).
    pub worst_delta: f64,
    pub worst_nu: Option<u64>,
}

impl Expectation {
    fn new(claim: &str, column: &str, expected: Expected, tol: f64) -> Self {
        Expectation {
            claim: claim.to_string(),
            column: column.to_string(),
            variant: None,
            nu_min: None,
            nu_max: None,
            final_only: false,
            lambda_below: None,
            expected,
            relation: Relation::Within,
            tol,
        }
    }

    fn variant(mut self, v: &str) -> Self {
        self.variant = Some(v.to_string());
        self
    }

    fn at_final(mut self) -> Self {
        self.final_only = true;
        self
    }

    fn selects(&self, row: &ReportRow) -> bool {
        self.variant.as_ref().map_or(true, |v| *v == row.variant)
            && self.nu_min.map_or(true, |n| row.nu >= n)
            && self.nu_max.map_or(true, |n| row.nu <= n)
            && self.lambda_below.map_or(true, |l| row.lambda < l)
    }
}

fn value(v: f64) -> Expected {
    Expected::Value(XReal::finite(v))
}

/// Claims registered for the preset named in `report`; unregistered names have none.
pub fn registered_expectations(report: &SolveReport) -> Vec<Expectation> {
    let grid_tol = report.grid.final_cell_spacing().into_iter().fold(0.0, f64::max);
    let alpha = report.schedule.alpha;
    match report.preset.as_str() {
        "finite-I" => vec![
            Expectation::new("plugin-infinite", "inf_plugin", Expected::Value(XReal::POS_INF), 0.0),
            Expectation::new("stabilized-value", "inf_stabilized", value(0.0), 1e-2).at_final(),
            Expectation::new("stabilized-representative", "dist_ref", value(0.0), 1e-2).at_final(),
        ],
        "finite-II" => vec![
            Expectation::new("plugin-value", "inf_plugin", value(1.0), 0.0),
            Expectation::new("plugin-argmin", "x_plugin", value(1.0), grid_tol),
            Expectation::new("stabilized-value", "inf_stabilized", value(0.0), 1e-2).at_final(),
            Expectation::new("stabilized-representative", "dist_ref", value(0.0), 1e-2).at_final(),
        ],
        "discrete-I" => vec![
            Expectation::new(
                "penalty-formula",
                "inf_stabilized",
                Expected::PenaltyFloor { gap: 0.5, offset: 0.0 },
                0.0,
            )
            .variant("g"),
            Expectation::new("envelope-value", "inf_stabilized", value(1.0), 1e-2).variant("envelope").at_final(),
            Expectation::new("envelope-argmin", "x_rep", value(1.0), 1e-2).variant("envelope").at_final(),
        ],
        "discrete-II" => {
            let floor = 1.0 / (alpha * 2f64.powf(alpha));
            let plain = |e: Expectation| Expectation { lambda_below: Some(floor), ..e.variant("g") };
            vec![
                plain(Expectation::new("plain-value", "inf_stabilized", value(-0.5), 0.0)),
                plain(Expectation::new("plain-box-clipped", "box_clipped", value(1.0), 0.0)),
                plain(Expectation::new("plain-argmin-start", "x_rep", value(1.5), grid_tol)),
                Expectation::new("envelope-value", "inf_stabilized", value(-1.0), 1e-2).variant("envelope").at_final(),
                Expectation::new("envelope-argmin", "x_rep", value(1.0), 1e-2).variant("envelope").at_final(),
            ]
        }
        "empirical-I" => vec![Expectation::new("plugin-infinite", "inf_plugin", Expected::Value(XReal::POS_INF), 0.0)],
        "rate-s1" => vec![
            Expectation::new("plugin-value", "inf_plugin", value(1.0), 0.0),
            Expectation {
                relation: Relation::AtLeast,
                ..Expectation::new(
                    "violation-floor",
                    "worst_violation",
                    Expected::Column { column: "eta_proxy".into(), scale: -1.0 },
                    0.0,
                )
            },
        ],
        _ => Vec::new(),
    }
}

/// The registered claims named by `keys`.
pub fn select_claims(report: &SolveReport, keys: &[String]) -> Result<Vec<Expectation>> {
    let all = registered_expectations(report);
    keys.iter()
        .map(|k| all.iter().find(|e| e.claim == *k).cloned().ok_or_else(|| Error::UnknownClaim(k.clone())))
        .collect()
}

fn target(e: &Expectation, row: &ReportRow, alpha: f64) -> Result<Option<XReal>> {
    match &e.expected {
        Expected::Value(v) => Ok(Some(*v)),
        Expected::PenaltyFloor { gap, offset } => {
            Ok(Some(XReal::new(offset + gap.abs().powf(alpha) / (alpha * row.lambda))?))
        }
        Expected::Column { column, scale } => {
            Ok(row.column(column)?.map(|v| XReal::new(scale * v.value())).transpose()?)
        }
    }
}

/// Per-claim verdicts; a column no selected row carries is an error.
pub fn compare_expected(report: &SolveReport, expectations: &[Expectation]) -> Result<Vec<ClaimVerdict>> {
    let mut out = Vec::with_capacity(expectations.len());
    for e in expectations {
        let mut rows: Vec<&ReportRow> = report.rows.iter().filter(|r| e.selects(r)).collect();
        if e.final_only {
            let last = rows.iter().map(|r| r.nu).max();
            rows.retain(|r| Some(r.nu) == last);
        }
        let mut checked = 0;
        let mut pass = true;
        let mut worst_delta: f64 = 0.0;
        let mut worst_nu = None;
        for row in rows {
            let (Some(actual), Some(expected)) = (row.column(&e.column)?, target(e, row, report.schedule.alpha)?)
            else {
                continue;
            };
            checked += 1;
            let (ok, delta) = match e.relation {
                Relation::Within if !expected.is_finite() || !actual.is_finite() => {
                    let ok = actual == expected;
                    (ok, if ok { 0.0 } else { f64::INFINITY })
                }
                Relation::Within => {
                    let delta = (actual.value() - expected.value()).abs();
                    (delta <= e.tol, delta)
                }
                Relation::AtLeast => {
                    let shortfall = expected.value() - actual.value();
                    let delta = if shortfall.is_nan() { f64::INFINITY } else { shortfall.max(0.0) };
                    (delta <= e.tol, delta)
                }
            };
            pass &= ok;
            if worst_nu.is_none() || delta > worst_delta {
                worst_delta = delta;
                worst_nu = Some(row.nu);
            }
        }
        if checked == 0 {
            return Err(Error::MissingColumn(format!("{} (claim {})", e.column, e.claim)));
        }
        out.push(ClaimVerdict { claim: e.claim.clone(), pass, rows_checked: checked, worst_delta, worst_nu });
    }
    Ok(out)
}
