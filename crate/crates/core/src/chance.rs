//! Parametric event sets `H_i(x)` and chance-constrained problems
//! `minimize g0(x) subject to mu(H_i(x)) >= b_i`.

use serde::{Deserialize, Serialize};

use crate::distributions::{expectation, prob_of_set, Distribution};
use crate::model::{Component, ComponentIntegrand, CompositeProblem, Objective, OuterFunction, Support, XReal};
use crate::{Error, Result, COORD_TOL};

/// `constant + coef . x`; `constant` may be infinite for half-lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "AffineRepr", into = "AffineRepr")]
pub struct Affine {
    pub coef: Vec<f64>,
    pub constant: f64,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum AffineRepr {
    Constant(XReal),
    Map(AffineMap),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineMap {
    #[serde(default)]
    coef: Vec<f64>,
    constant: XReal,
}

impl From<AffineRepr> for Affine {
    fn from(r: AffineRepr) -> Self {
        match r {
            AffineRepr::Constant(c) => Affine::constant(c.value()),
            AffineRepr::Map(m) => Affine::new(m.coef, m.constant.value()),
        }
    }
}

impl From<Affine> for AffineRepr {
    fn from(a: Affine) -> Self {
        if a.coef.iter().all(|c| *c == 0.0) {
            AffineRepr::Constant(XReal::new(a.constant).expect("affine constant is not NaN"))
        } else {
            AffineRepr::Map(AffineMap {
                coef: a.coef,
                constant: XReal::new(a.constant).expect("affine constant is not NaN"),
            })
        }
    }
}

impl Affine {
    pub fn new(coef: Vec<f64>, constant: f64) -> Self {
        Affine { coef, constant }
    }

    pub fn constant(c: f64) -> Self {
        Affine { coef: Vec::new(), constant: c }
    }

    /// `x[0] + c`.
    pub fn shift(c: f64) -> Self {
        Affine { coef: vec![1.0], constant: c }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.constant.is_infinite() {
            return self.constant;
        }
        self.constant + self.coef.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
    }
}

/// A closed set `H(x) ⊂ R^d` whose parameters are affine in `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParamSet {
    /// `[lo(x), hi(x)] ⊂ R`; empty when `lo > hi`.
    Interval {
        lo: Affine,
        hi: Affine,
    },
    /// Product of intervals.
    Box {
        lo: Vec<Affine>,
        hi: Vec<Affine>,
    },
    /// Closed Euclidean ball; empty when the radius is negative.
    Ball {
        center: Vec<Affine>,
        radius: Affine,
    },
    /// `{xi : normal . xi <= offset(x)}`.
    Halfspace {
        normal: Vec<f64>,
        offset: Affine,
    },
    Union {
        members: Vec<ParamSet>,
    },
    /// `set(x)` when `x` lies in the closed box `[x_lo, x_hi]`, empty otherwise.
    Gated {
        set: Box<ParamSet>,
        x_lo: Vec<f64>,
        x_hi: Vec<f64>,
    },
}

impl ParamSet {
    pub fn interval(lo: Affine, hi: Affine) -> Self {
        ParamSet::Interval { lo, hi }
    }

    pub fn ball(center: Vec<Affine>, radius: Affine) -> Self {
        ParamSet::Ball { center, radius }
    }

    /// The whole space `R^dim`.
    pub fn full(dim: usize) -> Self {
        if dim == 1 {
            ParamSet::interval(Affine::constant(f64::NEG_INFINITY), Affine::constant(f64::INFINITY))
        } else {
            ParamSet::Box {
                lo: vec![Affine::constant(f64::NEG_INFINITY); dim],
                hi: vec![Affine::constant(f64::INFINITY); dim],
            }
        }
    }

    pub fn gated(set: ParamSet, x_lo: Vec<f64>, x_hi: Vec<f64>) -> Self {
        ParamSet::Gated { set: Box::new(set), x_lo, x_hi }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamSet::Interval { .. } => 1,
            ParamSet::Box { lo, .. } => lo.len(),
            ParamSet::Ball { center, .. } => center.len(),
            ParamSet::Halfspace { normal, .. } => normal.len(),
            ParamSet::Union { members } => members.first().map_or(0, ParamSet::dim),
            ParamSet::Gated { set, .. } => set.dim(),
        }
    }

    /// Checks the structural invariants of the class.
    pub fn validate(&self) -> Result<()> {
        match self {
            ParamSet::Interval { .. } => Ok(()),
            ParamSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidInput("box needs matching nonempty lo/hi".into()));
                }
                Ok(())
            }
            ParamSet::Ball { center, .. } => {
                if center.is_empty() {
                    return Err(Error::InvalidInput("ball needs a nonempty center".into()));
                }
                Ok(())
            }
            ParamSet::Halfspace { normal, .. } => {
                if normal.is_empty() {
                    return Err(Error::InvalidInput("halfspace needs a nonempty normal".into()));
                }
                Ok(())
            }
            ParamSet::Union { members } => {
                let d = members.first().ok_or_else(|| Error::InvalidInput("empty union".into()))?.dim();
                for m in members {
                    m.validate()?;
                    if m.dim() != d {
                        return Err(Error::InvalidInput("union members differ in dimension".into()));
                    }
                }
                Ok(())
            }
            ParamSet::Gated { set, x_lo, x_hi } => {
                if x_lo.len() != x_hi.len() {
                    return Err(Error::InvalidInput("gate box needs matching bounds".into()));
                }
                set.validate()
            }
        }
    }

    /// `H(x)` as a concrete set.
    pub fn at(&self, x: &[f64]) -> RealizedSet {
        match self {
            ParamSet::Interval { lo, hi } => {
                let (a, b) = (lo.eval(x), hi.eval(x));
                if a > b {
                    RealizedSet::Empty
                } else {
                    RealizedSet::Box { lo: vec![a], hi: vec![b] }
                }
            }
            ParamSet::Box { lo, hi } => {
                let lo: Vec<f64> = lo.iter().map(|a| a.eval(x)).collect();
                let hi: Vec<f64> = hi.iter().map(|a| a.eval(x)).collect();
                if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                    RealizedSet::Empty
                } else {
                    RealizedSet::Box { lo, hi }
                }
            }
            ParamSet::Ball { center, radius } => {
                let r = radius.eval(x);
                if r < 0.0 {
                    RealizedSet::Empty
                } else {
                    RealizedSet::Ball { center: center.iter().map(|a| a.eval(x)).collect(), radius: r }
                }
            }
            ParamSet::Halfspace { normal, offset } => {
                let b = offset.eval(x);
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 && b < 0.0 {
                    RealizedSet::Empty
                } else {
                    RealizedSet::Halfspace { normal: normal.clone(), offset: b, norm }
                }
            }
            ParamSet::Union { members } => {
                let parts: Vec<RealizedSet> =
                    members.iter().map(|m| m.at(x)).filter(|r| !matches!(r, RealizedSet::Empty)).collect();
                if parts.is_empty() {
                    RealizedSet::Empty
                } else {
                    RealizedSet::Union(parts)
                }
            }
            ParamSet::Gated { set, x_lo, x_hi } => {
                let open = x.iter().zip(x_lo.iter().zip(x_hi)).all(|(v, (a, b))| *a <= *v && *v <= *b);
                if open {
                    set.at(x)
                } else {
                    RealizedSet::Empty
                }
            }
        }
    }

    /// `H(x)` as a union of intervals when `d = 1`.
    pub fn intervals_1d(&self, x: &[f64]) -> Result<Vec<(f64, f64)>> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(format!("interval arithmetic on a set of dimension {}", self.dim())));
        }
        Ok(self.at(x).intervals_1d())
    }
}

/// A parametric set evaluated at a fixed `x`.
#[derive(Clone, Debug, PartialEq)]
pub enum RealizedSet {
    Empty,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64, norm: f64 },
    Union(Vec<RealizedSet>),
}

impl RealizedSet {
    pub fn is_empty(&self) -> bool {
        matches!(self, RealizedSet::Empty)
    }

    /// Closed-set membership with coordinate tolerance `1e-12`.
    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            RealizedSet::Empty => false,
            RealizedSet::Box { lo, hi } => {
                xi.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a - COORD_TOL <= *v && *v <= *b + COORD_TOL)
            }
            RealizedSet::Ball { center, radius } => euclid(xi, center) <= radius + COORD_TOL,
            RealizedSet::Halfspace { normal, offset, norm } => dot(normal, xi) <= offset + COORD_TOL * norm.max(1.0),
            RealizedSet::Union(parts) => parts.iter().any(|p| p.contains(xi)),
        }
    }

    /// Euclidean distance from `xi`; `None` for the empty set.
    pub fn distance(&self, xi: &[f64]) -> Option<f64> {
        if self.contains(xi) {
            return Some(0.0);
        }
        match self {
            RealizedSet::Empty => None,
            RealizedSet::Box { lo, hi } => Some(
                xi.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (a, b))| {
                        let e = (a - v).max(v - b).max(0.0);
                        e * e
                    })
                    .sum::<f64>()
                    .sqrt(),
            ),
            RealizedSet::Ball { center, radius } => Some((euclid(xi, center) - radius).max(0.0)),
            RealizedSet::Halfspace { normal, offset, norm } => {
                if *norm == 0.0 {
                    Some(0.0)
                } else {
                    Some(((dot(normal, xi) - offset) / norm).max(0.0))
                }
            }
            RealizedSet::Union(parts) => parts.iter().filter_map(|p| p.distance(xi)).min_by(f64::total_cmp),
        }
    }

    /// Union of closed intervals (one-dimensional sets only).
    pub fn intervals_1d(&self) -> Vec<(f64, f64)> {
        match self {
            RealizedSet::Empty => Vec::new(),
            RealizedSet::Box { lo, hi } => vec![(lo[0], hi[0])],
            RealizedSet::Ball { center, radius } => vec![(center[0] - radius, center[0] + radius)],
            RealizedSet::Halfspace { normal, offset, .. } => {
                let a = normal[0];
                if a > 0.0 {
                    vec![(f64::NEG_INFINITY, offset / a)]
                } else if a < 0.0 {
                    vec![(offset / a, f64::INFINITY)]
                } else {
                    vec![(f64::NEG_INFINITY, f64::INFINITY)]
                }
            }
            RealizedSet::Union(parts) => parts.iter().flat_map(RealizedSet::intervals_1d).collect(),
        }
    }

    /// Finite interval endpoints (one-dimensional sets only).
    pub fn boundary_1d(&self) -> Vec<f64> {
        self.intervals_1d().into_iter().flat_map(|(a, b)| [a, b]).filter(|v| v.is_finite()).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `xi ∈ H(x)`.
pub fn membership(h: &ParamSet, x: &[f64], xi: &[f64]) -> bool {
    h.at(x).contains(xi)
}

/// `dist(xi, H(x))`; the empty set is an error.
pub fn distance_to_set(h: &ParamSet, x: &[f64], xi: &[f64]) -> Result<f64> {
    h.at(x).distance(xi).ok_or(Error::EmptySet)
}

/// One chance constraint `mu(H(x)) >= level`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceConstraint {
    pub set: ParamSet,
    pub level: f64,
}

/// `minimize g0(x) subject to mu(H_i(x)) >= b_i, i = 1..m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChanceProblem {
    pub n: usize,
    pub g0: Objective,
    pub constraints: Vec<ChanceConstraint>,
    /// Declared Lipschitz modulus of `g0` on its domain, when known.
    pub lipschitz_g0: Option<f64>,
}

impl ChanceProblem {
    pub fn new(n: usize, g0: Objective, constraints: Vec<ChanceConstraint>) -> Result<Self> {
        if n == 0 || constraints.is_empty() {
            return Err(Error::InvalidInput("need n >= 1 and at least one constraint".into()));
        }
        let d = constraints[0].set.dim();
        for c in &constraints {
            c.set.validate()?;
            if c.set.dim() != d {
                return Err(Error::InvalidInput("constraint sets differ in dimension".into()));
            }
            if !(0.0..=1.0).contains(&c.level) {
                return Err(Error::InvalidInput(format!("level {} outside [0, 1]", c.level)));
            }
        }
        Ok(ChanceProblem { n, g0, constraints, lipschitz_g0: None })
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn d(&self) -> usize {
        self.constraints[0].set.dim()
    }

    /// Components `g_i(xi, x) = b_i - 1_{H_i(x)}(xi)`.
    pub fn components(&self) -> Vec<Component> {
        self.constraints.iter().map(|c| Component::indicator(c.level, c.set.clone())).collect()
    }

    /// Pasch-Hausdorff (or general `beta`) regularized components used by (S2).
    pub fn envelope_components(&self, beta: f64, theta: f64) -> Vec<Component> {
        self.constraints
            .iter()
            .map(|c| Component::IndicatorEnvelope { b: c.level, set: c.set.clone(), beta, theta })
            .collect()
    }

    /// The equivalent composite problem with `h` the orthant indicator.
    pub fn to_composite(&self) -> Result<CompositeProblem> {
        CompositeProblem::new(
            self.n,
            self.d(),
            self.g0.clone(),
            OuterFunction::OrthantIndicator,
            self.components(),
            Support::Whole { dim: self.d() },
            1.0,
        )
    }
}

/// Slacks `mu(H_i(x)) - b_i` and their minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub slacks: Vec<f64>,
    pub worst: f64,
}

fn probabilities(cp: &ChanceProblem, mu: &Distribution, x: &[f64]) -> Result<Vec<f64>> {
    cp.constraints.iter().map(|c| prob_of_set(mu, &c.set, x)).collect()
}

/// `g0(x)` if every chance constraint holds under `mu`, `+inf` otherwise.
pub fn chance_phi(cp: &ChanceProblem, mu: &Distribution, x: &[f64]) -> Result<XReal> {
    let g0 = cp.g0.eval(x)?;
    if g0.is_pos_inf() {
        return Ok(g0);
    }
    let probs = probabilities(cp, mu, x)?;
    if cp.constraints.iter().zip(&probs).all(|(c, p)| *p >= c.level) {
        Ok(g0)
    } else {
        Ok(XReal::POS_INF)
    }
}

fn check_penalty(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda > 0.0) || !(alpha >= 1.0) {
        return Err(Error::InvalidInput(format!("need lambda > 0 and alpha >= 1, got {lambda}, {alpha}")));
    }
    Ok(())
}

/// `g0(x) + (1/(alpha lambda)) sum_i max{0, b_i - mu_nu(H_i(x))}^alpha`.
pub fn penalized_s1(cp: &ChanceProblem, mu_nu: &Distribution, lambda: f64, alpha: f64, x: &[f64]) -> Result<XReal> {
    check_penalty(lambda, alpha)?;
    let g0 = cp.g0.eval(x)?;
    if g0.is_pos_inf() {
        return Ok(g0);
    }
    let probs = probabilities(cp, mu_nu, x)?;
    let pen: f64 = cp.constraints.iter().zip(&probs).map(|(c, p)| (c.level - p).max(0.0).powf(alpha)).sum();
    g0.add_f64(pen / (alpha * lambda))
}

/// Value of the (S2) penalized function and the constraints whose set was empty at `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct S2Value {
    pub value: XReal,
    pub empty_sets: Vec<usize>,
}

/// `g0(x) + (1/(alpha lambda)) sum_i max{0, b_i + E_{mu_nu}[min{0, dist(xi, H_i(x))/theta - 1}]}^alpha`.
///
/// An empty `H_i(x)` contributes `max{0, b_i}^alpha` and is flagged.
pub fn penalized_s2_detailed(
    cp: &ChanceProblem,
    mu_nu: &Distribution,
    lambda: f64,
    theta: f64,
    alpha: f64,
    x: &[f64],
) -> Result<S2Value> {
    check_penalty(lambda, alpha)?;
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("theta must be positive, got {theta}")));
    }
    let empty_sets: Vec<usize> =
        cp.constraints.iter().enumerate().filter(|(_, c)| c.set.at(x).is_empty()).map(|(i, _)| i).collect();
    let g0 = cp.g0.eval(x)?;
    if g0.is_pos_inf() {
        return Ok(S2Value { value: g0, empty_sets });
    }
    let comps = cp.envelope_components(1.0, theta);
    let v = expectation(mu_nu, &ComponentIntegrand::new(&comps, x), x)?;
    let pen: f64 = v.iter().map(|vi| vi.max(0.0).powf(alpha)).sum();
    Ok(S2Value { value: g0.add_f64(pen / (alpha * lambda))?, empty_sets })
}

pub fn penalized_s2(
    cp: &ChanceProblem,
    mu_nu: &Distribution,
    lambda: f64,
    theta: f64,
    alpha: f64,
    x: &[f64],
) -> Result<XReal> {
    penalized_s2_detailed(cp, mu_nu, lambda, theta, alpha, x).map(|v| v.value)
}

/// `x ∈ M(y) = {x ∈ dom g0 : mu(H_i(x)) >= b_i - y_i}`.
#[allow(non_snake_case)]
pub fn in_M(cp: &ChanceProblem, mu: &Distribution, y: &[f64], x: &[f64]) -> Result<bool> {
    if y.len() != cp.m() {
        return Err(Error::InvalidInput(format!("y must have length m = {}", cp.m())));
    }
    if cp.g0.eval(x)?.is_pos_inf() {
        return Ok(false);
    }
    let probs = probabilities(cp, mu, x)?;
    Ok(cp.constraints.iter().zip(&probs).zip(y).all(|((c, p), yi)| *p >= c.level - yi))
}

/// Exact slacks `mu(H_i(x)) - b_i`.
pub fn violation(cp: &ChanceProblem, mu: &Distribution, x: &[f64]) -> Result<ViolationReport> {
    let probs = probabilities(cp, mu, x)?;
    let slacks: Vec<f64> = cp.constraints.iter().zip(&probs).map(|(c, p)| p - c.level).collect();
    let worst = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ViolationReport { slacks, worst })
}
