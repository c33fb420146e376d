//! The composite problem `phi(x) = g0(x) + h(E_mu[G(xi, x)])`, its plug-in
//! approximations and its (approximating) Rockafellians.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chance::{ParamSet, RealizedSet};
use crate::distributions::{expectation, Distribution, Integrand};
use crate::solvers::{grid_minimize, GridSpec};
use crate::xreal::{ext_f64, ext_vec};
use crate::{Error, Point, Result};

pub use crate::xreal::XReal;

/// A named user closure. Equality is by name and pointer identity.
pub struct Closure<F: ?Sized> {
    pub name: String,
    pub f: Arc<F>,
}

impl<F: ?Sized> Clone for Closure<F> {
    fn clone(&self) -> Self {
        Closure { name: self.name.clone(), f: Arc::clone(&self.f) }
    }
}

impl<F: ?Sized> fmt::Debug for Closure<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Closure({})", self.name)
    }
}

impl<F: ?Sized> PartialEq for Closure<F> {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.f, &other.f)
    }
}

pub type ObjectiveFn = dyn Fn(&[f64]) -> XReal + Send + Sync;
pub type ComponentFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// `scale * 1_{[lo, hi]}(x[coord])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    #[serde(default)]
    pub coord: usize,
    #[serde(with = "ext_f64")]
    pub lo: f64,
    #[serde(with = "ext_f64")]
    pub hi: f64,
    pub scale: f64,
}

/// Catalog of objective functions `g0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Objective {
    /// `sum_i a_i x_i^2 + sum_i b_i x_i + c`.
    Quadratic {
        a: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// `sum_i b_i x_i + c`.
    Affine {
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// `0` on the closed box, `+inf` outside.
    BoxIndicator {
        #[serde(with = "ext_vec")]
        lo: Vec<f64>,
        #[serde(with = "ext_vec")]
        hi: Vec<f64>,
    },
    /// Sum of scaled interval indicators.
    Steps {
        steps: Vec<Step>,
    },
    Sum {
        terms: Vec<Objective>,
    },
    #[serde(skip)]
    Custom(Closure<ObjectiveFn>),
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> Result<XReal> {
        match self {
            Objective::Quadratic { a, b, c } => {
                let q: f64 = a.iter().zip(x).map(|(a, x)| a * x * x).sum();
                let l: f64 = b.iter().zip(x).map(|(b, x)| b * x).sum();
                XReal::new(q + l + c)
            }
            Objective::Affine { b, c } => XReal::new(b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + c),
            Objective::BoxIndicator { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| *l <= *x && *x <= *h);
                Ok(if inside { XReal::ZERO } else { XReal::POS_INF })
            }
            Objective::Steps { steps } => {
                XReal::new(steps.iter().filter(|s| s.lo <= x[s.coord] && x[s.coord] <= s.hi).map(|s| s.scale).sum())
            }
            Objective::Sum { terms } => {
                let mut acc = XReal::ZERO;
                for t in terms {
                    acc = acc.add(t.eval(x)?)?;
                }
                Ok(acc)
            }
            Objective::Custom(c) => Ok((c.f)(x)),
        }
    }
}

/// Catalog of outer functions `h`; every member is proper, lsc and nondecreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OuterFunction {
    /// Indicator of the nonpositive orthant.
    OrthantIndicator,
    /// `w . v` with `w >= 0`.
    Linear { weights: Vec<f64> },
    /// `sum_i max{0, v_i}^alpha`.
    MaxPlusPower { alpha: f64 },
}

impl OuterFunction {
    pub fn eval(&self, v: &[f64]) -> XReal {
        match self {
            OuterFunction::OrthantIndicator => {
                if v.iter().all(|vi| *vi <= 0.0) {
                    XReal::ZERO
                } else {
                    XReal::POS_INF
                }
            }
            OuterFunction::Linear { weights } => XReal::finite(weights.iter().zip(v).map(|(w, v)| w * v).sum()),
            OuterFunction::MaxPlusPower { alpha } => XReal::finite(v.iter().map(|vi| vi.max(0.0).powf(*alpha)).sum()),
        }
    }

    /// Checks that `h` accepts `m` components.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            OuterFunction::OrthantIndicator => Ok(()),
            OuterFunction::Linear { weights } => {
                if weights.len() != m {
                    return Err(Error::InvalidInput(format!("linear h has {} weights, m = {m}", weights.len())));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidInput("linear h needs nonnegative weights".into()));
                }
                Ok(())
            }
            OuterFunction::MaxPlusPower { alpha } => {
                if !(*alpha >= 1.0) {
                    return Err(Error::InvalidInput(format!("max-plus-power needs alpha >= 1, got {alpha}")));
                }
                Ok(())
            }
        }
    }
}

/// Catalog of component functions `g_i(xi, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Component {
    /// `b - 1_{H(x)}(xi)`.
    ConstMinusSet { b: f64, set: ParamSet },
    /// `a_xi . xi + a_x . x + c`.
    Affine {
        a_xi: Vec<f64>,
        #[serde(default)]
        a_x: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// `scale * clamp(xi[coord], lo, hi)`.
    ClampedCoordinate {
        #[serde(default)]
        coord: usize,
        lo: f64,
        hi: f64,
        scale: f64,
    },
    /// Epigraphical regularization of `b - 1_{H(x)}` over the whole space:
    /// `b + min{0, dist(xi, H(x))^beta / (beta theta) - 1}`.
    IndicatorEnvelope { b: f64, set: ParamSet, beta: f64, theta: f64 },
    #[serde(skip)]
    Custom(Closure<ComponentFn>),
}

impl Component {
    /// `b - 1_{H(x)}(xi)`.
    pub fn indicator(b: f64, set: ParamSet) -> Self {
        Component::ConstMinusSet { b, set }
    }

    pub fn custom(name: &str, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Component::Custom(Closure { name: name.to_string(), f: Arc::new(f) })
    }

    pub fn prepare(&self, x: &[f64]) -> Prepared {
        match self {
            Component::ConstMinusSet { b, set } => Prepared::Indicator { b: *b, set: set.at(x) },
            Component::Affine { a_xi, a_x, c } => {
                Prepared::Affine { a_xi: a_xi.clone(), base: c + a_x.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() }
            }
            Component::ClampedCoordinate { coord, lo, hi, scale } => {
                Prepared::Clamped { coord: *coord, lo: *lo, hi: *hi, scale: *scale }
            }
            Component::IndicatorEnvelope { b, set, beta, theta } => {
                Prepared::Envelope { b: *b, set: set.at(x), beta: *beta, theta: *theta }
            }
            Component::Custom(c) => Prepared::Custom { f: Arc::clone(&c.f), x: x.to_vec() },
        }
    }

    pub fn eval(&self, xi: &[f64], x: &[f64]) -> f64 {
        self.prepare(x).eval(xi)
    }

    /// `sup |g(xi, x)|` over all arguments when the catalog entry is bounded.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Component::ConstMinusSet { b, .. } | Component::IndicatorEnvelope { b, .. } => {
                Some(b.abs().max((b - 1.0).abs()))
            }
            Component::ClampedCoordinate { lo, hi, scale, .. } => Some(scale.abs() * lo.abs().max(hi.abs())),
            Component::Affine { .. } | Component::Custom(_) => None,
        }
    }
}

/// A component with its `x`-dependence resolved.
#[derive(Clone)]
pub enum Prepared {
    Indicator { b: f64, set: RealizedSet },
    Affine { a_xi: Vec<f64>, base: f64 },
    Clamped { coord: usize, lo: f64, hi: f64, scale: f64 },
    Envelope { b: f64, set: RealizedSet, beta: f64, theta: f64 },
    Custom { f: Arc<ComponentFn>, x: Vec<f64> },
}

impl Prepared {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        match self {
            Prepared::Indicator { b, set } => {
                if set.contains(xi) {
                    b - 1.0
                } else {
                    *b
                }
            }
            Prepared::Affine { a_xi, base } => base + a_xi.iter().zip(xi).map(|(a, v)| a * v).sum::<f64>(),
            Prepared::Clamped { coord, lo, hi, scale } => scale * xi[*coord].clamp(*lo, *hi),
            Prepared::Envelope { b, set, beta, theta } => match set.distance(xi) {
                Some(d) => b + (d.powf(*beta) / (beta * theta) - 1.0).min(0.0),
                None => *b,
            },
            Prepared::Custom { f, x } => f(xi, x),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Prepared::Indicator { set, .. } => set.boundary_1d(),
            Prepared::Envelope { set, beta, theta, .. } => {
                let reach = (beta * theta).powf(1.0 / beta);
                set.boundary_1d().into_iter().flat_map(|e| [e - reach, e, e + reach]).collect()
            }
            Prepared::Clamped { lo, hi, .. } => vec![*lo, *hi],
            Prepared::Affine { .. } | Prepared::Custom { .. } => Vec::new(),
        }
    }
}

/// The vector `G(., x)` as an [`Integrand`], with sets resolved once per `x`.
pub struct ComponentIntegrand {
    prepared: Vec<Prepared>,
}

impl ComponentIntegrand {
    pub fn new(components: &[Component], x: &[f64]) -> Self {
        ComponentIntegrand { prepared: components.iter().map(|c| c.prepare(x)).collect() }
    }
}

impl Integrand for ComponentIntegrand {
    fn out_dim(&self) -> usize {
        self.prepared.len()
    }
    fn eval(&self, xi: &[f64], _x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.prepared) {
            *o = p.eval(xi);
        }
    }
    fn breakpoints(&self, _x: &[f64]) -> Vec<f64> {
        self.prepared.iter().flat_map(Prepared::breakpoints).collect()
    }
}

/// `E_mu[G(xi, x)]`.
pub fn expected_components(components: &[Component], mu: &Distribution, x: &[f64]) -> Result<Vec<f64>> {
    expectation(mu, &ComponentIntegrand::new(components, x), x)
}

/// Description of the ambient support `Xi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Support {
    Atoms { atoms: Vec<Point> },
    Interval { lower: f64, upper: f64 },
    Whole { dim: usize },
}

/// `phi(x) = g0(x) + h(E_mu[G(xi, x)])` with `x in R^n`, `xi in R^d`, `G` with `m` components.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeProblem {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub g0: Objective,
    pub h: OuterFunction,
    pub components: Vec<Component>,
    pub support: Support,
    /// Declared bound `M_x` on `|g_i|`.
    pub bound_mx: f64,
}

impl CompositeProblem {
    pub fn new(
        n: usize,
        d: usize,
        g0: Objective,
        h: OuterFunction,
        components: Vec<Component>,
        support: Support,
        bound_mx: f64,
    ) -> Result<Self> {
        if n == 0 || d == 0 || components.is_empty() {
            return Err(Error::InvalidInput("n, d and the number of components must be positive".into()));
        }
        let m = components.len();
        h.validate(m)?;
        if !(bound_mx >= 0.0) {
            return Err(Error::InvalidInput(format!("declared bound M_x must be >= 0, got {bound_mx}")));
        }
        Ok(CompositeProblem { n, m, d, g0, h, components, support, bound_mx })
    }
}

/// Penalty shapes for the relaxation variable `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyTag {
    /// `|u|_2^alpha / (alpha lambda)`.
    EuclideanPower,
    /// `sum_i |u_i|^alpha / (alpha lambda)`.
    SeparablePower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyKind {
    pub tag: PenaltyTag,
    pub alpha: f64,
    pub lambda: f64,
}

impl PenaltyKind {
    pub fn new(tag: PenaltyTag, alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("penalty needs alpha >= 1 and lambda > 0, got {alpha}, {lambda}")));
        }
        Ok(PenaltyKind { tag, alpha, lambda })
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let s = match self.tag {
            PenaltyTag::EuclideanPower => u.iter().map(|v| v * v).sum::<f64>().sqrt().powf(self.alpha),
            PenaltyTag::SeparablePower => u.iter().map(|v| v.abs().powf(self.alpha)).sum(),
        };
        s / (self.alpha * self.lambda)
    }
}

fn check_x(problem: &CompositeProblem, x: &[f64]) -> Result<()> {
    if x.len() != problem.n || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("x must be a finite vector of length {}", problem.n)));
    }
    Ok(())
}

fn check_u(problem: &CompositeProblem, u: &[f64]) -> Result<()> {
    if u.len() != problem.m {
        return Err(Error::InvalidInput(format!("u must have length m = {}", problem.m)));
    }
    Ok(())
}

/// `phi(x)`.
pub fn eval_phi(problem: &CompositeProblem, mu: &Distribution, x: &[f64]) -> Result<XReal> {
    check_x(problem, x)?;
    let g0 = problem.g0.eval(x)?;
    if g0.is_pos_inf() {
        return Ok(g0);
    }
    let v = expected_components(&problem.components, mu, x)?;
    g0.add(problem.h.eval(&v))
}

/// `phi_nu(x)`: `phi` with `mu` replaced by `mu_nu`.
pub fn eval_plugin(problem: &CompositeProblem, mu_nu: &Distribution, x: &[f64]) -> Result<XReal> {
    eval_phi(problem, mu_nu, x)
}

/// `f(u, x) = g0(x) + h(u + E_mu[G]) + iota_{0}(u)`.
pub fn eval_rockafellian(problem: &CompositeProblem, mu: &Distribution, u: &[f64], x: &[f64]) -> Result<XReal> {
    check_u(problem, u)?;
    if u.iter().any(|v| *v != 0.0) {
        check_x(problem, x)?;
        return Ok(XReal::POS_INF);
    }
    eval_phi(problem, mu, x)
}

/// `f_nu(u, x) = g0(x) + h(u + E_{mu_nu}[G_nu]) + penalty(u)`.
pub fn eval_approx_rockafellian(
    problem: &CompositeProblem,
    mu_nu: &Distribution,
    g_nu: &[Component],
    penalty: &PenaltyKind,
    u: &[f64],
    x: &[f64],
) -> Result<XReal> {
    check_x(problem, x)?;
    check_u(problem, u)?;
    if g_nu.len() != problem.m {
        return Err(Error::InvalidInput(format!("G_nu must have m = {} components", problem.m)));
    }
    let g0 = problem.g0.eval(x)?;
    if g0.is_pos_inf() {
        return Ok(g0);
    }
    let v = expected_components(g_nu, mu_nu, x)?;
    let shifted: Vec<f64> = v.iter().zip(u).map(|(v, u)| v + u).collect();
    g0.add(problem.h.eval(&shifted))?.add_f64(penalty.value(u))
}

/// `inf_u f_nu(u, x)` together with a minimizing `u`.
///
/// Closed form for the orthant indicator; other outer functions fall back to
/// grid minimization over `u` in a box scaled to `E_{mu_nu}[G_nu]`.
pub fn partial_min_u_with_arg(
    problem: &CompositeProblem,
    mu_nu: &Distribution,
    g_nu: &[Component],
    penalty: &PenaltyKind,
    x: &[f64],
) -> Result<(XReal, Vec<f64>)> {
    check_x(problem, x)?;
    let g0 = problem.g0.eval(x)?;
    if g0.is_pos_inf() {
        return Ok((g0, vec![0.0; problem.m]));
    }
    let v = expected_components(g_nu, mu_nu, x)?;
    match problem.h {
        OuterFunction::OrthantIndicator => {
            let u: Vec<f64> = v.iter().map(|vi| 0.0 - vi.max(0.0)).collect();
            Ok((g0.add_f64(penalty.value(&u))?, u))
        }
        _ => {
            if problem.m > 3 {
                return Err(Error::Unsupported("grid fallback over u needs m <= 3".into()));
            }
            let radius = 3.0 * v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            let spec = GridSpec::new(vec![(-radius, radius); problem.m], 61, 4, 0.05)?;
            let h = &problem.h;
            let obj = |u: &[f64]| -> Result<XReal> {
                let shifted: Vec<f64> = v.iter().zip(u).map(|(v, u)| v + u).collect();
                h.eval(&shifted).add_f64(penalty.value(u))
            };
            let res = grid_minimize(&obj, &spec)?;
            let u = res.representatives.first().cloned().unwrap_or_else(|| vec![0.0; problem.m]);
            Ok((g0.add(res.value)?, u))
        }
    }
}

/// `phi_f^nu(x) = inf_u f_nu(u, x)`.
pub fn partial_min_u(
    problem: &CompositeProblem,
    mu_nu: &Distribution,
    g_nu: &[Component],
    penalty: &PenaltyKind,
    x: &[f64],
) -> Result<XReal> {
    partial_min_u_with_arg(problem, mu_nu, g_nu, penalty, x).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chance::Affine;
    use crate::distributions::{make_discrete, DiscreteDistribution};
    use crate::experiments::presets;
    use proptest::prelude::*;

    fn finite_i() -> (CompositeProblem, Distribution) {
        let p = presets::finite_i();
        (p.problem, p.mu)
    }

    #[test]
    fn phi_finite_i() {
        let (p, mu) = finite_i();
        let v = eval_phi(&p, &mu, &[0.3]).unwrap().value();
        assert!((v - 0.09).abs() < 1e-15);
    }

    #[test]
    fn phi_finite_ii_off_support() {
        let p = presets::finite_ii();
        assert_eq!(eval_phi(&p.problem, &p.mu, &[0.5]).unwrap(), XReal::POS_INF);
    }

    #[test]
    fn phi_discrete_ii_at_first_atom() {
        let p = presets::discrete_ii(10);
        assert_eq!(eval_phi(&p.problem, &p.mu, &[1.0]).unwrap(), XReal::finite(-1.0));
    }

    #[test]
    fn plugin_finite_i_is_infinite() {
        let p = presets::finite_i();
        for nu in [1, 2, 7, 50] {
            let mu_nu: Distribution = p.perturb(nu).unwrap().into();
            for x in [-1.0, 0.0, 0.5, 1.0] {
                assert_eq!(eval_plugin(&p.problem, &mu_nu, &[x]).unwrap(), XReal::POS_INF);
            }
        }
    }

    #[test]
    fn plugin_finite_ii_first_member() {
        let p = presets::finite_ii();
        let mu_nu: Distribution = p.perturb(1).unwrap().into();
        assert_eq!(eval_plugin(&p.problem, &mu_nu, &[1.0]).unwrap(), XReal::finite(1.0));
    }

    #[test]
    fn plugin_with_exact_distribution_is_phi() {
        let (p, mu) = finite_i();
        assert_eq!(eval_plugin(&p, &mu, &[0.2]).unwrap(), eval_phi(&p, &mu, &[0.2]).unwrap());
    }

    #[test]
    fn rockafellian_cases() {
        let (p, mu) = finite_i();
        assert_eq!(eval_rockafellian(&p, &mu, &[0.0], &[0.7]).unwrap(), eval_phi(&p, &mu, &[0.7]).unwrap());
        assert_eq!(eval_rockafellian(&p, &mu, &[0.1], &[0.7]).unwrap(), XReal::POS_INF);
        assert_eq!(eval_rockafellian(&p, &mu, &[0.0], &[0.0]).unwrap(), XReal::ZERO);
    }

    #[test]
    fn approx_rockafellian_discrete_i() {
        let p = presets::discrete_i(10);
        for nu in [2u64, 3, 9] {
            let lambda = 1.0 / nu as f64;
            let pen = PenaltyKind::new(PenaltyTag::EuclideanPower, 1.0, lambda).unwrap();
            let mu_nu: Distribution = p.perturb(nu).unwrap().into();
            let v = eval_approx_rockafellian(&p.problem, &mu_nu, &p.problem.components, &pen, &[-0.5], &[0.0]).unwrap();
            assert_eq!(v, XReal::finite(1.0 / (2.0 * lambda)));
        }
    }

    #[test]
    fn approx_rockafellian_at_zero_is_plugin() {
        let p = presets::finite_ii();
        let pen = PenaltyKind::new(PenaltyTag::EuclideanPower, 2.0, 0.3).unwrap();
        for nu in [1, 4] {
            let mu_nu: Distribution = p.perturb(nu).unwrap().into();
            for x in [0.0, 0.5, 1.0] {
                assert_eq!(
                    eval_approx_rockafellian(&p.problem, &mu_nu, &p.problem.components, &pen, &[0.0], &[x]).unwrap(),
                    eval_plugin(&p.problem, &mu_nu, &[x]).unwrap()
                );
            }
        }
    }

    #[test]
    fn approx_rockafellian_discrete_ii() {
        let p = presets::discrete_ii(10);
        let pen = PenaltyKind::new(PenaltyTag::EuclideanPower, 1.0, 0.2).unwrap();
        let mu_nu: Distribution = p.perturb(5).unwrap().into();
        let v = eval_approx_rockafellian(&p.problem, &mu_nu, &p.problem.components, &pen, &[0.0], &[1.5]).unwrap();
        assert_eq!(v, XReal::finite(-0.5));
    }

    #[test]
    fn partial_min_finite_i() {
        let p = presets::finite_i();
        for nu in [1u64, 3, 10] {
            let lambda = 0.37;
            let mu_nu: Distribution = p.perturb(nu).unwrap().into();
            let pen = PenaltyKind::new(PenaltyTag::SeparablePower, 1.0, lambda).unwrap();
            let v = partial_min_u(&p.problem, &mu_nu, &p.problem.components, &pen, &[0.0]).unwrap().value();
            let expected = (1.0 / lambda) * (1.0 / (nu as f64 + 1.0));
            assert!((v - expected).abs() < 1e-15, "{v} vs {expected}");
        }
    }

    #[test]
    fn partial_min_feasible_is_g0() {
        let (p, mu) = finite_i();
        let pen = PenaltyKind::new(PenaltyTag::EuclideanPower, 1.5, 0.1).unwrap();
        assert_eq!(partial_min_u(&p, &mu, &p.components, &pen, &[0.4]).unwrap(), p.g0.eval(&[0.4]).unwrap());
    }

    #[test]
    fn partial_min_fallback_for_linear_h() {
        let mut p = presets::finite_i().problem;
        p.h = OuterFunction::Linear { weights: vec![1.0] };
        let mu: Distribution = make_discrete(vec![vec![0.0], vec![1.0]], vec![0.2, 0.8]).unwrap().into();
        // alpha = 2: minimize w (u + v) + u^2 / (2 lambda) at u = -lambda w.
        let pen = PenaltyKind::new(PenaltyTag::EuclideanPower, 2.0, 0.5).unwrap();
        let v = expected_components(&p.components, &mu, &[0.0]).unwrap()[0];
        let exact = v - 0.5 / 2.0;
        let got = partial_min_u(&p, &mu, &p.components, &pen, &[0.0]).unwrap().value();
        assert!((got - exact).abs() < 1e-4, "{got} vs {exact}");
    }

    #[test]
    fn dimension_errors() {
        let (p, mu) = finite_i();
        assert!(eval_phi(&p, &mu, &[0.0, 1.0]).is_err());
        assert!(eval_rockafellian(&p, &mu, &[0.0, 0.0], &[0.0]).is_err());
        assert!(eval_phi(&p, &mu, &[f64::NAN]).is_err());
    }

    #[test]
    fn opposite_infinities_surface_as_error() {
        let mut p = finite_i().0;
        p.g0 = Objective::Custom(Closure { name: "minus-inf".into(), f: Arc::new(|_x: &[f64]| XReal::NEG_INF) });
        let mu: Distribution = DiscreteDistribution::dirac(vec![1.0]).into();
        assert_eq!(eval_phi(&p, &mu, &[0.0]), Err(Error::Indeterminate));
    }

    #[test]
    fn objective_catalog() {
        let q = Objective::Quadratic { a: vec![1.0], b: vec![2.0], c: 1.0 };
        assert_eq!(q.eval(&[1.0]).unwrap(), XReal::finite(4.0));
        let b = Objective::BoxIndicator { lo: vec![0.0], hi: vec![2.0] };
        assert_eq!(b.eval(&[2.5]).unwrap(), XReal::POS_INF);
        let s = Objective::Steps {
            steps: vec![
                Step { coord: 0, lo: f64::NEG_INFINITY, hi: 1.0, scale: -1.0 },
                Step { coord: 0, lo: 1.5, hi: f64::INFINITY, scale: -0.5 },
            ],
        };
        assert_eq!(s.eval(&[1.0]).unwrap(), XReal::finite(-1.0));
        assert_eq!(s.eval(&[1.2]).unwrap(), XReal::ZERO);
        assert_eq!(s.eval(&[7.0]).unwrap(), XReal::finite(-0.5));
        let sum = Objective::Sum { terms: vec![q, b] };
        assert_eq!(sum.eval(&[1.0]).unwrap(), XReal::finite(4.0));
    }

    #[test]
    fn component_catalog() {
        let c = Component::indicator(0.5, ParamSet::interval(Affine::constant(0.0), Affine::constant(1.0)));
        assert_eq!(c.eval(&[0.5], &[0.0]), -0.5);
        assert_eq!(c.eval(&[1.5], &[0.0]), 0.5);
        let a = Component::Affine { a_xi: vec![2.0], a_x: vec![1.0], c: 1.0 };
        assert_eq!(a.eval(&[1.0], &[3.0]), 6.0);
        let k = Component::ClampedCoordinate { coord: 0, lo: -1.0, hi: 1.0, scale: -1.0 };
        assert_eq!(k.eval(&[3.0], &[0.0]), -1.0);
        assert_eq!(k.bound(), Some(1.0));
    }

    fn random_problem(m: usize) -> impl Strategy<Value = (CompositeProblem, Distribution)> {
        let comps = prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.5), m);
        let atoms = prop::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 1..5);
        (comps, atoms).prop_map(move |(comps, atoms)| {
            let components = comps
                .into_iter()
                .map(|(b, lo, w)| {
                    Component::indicator(
                        b,
                        ParamSet::interval(Affine::new(vec![1.0], lo), Affine::new(vec![1.0], lo + w)),
                    )
                })
                .collect();
            let p = CompositeProblem::new(
                1,
                1,
                Objective::Quadratic { a: vec![1.0], b: vec![], c: 0.0 },
                OuterFunction::OrthantIndicator,
                components,
                Support::Whole { dim: 1 },
                2.0,
            )
            .unwrap();
            let mu =
                make_discrete(atoms.iter().map(|a| vec![a.0]).collect(), atoms.iter().map(|a| a.1).collect()).unwrap();
            (p, mu.into())
        })
    }

    proptest! {
        #[test]
        fn rockafellian_identity(x in -3.0f64..3.0) {
            for preset in [presets::finite_i(), presets::finite_ii(), presets::discrete_i(5), presets::discrete_ii(5)] {
                let u = vec![0.0; preset.problem.m];
                prop_assert_eq!(
                    eval_rockafellian(&preset.problem, &preset.mu, &u, &[x]).unwrap(),
                    eval_phi(&preset.problem, &preset.mu, &[x]).unwrap()
                );
            }
        }

        #[test]
        fn partial_min_matches_grid((p, mu) in random_problem(2), x in -1.5f64..1.5, alpha in 1.0f64..3.0, lambda in 0.2f64..2.0) {
            for tag in [PenaltyTag::EuclideanPower, PenaltyTag::SeparablePower] {
                let pen = PenaltyKind::new(tag, alpha, lambda).unwrap();
                let closed = partial_min_u(&p, &mu, &p.components, &pen, &[x]).unwrap();
                let spec = GridSpec::new(vec![(-3.0, 3.0); 2], 61, 4, 0.05).unwrap();
                let obj = |u: &[f64]| eval_approx_rockafellian(&p, &mu, &p.components, &pen, u, &[x]);
                let grid = grid_minimize(&obj, &spec).unwrap();
                // Penalty modulus on the finest cell bounds the grid error.
                let h = 6.0 / 60.0 / 256.0;
                let modulus = 2.0 * 3.0f64.powf(alpha - 1.0) / lambda;
                prop_assert!(grid.value >= closed);
                prop_assert!(grid.value.value() - closed.value() <= modulus * h * 2.0 + 1e-12,
                    "grid {} closed {}", grid.value, closed);
            }
        }

        #[test]
        fn penalty_monotone_in_lambda((p, mu) in random_problem(2), x in -1.5f64..1.5, l1 in 0.05f64..1.0, dl in 0.0f64..1.0) {
            for tag in [PenaltyTag::EuclideanPower, PenaltyTag::SeparablePower] {
                let a = partial_min_u(&p, &mu, &p.components, &PenaltyKind::new(tag, 1.5, l1).unwrap(), &[x]).unwrap();
                let b = partial_min_u(&p, &mu, &p.components, &PenaltyKind::new(tag, 1.5, l1 + dl).unwrap(), &[x]).unwrap();
                prop_assert!(a >= b);
            }
        }

        #[test]
        fn tags_agree_for_single_component((p, mu) in random_problem(1), x in -1.5f64..1.5, alpha in 1.0f64..3.0, lambda in 0.1f64..2.0) {
            let e = partial_min_u(&p, &mu, &p.components, &PenaltyKind::new(PenaltyTag::EuclideanPower, alpha, lambda).unwrap(), &[x]).unwrap();
            let s = partial_min_u(&p, &mu, &p.components, &PenaltyKind::new(PenaltyTag::SeparablePower, alpha, lambda).unwrap(), &[x]).unwrap();
            prop_assert_eq!(e, s);
        }

        #[test]
        fn outer_functions_nondecreasing(v in prop::collection::vec(-2.0f64..2.0, 3), i in 0usize..3, bump in 0.0f64..1.0, w in prop::collection::vec(0.0f64..2.0, 3), alpha in 1.0f64..3.0) {
            let mut up = v.clone();
            up[i] += bump;
            for h in [OuterFunction::OrthantIndicator, OuterFunction::Linear { weights: w.clone() }, OuterFunction::MaxPlusPower { alpha }] {
                prop_assert!(h.eval(&up) >= h.eval(&v));
            }
        }
    }
}
