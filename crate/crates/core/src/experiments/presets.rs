//! Named instances with closed-form optima.

use serde::{Deserialize, Serialize};

use crate::chance::{Affine, ChanceConstraint, ChanceProblem, ParamSet};
use crate::distributions::{
    make_discrete, perturb, DiscreteDistribution, Distribution, Magnitude, PerturbationSequence, Scheme, Uniform1D,
};
use crate::envelopes::NamedEnvelope;
use crate::model::{Component, CompositeProblem, Objective, OuterFunction, Step, Support};
use crate::{Point, Result, XReal};

/// Optimal value and solution set of the unperturbed problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub inf_phi: XReal,
    pub argmin: Vec<Point>,
}

/// A composite instance with its base distribution and perturbation sequence.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub problem: CompositeProblem,
    pub mu: Distribution,
    pub sequence: PerturbationSequence,
    /// Hand-designed `G_nu` run alongside `G`.
    pub envelope: Option<NamedEnvelope>,
    pub reference: Reference,
}

impl Preset {
    pub fn perturb(&self, nu: u64) -> Result<DiscreteDistribution> {
        perturb(&self.sequence, nu)
    }
}

/// A chance-constrained instance; `level_set(t)` is `{x : phi(x) <= inf phi + t}` as intervals.
#[derive(Clone, Debug)]
pub struct ChancePreset {
    pub name: &'static str,
    pub problem: ChanceProblem,
    pub mu: Distribution,
    pub sequence: PerturbationSequence,
    pub reference: Reference,
    pub level_set: fn(f64) -> Vec<(f64, f64)>,
}

impl ChancePreset {
    pub fn perturb(&self, nu: u64) -> Result<DiscreteDistribution> {
        perturb(&self.sequence, nu)
    }
}

fn square() -> Objective {
    Objective::Quadratic { a: vec![1.0], b: Vec::new(), c: 0.0 }
}

fn two_point() -> DiscreteDistribution {
    make_discrete(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).expect("valid two-point distribution")
}

fn finite(name: &'static str, set: ParamSet) -> Preset {
    let mu = two_point();
    let problem = CompositeProblem::new(
        1,
        1,
        square(),
        OuterFunction::OrthantIndicator,
        vec![Component::indicator(0.5, set)],
        Support::Atoms { atoms: mu.atoms().to_vec() },
        0.5,
    )
    .expect("valid preset");
    let scheme = Scheme::WeightShift { from: 0, to: 1, magnitude: Magnitude::new(1.0, 1.0, 1.0) };
    Preset {
        name,
        problem,
        mu: mu.clone().into(),
        sequence: PerturbationSequence::new(mu, scheme),
        envelope: None,
        reference: Reference { inf_phi: XReal::ZERO, argmin: vec![vec![0.0]] },
    }
}

/// `x^2` subject to `1/2 - mu({0}) <= 0`; `mu_nu` moves `1/(nu+1)` from `0` to `1`.
pub fn finite_i() -> Preset {
    finite("finite-I", ParamSet::interval(Affine::constant(0.0), Affine::constant(0.0)))
}

/// `x^2` subject to `1/2 - mu({x}) <= 0` with the same perturbation as [`finite_i`].
pub fn finite_ii() -> Preset {
    finite("finite-II", ParamSet::interval(Affine::shift(0.0), Affine::shift(0.0)))
}

/// Atoms `1, 1 + 1/2, ..., 1 + 1/k` with all mass on the first.
fn escaping_atoms(k: u64) -> DiscreteDistribution {
    let k = k.max(2);
    let mut atoms = vec![vec![1.0]];
    atoms.extend((2..=k).map(|j| vec![1.0 + 1.0 / j as f64]));
    let mut weights = vec![0.0; atoms.len()];
    weights[0] = 1.0;
    make_discrete(atoms, weights).expect("valid escaping atoms")
}

fn discrete(
    name: &'static str,
    g0: Objective,
    set: ParamSet,
    k: u64,
    envelope: NamedEnvelope,
    reference: Reference,
) -> Preset {
    let mu = escaping_atoms(k);
    let problem = CompositeProblem::new(
        1,
        1,
        g0,
        OuterFunction::OrthantIndicator,
        vec![Component::indicator(0.5, set)],
        Support::Atoms { atoms: mu.atoms().to_vec() },
        0.5,
    )
    .expect("valid preset");
    Preset {
        name,
        problem,
        mu: mu.clone().into(),
        sequence: PerturbationSequence::new(mu, Scheme::AtomEscape),
        envelope: Some(envelope),
        reference,
    }
}

/// `x^2` subject to `1/2 - mu([0, 1] x [1, 2] at (xi, x)) <= 0`, `mu = delta_1`,
/// `mu_nu = delta_{1 + 1/nu}`; supports `nu <= k`.
pub fn discrete_i(k: u64) -> Preset {
    let set = ParamSet::gated(ParamSet::interval(Affine::constant(0.0), Affine::constant(1.0)), vec![1.0], vec![2.0]);
    discrete(
        "discrete-I",
        square(),
        set,
        k,
        NamedEnvelope::DiscreteI,
        Reference { inf_phi: XReal::finite(1.0), argmin: vec![vec![1.0]] },
    )
}

/// Step objective `-1` on `(-inf, 1]`, `-1/2` on `[3/2, inf)`, subject to
/// `1/2 - mu((-inf, x]) <= 0`; same atoms as [`discrete_i`].
pub fn discrete_ii(k: u64) -> Preset {
    let g0 = Objective::Steps {
        steps: vec![
            Step { coord: 0, lo: f64::NEG_INFINITY, hi: 1.0, scale: -1.0 },
            Step { coord: 0, lo: 1.5, hi: f64::INFINITY, scale: -0.5 },
        ],
    };
    let set = ParamSet::interval(Affine::constant(f64::NEG_INFINITY), Affine::shift(0.0));
    discrete(
        "discrete-II",
        g0,
        set,
        k,
        NamedEnvelope::DiscreteII,
        Reference { inf_phi: XReal::finite(-1.0), argmin: vec![vec![1.0]] },
    )
}

/// `x^2` subject to `E[clamp(xi)] <= 0` and `-E[clamp(xi)] <= 0`, `mu = U(-1, 1)`,
/// `mu_nu` the empirical measure of `nu` draws.
pub fn empirical_i(seed: u64) -> Preset {
    let mu = Uniform1D::new(-1.0, 1.0).expect("valid interval");
    let clamp = |scale: f64| Component::ClampedCoordinate { coord: 0, lo: -1.0, hi: 1.0, scale };
    let problem = CompositeProblem::new(
        1,
        1,
        square(),
        OuterFunction::OrthantIndicator,
        vec![clamp(1.0), clamp(-1.0)],
        Support::Interval { lower: -1.0, upper: 1.0 },
        1.0,
    )
    .expect("valid preset");
    Preset {
        name: "empirical-I",
        problem,
        mu: mu.into(),
        sequence: PerturbationSequence::new(mu, Scheme::IidEmpirical { seed }),
        envelope: None,
        reference: Reference { inf_phi: XReal::ZERO, argmin: vec![vec![0.0]] },
    }
}

/// [`finite_i`] written as the chance constraint `mu({0}) >= 1/2`.
pub fn finite_i_chance() -> ChancePreset {
    let mu = two_point();
    let problem = ChanceProblem::new(
        1,
        square(),
        vec![ChanceConstraint { set: ParamSet::interval(Affine::constant(0.0), Affine::constant(0.0)), level: 0.5 }],
    )
    .expect("valid preset");
    ChancePreset {
        name: "finite-I-chance",
        problem,
        mu: mu.clone().into(),
        sequence: PerturbationSequence::new(
            mu,
            Scheme::WeightShift { from: 0, to: 1, magnitude: Magnitude::new(1.0, 1.0, 1.0) },
        ),
        reference: Reference { inf_phi: XReal::ZERO, argmin: vec![vec![0.0]] },
        level_set: |t| vec![(-t.max(0.0).sqrt(), t.max(0.0).sqrt())],
    }
}

/// `x` on `[0, 2]` subject to `mu((-inf, x]) >= 1/2`.
fn linear_rate_problem() -> ChanceProblem {
    let g0 = Objective::Sum {
        terms: vec![
            Objective::Affine { b: vec![1.0], c: 0.0 },
            Objective::BoxIndicator { lo: vec![0.0], hi: vec![2.0] },
        ],
    };
    let set = ParamSet::interval(Affine::constant(f64::NEG_INFINITY), Affine::shift(0.0));
    let mut cp = ChanceProblem::new(1, g0, vec![ChanceConstraint { set, level: 0.5 }]).expect("valid preset");
    cp.lipschitz_g0 = Some(1.0);
    cp
}

/// Linear instance with `mu = (delta_0 + delta_1)/2` and `mu_nu` moving `1/(2 nu)`
/// from `0` to `1`, so `d_TV = 1/nu`.
pub fn rate_s1() -> ChancePreset {
    let mu = two_point();
    ChancePreset {
        name: "rate-s1",
        problem: linear_rate_problem(),
        mu: mu.clone().into(),
        sequence: PerturbationSequence::new(
            mu,
            Scheme::WeightShift { from: 0, to: 1, magnitude: Magnitude::new(0.5, 0.0, 1.0) },
        ),
        reference: Reference { inf_phi: XReal::ZERO, argmin: vec![vec![0.0]] },
        level_set: |t| vec![(0.0, t.clamp(0.0, 2.0))],
    }
}

/// Linear instance with `mu = U(0, 1)` and `mu_nu` its right-end quantization, so
/// `d_W1 = 1/(2 nu)`.
pub fn rate_s2() -> ChancePreset {
    let mu = Uniform1D::new(0.0, 1.0).expect("valid interval");
    ChancePreset {
        name: "rate-s2",
        problem: linear_rate_problem(),
        mu: mu.into(),
        sequence: PerturbationSequence::new(mu, Scheme::Quantize),
        reference: Reference { inf_phi: XReal::finite(0.5), argmin: vec![vec![0.5]] },
        level_set: |t| vec![(0.5, (0.5 + t.max(0.0)).min(2.0))],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chance::chance_phi;
    use crate::model::eval_phi;

    #[test]
    fn references_match_phi() {
        for p in [finite_i(), finite_ii(), discrete_i(8), discrete_ii(8), empirical_i(3)] {
            for x in &p.reference.argmin {
                assert_eq!(eval_phi(&p.problem, &p.mu, x).unwrap(), p.reference.inf_phi, "{}", p.name);
            }
        }
        for p in [finite_i_chance(), rate_s1(), rate_s2()] {
            for x in &p.reference.argmin {
                assert_eq!(chance_phi(&p.problem, &p.mu, x).unwrap(), p.reference.inf_phi, "{}", p.name);
            }
        }
    }

    #[test]
    fn escaping_sequence() {
        let p = discrete_i(5);
        assert_eq!(p.perturb(1).unwrap().atoms(), &[vec![1.0]]);
        assert_eq!(p.perturb(4).unwrap().atoms(), &[vec![1.25]]);
        assert!(p.perturb(6).is_err());
    }

    #[test]
    fn rate_s1_shift() {
        let p = rate_s1();
        let w = p.perturb(4).unwrap().weights().to_vec();
        assert_eq!(w, vec![0.375, 0.625]);
    }
}
