//! Probability metrics between atomic distributions, evaluated exactly through
//! closed forms or small linear programs.

pub mod lp;

use serde::{Deserialize, Serialize};

use crate::distributions::{same_point, DiscreteDistribution, Uniform1D};
use crate::model::{expected_components, CompositeProblem};
use crate::{Error, Point, Result, XReal};
use lp::{LpProblem, LpSolution};

/// Default bound on the union support size for the test-function LPs.
pub const DEFAULT_LP_CAP: usize = 400;

/// Tolerance for checking reconstructed test functions against their constraints.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Which metric to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricKind {
    Tv,
    W1,
    Bl,
    Fm { beta: f64 },
    Mi,
    Kl,
}

impl MetricKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            MetricKind::Fm { beta } if !(*beta >= 1.0) => {
                Err(Error::InvalidInput(format!("Fortet-Mourier order must be >= 1, got {beta}")))
            }
            _ => Ok(()),
        }
    }
}

/// Union of the atoms of `a` and `b` with the weight vectors of both on it.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionSupport {
    pub atoms: Vec<Point>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn check_dims(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Atoms of `a` followed by unmatched atoms of `b`; zero-weight atoms are dropped.
pub fn union_support(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<UnionSupport> {
    check_dims(a, b)?;
    let mut atoms: Vec<Point> = Vec::new();
    let mut p = Vec::new();
    let mut q = Vec::new();
    let slot_of = |x: &Point, atoms: &mut Vec<Point>, p: &mut Vec<f64>, q: &mut Vec<f64>| -> usize {
        if let Some(k) = atoms.iter().position(|y| same_point(x, y)) {
            return k;
        }
        atoms.push(x.clone());
        p.push(0.0);
        q.push(0.0);
        atoms.len() - 1
    };
    for (x, w) in a.atoms().iter().zip(a.weights()) {
        let k = slot_of(x, &mut atoms, &mut p, &mut q);
        p[k] += w;
    }
    for (x, w) in b.atoms().iter().zip(b.weights()) {
        let k = slot_of(x, &mut atoms, &mut p, &mut q);
        q[k] += w;
    }
    Ok(UnionSupport { atoms, p, q })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Total variation `sum |p - q|` over the union support; values lie in `[0, 2]`.
pub fn tv(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<f64> {
    let u = union_support(a, b)?;
    Ok(u.p.iter().zip(&u.q).map(|(p, q)| (p - q).abs()).sum())
}

/// Wasserstein-1 distance: CDF formula for `d = 1`, transportation LP otherwise.
pub fn wasserstein1(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<f64> {
    check_dims(a, b)?;
    if a.dim() == 1 {
        Ok(wasserstein1_cdf(a, b))
    } else {
        transport(a, b, DEFAULT_LP_CAP)
    }
}

/// `int |F_a - F_b|` for one-dimensional atomic distributions.
pub fn wasserstein1_cdf(a: &DiscreteDistribution, b: &DiscreteDistribution) -> f64 {
    let mut events: Vec<(f64, f64)> =
        a.support().map(|(x, w)| (x[0], w)).chain(b.support().map(|(x, w)| (x[0], -w))).collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut diff = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Exact `W1` between the uniform distribution `u` and a one-dimensional atomic `b`.
pub fn wasserstein1_uniform(u: &Uniform1D, b: &DiscreteDistribution) -> Result<f64> {
    if b.dim() != 1 {
        return Err(Error::InvalidInput("uniform W1 needs one-dimensional atoms".into()));
    }
    let mut atoms: Vec<(f64, f64)> = b.support().map(|(x, w)| (x[0], w)).collect();
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut knots: Vec<f64> = atoms.iter().map(|a| a.0).chain([u.lower(), u.upper()]).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let cdf_u = |t: f64| ((t - u.lower()) / u.width()).clamp(0.0, 1.0);
    let mut total = 0.0;
    let mut fb = 0.0;
    let mut next = 0;
    for pair in knots.windows(2) {
        let (s, t) = (pair[0], pair[1]);
        while next < atoms.len() && atoms[next].0 <= s {
            fb += atoms[next].1;
            next += 1;
        }
        // F_u is affine on [s, t]; integrate |F_u - fb| exactly.
        let (g0, g1) = (cdf_u(s) - fb, cdf_u(t) - fb);
        let len = t - s;
        total += if g0 * g1 >= 0.0 {
            0.5 * (g0.abs() + g1.abs()) * len
        } else {
            0.5 * len * (g0 * g0 + g1 * g1) / (g0.abs() + g1.abs())
        };
    }
    Ok(total)
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::LpCapExceeded { atoms: n, cap });
    }
    Ok(())
}

/// Optimal transport cost with Euclidean ground cost on the bipartite atom graph.
pub fn transport(a: &DiscreteDistribution, b: &DiscreteDistribution, cap: usize) -> Result<f64> {
    check_dims(a, b)?;
    let src: Vec<(&Point, f64)> = a.support().collect();
    let dst: Vec<(&Point, f64)> = b.support().collect();
    check_cap(src.len() + dst.len(), cap)?;
    let (ns, nd) = (src.len(), dst.len());
    let total_a: f64 = src.iter().map(|s| s.1).sum();
    let total_b: f64 = dst.iter().map(|s| s.1).sum();
    // Rows: sources, then all sinks but the last (the dropped row is implied by mass balance).
    let mut rhs: Vec<f64> = src.iter().map(|s| s.1).collect();
    rhs.extend(dst[..nd - 1].iter().map(|s| s.1 * total_a / total_b));
    let mut lp = LpProblem::new(ns + nd - 1, rhs);
    for (i, s) in src.iter().enumerate() {
        for (j, t) in dst.iter().enumerate() {
            let mut col = vec![(i, 1.0)];
            if j + 1 < nd {
                col.push((ns + j, 1.0));
            }
            lp.push_column(euclid(s.0, t.0), col);
        }
    }
    Ok(lp::solve(&lp)?.objective.max(0.0))
}

/// Optimal value and optimal test function of a dual metric LP.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionCertificate {
    pub value: f64,
    pub atoms: Vec<Point>,
    /// Optimal test function `f` evaluated on `atoms`.
    pub f: Vec<f64>,
}

/// Solves `max sum f_k a_k` over `f_j - f_k <= cost(j, k)` and optionally `|f_k| <= 1`
/// through its min-cost-flow dual. With `pin`, `f_0 = 0`.
fn flow_dual(atoms: &[Point], a: &[f64], cost: impl Fn(usize, usize) -> f64, bounded: bool) -> Result<Vec<f64>> {
    let n = atoms.len();
    let pin = !bounded;
    let row = |k: usize| -> Option<usize> {
        if pin {
            k.checked_sub(1)
        } else {
            Some(k)
        }
    };
    let n_rows = if pin { n - 1 } else { n };
    let rhs: Vec<f64> = (0..n).filter_map(|k| row(k).map(|_| a[k])).collect();
    let mut problem = LpProblem::new(n_rows, rhs);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let entries: Vec<(usize, f64)> =
                [(row(j), 1.0), (row(k), -1.0)].into_iter().filter_map(|(r, v)| r.map(|r| (r, v))).collect();
            problem.push_column(cost(j, k), entries);
        }
    }
    if bounded {
        for k in 0..n {
            problem.push_column(1.0, vec![(k, 1.0)]);
            problem.push_column(1.0, vec![(k, -1.0)]);
        }
    }
    let LpSolution { duals, .. } = lp::solve(&problem)?;
    let mut f = vec![0.0; n];
    for k in 0..n {
        if let Some(r) = row(k) {
            f[k] = duals[r];
        }
    }
    Ok(f)
}

fn certificate(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    cap: usize,
    cost: impl Fn(&[f64], &[f64]) -> f64,
    bounded: bool,
) -> Result<TestFunctionCertificate> {
    let u = union_support(a, b)?;
    check_cap(u.atoms.len(), cap)?;
    let diff: Vec<f64> = u.p.iter().zip(&u.q).map(|(p, q)| p - q).collect();
    if u.atoms.len() == 1 {
        return Ok(TestFunctionCertificate { value: 0.0, atoms: u.atoms, f: vec![0.0] });
    }
    let atoms = &u.atoms;
    let f = flow_dual(atoms, &diff, |j, k| cost(&atoms[j], &atoms[k]), bounded)?;
    let value = f.iter().zip(&diff).map(|(f, a)| f * a).sum::<f64>().max(0.0);
    Ok(TestFunctionCertificate { value, atoms: u.atoms, f })
}

/// Bounded Lipschitz metric with its optimal test function.
pub fn bounded_lipschitz_certificate(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    cap: usize,
) -> Result<TestFunctionCertificate> {
    certificate(a, b, cap, euclid, true)
}

/// Bounded Lipschitz metric: sup over `|f| <= 1`, `Lip(f) <= 1` of `int f d(a - b)`.
pub fn bounded_lipschitz(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<f64> {
    Ok(bounded_lipschitz_certificate(a, b, DEFAULT_LP_CAP)?.value)
}

/// Fortet-Mourier cost `max{1, |x|, |y|}^(beta - 1) |x - y|`.
pub fn fm_cost(beta: f64, x: &[f64], y: &[f64]) -> f64 {
    1f64.max(norm(x)).max(norm(y)).powf(beta - 1.0) * euclid(x, y)
}

/// Fortet-Mourier metric of order `beta` with its optimal test function.
pub fn fortet_mourier_certificate(
    beta: f64,
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    cap: usize,
) -> Result<TestFunctionCertificate> {
    MetricKind::Fm { beta }.validate()?;
    certificate(a, b, cap, |x, y| fm_cost(beta, x, y), false)
}

/// Fortet-Mourier metric of order `beta >= 1`.
pub fn fortet_mourier(beta: f64, a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<f64> {
    Ok(fortet_mourier_certificate(beta, a, b, DEFAULT_LP_CAP)?.value)
}

/// Largest violation of the test-function constraints by a certificate.
pub fn certificate_violation(
    cert: &TestFunctionCertificate,
    cost: impl Fn(&[f64], &[f64]) -> f64,
    bounded: bool,
) -> f64 {
    let n = cert.atoms.len();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        if bounded {
            worst = worst.max(cert.f[j].abs() - 1.0);
        }
        for k in 0..n {
            if j != k {
                worst = worst.max(cert.f[j] - cert.f[k] - cost(&cert.atoms[j], &cert.atoms[k]));
            }
        }
    }
    worst.max(0.0)
}

/// Grid lower bound `max_{x, i} |E_a[g_i(., x)] - E_b[g_i(., x)]|` of the minimal
/// information metric.
pub fn minimal_information(
    problem: &CompositeProblem,
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    xgrid: &[Point],
) -> Result<f64> {
    check_dims(a, b)?;
    if xgrid.is_empty() {
        return Err(Error::InvalidInput("minimal-information grid is empty".into()));
    }
    let (da, db) = (a.clone().into(), b.clone().into());
    let mut best: f64 = 0.0;
    for x in xgrid {
        let ea = expected_components(&problem.components, &da, x)?;
        let eb = expected_components(&problem.components, &db, x)?;
        for (p, q) in ea.iter().zip(&eb) {
            best = best.max((p - q).abs());
        }
    }
    Ok(best)
}

/// `sum p log(p / q)`, `+inf` when the support of `a` is not inside that of `b`.
pub fn kl_divergence(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<XReal> {
    let u = union_support(a, b)?;
    let mut total = 0.0;
    for (p, q) in u.p.iter().zip(&u.q) {
        if *p > 0.0 {
            if *q <= 0.0 {
                return Ok(XReal::POS_INF);
            }
            total += p * (p / q).ln();
        }
    }
    Ok(XReal::finite(total.max(0.0)))
}

/// Evaluates `kind` between `a` and `b`; `MI` needs a problem and grid.
pub fn metric(
    kind: MetricKind,
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    mi: Option<(&CompositeProblem, &[Point])>,
) -> Result<XReal> {
    kind.validate()?;
    let v = match kind {
        MetricKind::Tv => tv(a, b)?,
        MetricKind::W1 => wasserstein1(a, b)?,
        MetricKind::Bl => bounded_lipschitz(a, b)?,
        MetricKind::Fm { beta } => fortet_mourier(beta, a, b)?,
        MetricKind::Kl => return kl_divergence(a, b),
        MetricKind::Mi => {
            let (problem, grid) =
                mi.ok_or_else(|| Error::InvalidInput("minimal-information metric needs a problem and grid".into()))?;
            minimal_information(problem, a, b, grid)?
        }
    };
    Ok(XReal::finite(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::make_discrete;
    use proptest::prelude::*;

    fn d1(atoms: &[f64], w: &[f64]) -> DiscreteDistribution {
        make_discrete(atoms.iter().map(|a| vec![*a]).collect(), w.to_vec()).unwrap()
    }

    fn dirac(a: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::dirac(a.to_vec())
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv(&d1(&[0.0, 1.0], &[0.5, 0.5]), &d1(&[0.0, 1.0], &[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(tv(&d1(&[0.0, 1.0], &[0.3, 0.7]), &d1(&[0.0, 1.0], &[0.3, 0.7])).unwrap(), 0.0);
        assert_eq!(tv(&dirac(&[0.0]), &dirac(&[1.0])).unwrap(), 2.0);
    }

    #[test]
    fn w1_examples() {
        assert_eq!(wasserstein1(&dirac(&[0.0]), &dirac(&[1.0])).unwrap(), 1.0);
        assert_eq!(wasserstein1(&d1(&[0.0, 1.0], &[0.5, 0.5]), &dirac(&[0.0])).unwrap(), 0.5);
        let a = d1(&[0.0, 0.3, 2.0], &[0.2, 0.5, 0.3]);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        let p = make_discrete(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![0.5, 0.5]).unwrap();
        assert!((wasserstein1(&p, &dirac(&[0.0, 0.0])).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn w1_uniform_against_quantization() {
        let u = Uniform1D::new(0.0, 1.0).unwrap();
        for nu in [1u64, 2, 5, 40] {
            let q = crate::distributions::quantize_uniform(&u, nu);
            let w = wasserstein1_uniform(&u, &q).unwrap();
            assert!((w - 0.5 / nu as f64).abs() < 1e-12, "nu={nu}: {w}");
        }
        let w = wasserstein1_uniform(&u, &dirac(&[0.5])).unwrap();
        assert!((w - 0.25).abs() < 1e-12);
        let w = wasserstein1_uniform(&u, &dirac(&[3.0])).unwrap();
        assert!((w - 2.5).abs() < 1e-12);
    }

    #[test]
    fn bl_examples() {
        assert!((bounded_lipschitz(&dirac(&[0.0]), &dirac(&[0.7])).unwrap() - 0.7).abs() < 1e-12);
        assert!((bounded_lipschitz(&dirac(&[0.0]), &dirac(&[5.0])).unwrap() - 2.0).abs() < 1e-12);
        assert!((bounded_lipschitz(&dirac(&[1.25]), &dirac(&[1.0])).unwrap() - 0.25).abs() < 1e-12);
        let a = d1(&[0.0, 1.0], &[0.4, 0.6]);
        assert!(bounded_lipschitz(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bl_cap() {
        let a = d1(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        let b = d1(&[3.0], &[1.0]);
        assert_eq!(bounded_lipschitz_certificate(&a, &b, 3), Err(Error::LpCapExceeded { atoms: 4, cap: 3 }));
    }

    #[test]
    fn fm_examples() {
        assert!((fortet_mourier(2.0, &dirac(&[2.0]), &dirac(&[3.0])).unwrap() - 3.0).abs() < 1e-12);
        let a = d1(&[0.0, 1.5], &[0.5, 0.5]);
        assert!(fortet_mourier(3.0, &a, &a).unwrap().abs() < 1e-12);
        assert!(fortet_mourier(0.5, &a, &a).is_err());
    }

    #[test]
    fn kl_examples() {
        let a = d1(&[0.0, 1.0], &[0.5, 0.5]);
        let b = d1(&[0.0, 1.0], &[0.25, 0.75]);
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&a, &b).unwrap().value() - expect).abs() < 1e-12);
        assert_eq!(kl_divergence(&a, &a).unwrap(), XReal::ZERO);
        assert_eq!(kl_divergence(&dirac(&[0.0]), &dirac(&[1.0])).unwrap(), XReal::POS_INF);
    }

    fn planar(max_atoms: usize) -> impl Strategy<Value = DiscreteDistribution> {
        prop::collection::vec(((-3.0f64..3.0, -3.0f64..3.0), 0.05f64..1.0), 3..=max_atoms).prop_map(|v| {
            let (atoms, w): (Vec<Point>, Vec<f64>) = v.into_iter().map(|((x, y), w)| (vec![x, y], w)).unzip();
            make_discrete(atoms, w).unwrap()
        })
    }

    fn line(max_atoms: usize) -> impl Strategy<Value = DiscreteDistribution> {
        prop::collection::vec((-3.0f64..3.0, 0.05f64..1.0), 3..=max_atoms).prop_map(|v| {
            let (atoms, w): (Vec<Point>, Vec<f64>) = v.into_iter().map(|(x, w)| (vec![x], w)).unzip();
            make_discrete(atoms, w).unwrap()
        })
    }

    const TOL: f64 = 1e-9;

    /// `a` with the atoms of `others` appended at zero weight.
    fn on_ground(a: &DiscreteDistribution, others: &[&DiscreteDistribution]) -> DiscreteDistribution {
        let mut atoms = a.atoms().to_vec();
        let mut w = a.weights().to_vec();
        for o in others {
            atoms.extend(o.atoms().iter().cloned());
            w.extend(std::iter::repeat(0.0).take(o.len()));
        }
        make_discrete(atoms, w).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn symmetry_and_triangle(a in planar(6), b in planar(6), c in planar(6)) {
            // The FM cost is not a metric on R^2, so all three share one ground set.
            let (a, b, c) = (on_ground(&a, &[&b, &c]), on_ground(&b, &[&a, &c]), on_ground(&c, &[&a, &b]));
            let metrics: [(&str, Box<dyn Fn(&DiscreteDistribution, &DiscreteDistribution) -> f64>); 4] = [
                ("tv", Box::new(|x, y| tv(x, y).unwrap())),
                ("w1", Box::new(|x, y| wasserstein1(x, y).unwrap())),
                ("bl", Box::new(|x, y| bounded_lipschitz(x, y).unwrap())),
                ("fm2", Box::new(|x, y| fortet_mourier(2.0, x, y).unwrap())),
            ];
            for (name, m) in metrics.iter() {
                let (ab, ba) = (m(&a, &b), m(&b, &a));
                prop_assert!((ab - ba).abs() <= TOL, "{name} asymmetric: {ab} vs {ba}");
                let (bc, ac) = (m(&b, &c), m(&a, &c));
                prop_assert!(ac <= ab + bc + TOL, "{name} triangle: {ac} > {ab} + {bc}");
            }
        }

        #[test]
        fn ordering(a in planar(6), b in planar(6)) {
            let bl = bounded_lipschitz(&a, &b).unwrap();
            let w = wasserstein1(&a, &b).unwrap();
            let fm1 = fortet_mourier(1.0, &a, &b).unwrap();
            let t = tv(&a, &b).unwrap();
            prop_assert!((w - fm1).abs() <= TOL, "W1 {w} vs FM(1) {fm1}");
            prop_assert!(bl <= w + TOL);
            prop_assert!(bl <= t.min(2.0) + TOL);
        }

        #[test]
        fn one_d_closed_form_matches_transport(a in line(6), b in line(6)) {
            let closed = wasserstein1_cdf(&a, &b);
            let lp = transport(&a, &b, DEFAULT_LP_CAP).unwrap();
            prop_assert!((closed - lp).abs() <= TOL, "{closed} vs {lp}");
        }

        #[test]
        fn pinsker(w1 in prop::collection::vec(0.05f64..1.0, 3..6), w2 in prop::collection::vec(0.05f64..1.0, 6)) {
            let atoms: Vec<Point> = (0..w1.len()).map(|k| vec![k as f64]).collect();
            let a = make_discrete(atoms.clone(), w1.clone()).unwrap();
            let b = make_discrete(atoms, w2[..w1.len()].to_vec()).unwrap();
            let kl = kl_divergence(&a, &b).unwrap().value();
            prop_assert!(tv(&a, &b).unwrap() <= 2.0 * (kl / 2.0).sqrt() + TOL);
        }

        #[test]
        fn certificates_are_feasible(a in planar(6), b in planar(6)) {
            let bl = bounded_lipschitz_certificate(&a, &b, DEFAULT_LP_CAP).unwrap();
            prop_assert!(certificate_violation(&bl, euclid, true) <= TOL);
            let fm = fortet_mourier_certificate(2.0, &a, &b, DEFAULT_LP_CAP).unwrap();
            prop_assert!(certificate_violation(&fm, |x, y| fm_cost(2.0, x, y), false) <= TOL);
            prop_assert_eq!(fm.f[0], 0.0);
        }
    }
}
