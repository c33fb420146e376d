//! Atomic and one-dimensional uniform distributions, empirical measures and
//! perturbation sequences `mu_nu`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chance::ParamSet;
use crate::{Error, Point, Result, COORD_TOL};

/// Finitely many atoms in `R^d` with probability weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Point>,
    weights: Vec<f64>,
    /// Mass of an infinite-support original lying beyond the listed atoms.
    #[serde(default)]
    tail_mass: f64,
}

impl DiscreteDistribution {
    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Records the mass that a truncated infinite-support distribution drops.
    pub fn with_tail_mass(mut self, tail_mass: f64) -> Self {
        self.tail_mass = tail_mass;
        self
    }

    /// Point mass at `a`.
    pub fn dirac(a: Point) -> Self {
        DiscreteDistribution { atoms: vec![a], weights: vec![1.0], tail_mass: 0.0 }
    }

    /// Atoms with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied()).filter(|(_, w)| *w > 0.0)
    }

    /// Index of the atom matching `p` within the merge tolerance.
    pub fn find_atom(&self, p: &[f64]) -> Option<usize> {
        self.atoms.iter().position(|a| same_point(a, p))
    }
}

/// Uniform distribution on `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uniform1D {
    lower: f64,
    upper: f64,
}

impl Uniform1D {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidInput(format!(
                "uniform bounds must be finite with lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Uniform1D { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Probability of a finite union of closed intervals.
    pub fn mass_of_intervals(&self, intervals: &[(f64, f64)]) -> f64 {
        union_length(intervals, self.lower, self.upper) / self.width()
    }
}

/// Any distribution the library evaluates against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Discrete(DiscreteDistribution),
    Uniform(Uniform1D),
}

impl Distribution {
    pub fn dim(&self) -> usize {
        match self {
            Distribution::Discrete(d) => d.dim(),
            Distribution::Uniform(_) => 1,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteDistribution> {
        match self {
            Distribution::Discrete(d) => Some(d),
            Distribution::Uniform(_) => None,
        }
    }
}

impl From<DiscreteDistribution> for Distribution {
    fn from(d: DiscreteDistribution) -> Self {
        Distribution::Discrete(d)
    }
}

impl From<Uniform1D> for Distribution {
    fn from(u: Uniform1D) -> Self {
        Distribution::Uniform(u)
    }
}

pub(crate) fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COORD_TOL)
}

/// Builds a normalized distribution, merging atoms that agree coordinate-wise
/// within `1e-12`. Zero-weight atoms are kept so truncated supports stay indexed.
pub fn make_discrete(atoms: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteDistribution> {
    if atoms.is_empty() {
        return Err(Error::InvalidInput("empty atom list".into()));
    }
    if atoms.len() != weights.len() {
        return Err(Error::InvalidInput(format!("{} atoms but {} weights", atoms.len(), weights.len())));
    }
    let d = atoms[0].len();
    if d == 0 || atoms.iter().any(|a| a.len() != d) {
        return Err(Error::InvalidInput("atoms must share a positive dimension".into()));
    }
    if atoms.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("atom coordinates must be finite".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput(format!("negative or non-finite weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("zero total weight".into()));
    }

    let rep = merge_representatives(&atoms);
    let mut out_atoms: Vec<Point> = Vec::new();
    let mut out_weights: Vec<f64> = Vec::new();
    let mut slot = vec![usize::MAX; atoms.len()];
    for i in 0..atoms.len() {
        let r = rep[i];
        if slot[r] == usize::MAX {
            slot[r] = out_atoms.len();
            out_atoms.push(atoms[r].clone());
            out_weights.push(0.0);
        }
        out_weights[slot[r]] += weights[i];
    }
    for w in &mut out_weights {
        *w /= total;
    }
    Ok(DiscreteDistribution { atoms: out_atoms, weights: out_weights, tail_mass: 0.0 })
}

/// For each atom, the index of the first atom in its merge group.
fn merge_representatives(atoms: &[Point]) -> Vec<usize> {
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    let n = atoms.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| atoms[a][0].total_cmp(&atoms[b][0]).then(a.cmp(&b)));
    let mut parent: Vec<usize> = (0..n).collect();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if atoms[j][0] - atoms[i][0] > COORD_TOL {
                break;
            }
            if same_point(&atoms[i], &atoms[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Rule `scale / (nu + offset)^power` for perturbation magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Magnitude {
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "one")]
    pub power: f64,
}

fn one() -> f64 {
    1.0
}

impl Magnitude {
    pub fn new(scale: f64, offset: f64, power: f64) -> Self {
        Magnitude { scale, offset, power }
    }

    pub fn at(&self, nu: u64) -> f64 {
        self.scale / (nu as f64 + self.offset).powf(self.power)
    }
}

/// How `mu_nu` is derived from the base distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scheme {
    /// Moves `magnitude(nu)` of mass from atom `from` to atom `to`.
    WeightShift { from: usize, to: usize, magnitude: Magnitude },
    /// `mu_nu` is the point mass at the `nu`-th listed base atom.
    AtomEscape,
    /// Mixture `(1 - t) mu + t target` with `t = magnitude(nu)`, so TV is at most `2 t`.
    TvBounded { target: DiscreteDistribution, magnitude: Magnitude },
    /// `nu` iid draws; samples for different `nu` are prefixes of one stream.
    IidEmpirical { seed: u64 },
    /// Uniform base only: `nu` equal atoms at the right ends of `nu` equal cells.
    Quantize,
}

/// A sequence `nu -> mu_nu` approximating `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSequence {
    pub base: Distribution,
    pub scheme: Scheme,
}

impl PerturbationSequence {
    pub fn new(base: impl Into<Distribution>, scheme: Scheme) -> Self {
        PerturbationSequence { base: base.into(), scheme }
    }
}

fn discrete_base<'a>(seq: &'a PerturbationSequence, scheme: &str) -> Result<&'a DiscreteDistribution> {
    seq.base.as_discrete().ok_or_else(|| Error::Unsupported(format!("{scheme} needs a discrete base")))
}

/// The `nu`-th member of the sequence.
pub fn perturb(seq: &PerturbationSequence, nu: u64) -> Result<DiscreteDistribution> {
    if nu == 0 {
        return Err(Error::InvalidInput("nu must be at least 1".into()));
    }
    match &seq.scheme {
        Scheme::WeightShift { from, to, magnitude } => {
            let base = discrete_base(seq, "weight-shift")?;
            if *from >= base.len() || *to >= base.len() {
                return Err(Error::InvalidInput("weight-shift atom index out of range".into()));
            }
            let t = magnitude.at(nu);
            let mut w = base.weights.clone();
            w[*from] -= t;
            w[*to] += t;
            if let Some(k) = w.iter().position(|v| *v < -COORD_TOL) {
                return Err(Error::InvalidInput(format!(
                    "weight-shift of {t} at nu={nu} makes weight of atom {k} negative ({})",
                    w[k]
                )));
            }
            for v in &mut w {
                *v = v.max(0.0);
            }
            Ok(DiscreteDistribution { atoms: base.atoms.clone(), weights: w, tail_mass: base.tail_mass })
        }
        Scheme::AtomEscape => {
            let base = discrete_base(seq, "atom-escape")?;
            let k = (nu - 1) as usize;
            let atom = base.atoms.get(k).ok_or_else(|| {
                Error::InvalidInput(format!("atom-escape at nu={nu} beyond the {} listed atoms", base.len()))
            })?;
            Ok(DiscreteDistribution::dirac(atom.clone()))
        }
        Scheme::TvBounded { target, magnitude } => {
            let base = discrete_base(seq, "tv-bounded")?;
            let t = magnitude.at(nu);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidInput(format!("mixture weight {t} at nu={nu} outside [0,1]")));
            }
            let mut atoms = base.atoms.clone();
            let mut weights: Vec<f64> = base.weights.iter().map(|w| (1.0 - t) * w).collect();
            atoms.extend(target.atoms.iter().cloned());
            weights.extend(target.weights.iter().map(|w| t * w));
            make_discrete(atoms, weights)
        }
        Scheme::IidEmpirical { seed } => empirical(&seq.base, nu, *seed),
        Scheme::Quantize => match &seq.base {
            Distribution::Uniform(u) => Ok(quantize_uniform(u, nu)),
            Distribution::Discrete(_) => Err(Error::Unsupported("quantize needs a uniform base".into())),
        },
    }
}

/// `nu` atoms at `lower + k (upper - lower) / nu`, `k = 1..=nu`, each of weight `1/nu`.
pub fn quantize_uniform(u: &Uniform1D, nu: u64) -> DiscreteDistribution {
    let n = nu as usize;
    let atoms = (1..=n).map(|k| vec![u.lower + u.width() * k as f64 / nu as f64]).collect();
    DiscreteDistribution { atoms, weights: vec![1.0 / nu as f64; n], tail_mass: 0.0 }
}

/// Empirical measure of `nu` iid draws from `dist` using a ChaCha8 stream seeded by `seed`.
pub fn empirical(dist: &Distribution, nu: u64, seed: u64) -> Result<DiscreteDistribution> {
    if nu == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = nu as usize;
    let atoms: Vec<Point> = match dist {
        Distribution::Uniform(u) => (0..n).map(|_| vec![u.lower + u.width() * rng.gen::<f64>()]).collect(),
        Distribution::Discrete(d) => {
            let mut cdf = Vec::with_capacity(d.len());
            let mut acc = 0.0;
            for w in &d.weights {
                acc += w;
                cdf.push(acc);
            }
            let last = d.weights.iter().rposition(|w| *w > 0.0).expect("positive total weight");
            (0..n)
                .map(|_| {
                    let r = rng.gen::<f64>() * acc;
                    let k = cdf.iter().position(|c| r < *c).unwrap_or(last);
                    d.atoms[k].clone()
                })
                .collect()
        }
    };
    make_discrete(atoms, vec![1.0; n])
}

/// Exact probability of `H(x)`.
pub fn prob_of_set(dist: &Distribution, set: &ParamSet, x: &[f64]) -> Result<f64> {
    match dist {
        Distribution::Discrete(d) => {
            if set.dim() != d.dim() {
                return Err(Error::InvalidInput(format!(
                    "set dimension {} differs from distribution dimension {}",
                    set.dim(),
                    d.dim()
                )));
            }
            let realized = set.at(x);
            Ok(d.support().filter(|(a, _)| realized.contains(a)).map(|(_, w)| w).sum::<f64>().min(1.0))
        }
        Distribution::Uniform(u) => {
            let intervals = set.intervals_1d(x)?;
            Ok(u.mass_of_intervals(&intervals).min(1.0))
        }
    }
}

/// Length of `union(intervals) ∩ [lo, hi]`.
pub(crate) fn union_length(intervals: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mut clipped: Vec<(f64, f64)> =
        intervals.iter().map(|&(a, b)| (a.max(lo), b.min(hi))).filter(|(a, b)| a < b).collect();
    clipped.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (a, b) in clipped {
        match current {
            Some((ca, cb)) if a <= cb => current = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = current {
        total += cb - ca;
    }
    total
}

/// A vector-valued function of `(xi, x)` to be integrated against a distribution.
pub trait Integrand: Sync {
    fn out_dim(&self) -> usize;
    fn eval(&self, xi: &[f64], x: &[f64], out: &mut [f64]);
    /// Points in `xi` (one-dimensional case) where the integrand may be non-smooth.
    fn breakpoints(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

/// Adapter turning a scalar closure into an [`Integrand`].
pub struct ScalarFn<F>(pub F);

impl<F: Fn(&[f64], &[f64]) -> f64 + Sync> Integrand for ScalarFn<F> {
    fn out_dim(&self) -> usize {
        1
    }
    fn eval(&self, xi: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = (self.0)(xi, x);
    }
}

/// Absolute tolerance of the uniform-distribution quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// `E[integrand(xi, x)]`: exact weighted sum for atoms, adaptive Simpson between
/// breakpoints for the uniform case.
pub fn expectation(dist: &Distribution, integrand: &dyn Integrand, x: &[f64]) -> Result<Vec<f64>> {
    let k = integrand.out_dim();
    let mut acc = vec![0.0; k];
    let mut buf = vec![0.0; k];
    match dist {
        Distribution::Discrete(d) => {
            for (i, (a, w)) in d.atoms.iter().zip(&d.weights).enumerate() {
                if *w == 0.0 {
                    continue;
                }
                integrand.eval(a, x, &mut buf);
                for (s, v) in acc.iter_mut().zip(&buf) {
                    if !v.is_finite() {
                        return Err(Error::NonFinite { index: i, value: *v });
                    }
                    *s += w * v;
                }
            }
        }
        Distribution::Uniform(u) => {
            let mut cuts: Vec<f64> = integrand
                .breakpoints(x)
                .into_iter()
                .filter(|b| b.is_finite() && *b > u.lower && *b < u.upper)
                .collect();
            cuts.push(u.lower);
            cuts.push(u.upper);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let segments = cuts.len() - 1;
            let tol = QUADRATURE_TOL / segments as f64;
            for w in cuts.windows(2) {
                let part = simpson_segment(integrand, x, w[0], w[1], tol)?;
                for (s, v) in acc.iter_mut().zip(part) {
                    *s += v;
                }
            }
            for s in &mut acc {
                *s /= u.width();
            }
        }
    }
    Ok(acc)
}

struct Simpson<'a> {
    f: &'a dyn Integrand,
    x: &'a [f64],
}

impl Simpson<'_> {
    fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.f.out_dim()];
        self.f.eval(&[t], self.x, &mut out);
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0, value: *v });
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        a: f64,
        b: f64,
        fa: &[f64],
        fm: &[f64],
        fb: &[f64],
        whole: &[f64],
        tol: f64,
        depth: u32,
    ) -> Result<Vec<f64>> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let h = (b - a) / 12.0;
        let left: Vec<f64> = (0..fa.len()).map(|i| h * (fa[i] + 4.0 * flm[i] + fm[i])).collect();
        let right: Vec<f64> = (0..fa.len()).map(|i| h * (fm[i] + 4.0 * frm[i] + fb[i])).collect();
        let err = (0..fa.len()).map(|i| (left[i] + right[i] - whole[i]).abs()).fold(0.0, f64::max);
        if depth == 0 || err <= 15.0 * tol {
            return Ok((0..fa.len()).map(|i| left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0).collect());
        }
        let l = self.recurse(a, m, fa, &flm, fm, &left, tol / 2.0, depth - 1)?;
        let r = self.recurse(m, b, fm, &frm, fb, &right, tol / 2.0, depth - 1)?;
        Ok(l.iter().zip(&r).map(|(p, q)| p + q).collect())
    }
}

/// Integral over `[a, b]`. Endpoint values are sampled just inside the segment so
/// a jump located exactly at a breakpoint does not leak into the neighbouring piece.
fn simpson_segment(f: &dyn Integrand, x: &[f64], a: f64, b: f64, tol: f64) -> Result<Vec<f64>> {
    let s = Simpson { f, x };
    let inset = (b - a) * 1e-13;
    let fa = s.eval(a + inset)?;
    let fb = s.eval(b - inset)?;
    let fm = s.eval(0.5 * (a + b))?;
    let h = (b - a) / 6.0;
    let whole: Vec<f64> = (0..fa.len()).map(|i| h * (fa[i] + 4.0 * fm[i] + fb[i])).collect();
    s.recurse(a, b, &fa, &fm, &fb, &whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chance::{Affine, ParamSet};
    use proptest::prelude::*;

    fn two_point() -> DiscreteDistribution {
        make_discrete(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn make_discrete_two_atoms() {
        let d = two_point();
        assert_eq!(d.len(), 2);
        assert_eq!(d.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn make_discrete_single_atom() {
        let d = make_discrete(vec![vec![0.0]], vec![1.0]).unwrap();
        assert_eq!(d, DiscreteDistribution::dirac(vec![0.0]));
    }

    #[test]
    fn make_discrete_merges_close_atoms() {
        let d = make_discrete(vec![vec![0.0], vec![1e-15]], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.len(), 1);
        let total: f64 = d.weights().iter().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn make_discrete_errors() {
        assert!(make_discrete(vec![], vec![]).is_err());
        assert!(make_discrete(vec![vec![0.0]], vec![-1.0]).is_err());
        assert!(make_discrete(vec![vec![0.0]], vec![0.0]).is_err());
        assert!(make_discrete(vec![vec![0.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn merge_keeps_first_occurrence_order() {
        let d = make_discrete(
            vec![vec![2.0], vec![0.0], vec![2.0 + 1e-14], vec![1.0], vec![0.0]],
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(d.atoms(), &[vec![2.0], vec![0.0], vec![1.0]]);
        assert_eq!(d.weights(), &[0.4, 0.4, 0.2]);
    }

    #[test]
    fn weight_shift_first_step() {
        let seq = PerturbationSequence::new(
            two_point(),
            Scheme::WeightShift { from: 0, to: 1, magnitude: Magnitude::new(1.0, 1.0, 1.0) },
        );
        let d = perturb(&seq, 1).unwrap();
        assert_eq!(d.weights(), &[0.0, 1.0]);
    }

    #[test]
    fn weight_shift_rejects_negative_weight() {
        let seq = PerturbationSequence::new(
            two_point(),
            Scheme::WeightShift { from: 0, to: 1, magnitude: Magnitude::new(1.0, 0.0, 1.0) },
        );
        assert!(matches!(perturb(&seq, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn atom_escape_third_member() {
        let atoms: Vec<Point> = (1..=5).map(|k| vec![if k == 1 { 1.0 } else { 1.0 + 1.0 / k as f64 }]).collect();
        let mut w = vec![0.0; 5];
        w[0] = 1.0;
        let base = make_discrete(atoms, w).unwrap();
        let seq = PerturbationSequence::new(base, Scheme::AtomEscape);
        assert_eq!(perturb(&seq, 3).unwrap(), DiscreteDistribution::dirac(vec![1.0 + 1.0 / 3.0]));
        assert!(perturb(&seq, 6).is_err());
    }

    #[test]
    fn perturb_is_deterministic() {
        let seq = PerturbationSequence::new(Uniform1D::new(-1.0, 1.0).unwrap(), Scheme::IidEmpirical { seed: 7 });
        assert_eq!(perturb(&seq, 33).unwrap(), perturb(&seq, 33).unwrap());
    }

    #[test]
    fn tv_bounded_mixture() {
        let seq = PerturbationSequence::new(
            DiscreteDistribution::dirac(vec![0.0]),
            Scheme::TvBounded {
                target: DiscreteDistribution::dirac(vec![1.0]),
                magnitude: Magnitude::new(1.0, 0.0, 1.0),
            },
        );
        let d = perturb(&seq, 4).unwrap();
        assert_eq!(d.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn quantize_places_right_endpoints() {
        let u = Uniform1D::new(0.0, 1.0).unwrap();
        let d = quantize_uniform(&u, 4);
        assert_eq!(d.atoms(), &[vec![0.25], vec![0.5], vec![0.75], vec![1.0]]);
    }

    #[test]
    fn empirical_uniform_support() {
        let u: Distribution = Uniform1D::new(-1.0, 1.0).unwrap().into();
        let d = empirical(&u, 4, 11).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.weights().iter().all(|w| *w == 0.25));
        assert!(d.atoms().iter().all(|a| (-1.0..=1.0).contains(&a[0])));
    }

    #[test]
    fn empirical_degenerate_base() {
        let d: Distribution = DiscreteDistribution::dirac(vec![0.0]).into();
        assert_eq!(empirical(&d, 17, 3).unwrap(), DiscreteDistribution::dirac(vec![0.0]));
    }

    #[test]
    fn empirical_mean_concentrates() {
        let u: Distribution = Uniform1D::new(-1.0, 1.0).unwrap().into();
        let d = empirical(&u, 10_000, 1).unwrap();
        let mean: f64 = d.atoms().iter().zip(d.weights()).map(|(a, w)| a[0] * w).sum();
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn empirical_samples_are_nested() {
        let u: Distribution = Uniform1D::new(0.0, 1.0).unwrap().into();
        let small = empirical(&u, 8, 5).unwrap();
        let large = empirical(&u, 64, 5).unwrap();
        assert_eq!(small.atoms(), &large.atoms()[..8]);
    }

    #[test]
    fn prob_of_set_cases() {
        let d: Distribution = two_point().into();
        let singleton = ParamSet::interval(Affine::constant(0.0), Affine::constant(0.0));
        assert_eq!(prob_of_set(&d, &singleton, &[0.0]).unwrap(), 0.5);

        let u: Distribution = Uniform1D::new(-1.0, 1.0).unwrap().into();
        let right = ParamSet::interval(Affine::constant(0.0), Affine::constant(1.0));
        assert_eq!(prob_of_set(&u, &right, &[0.0]).unwrap(), 0.5);

        let full = ParamSet::full(1);
        assert_eq!(prob_of_set(&d, &full, &[0.0]).unwrap(), 1.0);
        assert_eq!(prob_of_set(&u, &full, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn prob_of_set_rejects_ball_in_plane_for_uniform() {
        let u: Distribution = Uniform1D::new(-1.0, 1.0).unwrap().into();
        let ball = ParamSet::ball(vec![Affine::constant(0.0), Affine::constant(0.0)], Affine::constant(1.0));
        assert!(matches!(prob_of_set(&u, &ball, &[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn expectation_cases() {
        let d: Distribution = two_point().into();
        let g = ScalarFn(|xi: &[f64], _x: &[f64]| 0.5 - if xi[0] == 0.0 { 1.0 } else { 0.0 });
        assert_eq!(expectation(&d, &g, &[0.3]).unwrap(), vec![0.0]);

        let dirac: Distribution = DiscreteDistribution::dirac(vec![2.5]).into();
        let h = ScalarFn(|xi: &[f64], x: &[f64]| xi[0] * x[0]);
        assert_eq!(expectation(&dirac, &h, &[2.0]).unwrap(), vec![5.0]);

        let u: Distribution = Uniform1D::new(-1.0, 1.0).unwrap().into();
        let sq = ScalarFn(|xi: &[f64], _x: &[f64]| xi[0] * xi[0]);
        let v = expectation(&u, &sq, &[0.0]).unwrap()[0];
        assert!((v - 1.0 / 3.0).abs() < 1e-10, "{v}");
    }

    struct Step;
    impl Integrand for Step {
        fn out_dim(&self) -> usize {
            1
        }
        fn eval(&self, xi: &[f64], x: &[f64], out: &mut [f64]) {
            out[0] = if xi[0] <= x[0] { 1.0 } else { 0.0 };
        }
        fn breakpoints(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0]]
        }
    }

    #[test]
    fn expectation_of_jump_at_breakpoint() {
        let u: Distribution = Uniform1D::new(0.0, 1.0).unwrap().into();
        let v = expectation(&u, &Step, &[0.3]).unwrap()[0];
        assert!((v - 0.3).abs() < 1e-10, "{v}");
    }

    #[test]
    fn expectation_rejects_non_finite() {
        let d: Distribution = two_point().into();
        let g = ScalarFn(|xi: &[f64], _x: &[f64]| 1.0 / xi[0]);
        assert!(matches!(expectation(&d, &g, &[0.0]), Err(Error::NonFinite { index: 0, .. })));
    }

    fn small_distribution() -> impl Strategy<Value = DiscreteDistribution> {
        prop::collection::vec((-3.0f64..3.0, 0.01f64..1.0), 1..6).prop_map(|v| {
            make_discrete(v.iter().map(|p| vec![p.0]).collect(), v.iter().map(|p| p.1).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn weights_normalized(d in small_distribution()) {
            let s: f64 = d.weights().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(d.weights().iter().all(|w| *w >= 0.0));
            for i in 0..d.len() {
                for j in i + 1..d.len() {
                    prop_assert!(!same_point(&d.atoms()[i], &d.atoms()[j]));
                }
            }
        }

        #[test]
        fn expectation_is_linear(d in small_distribution(), a in -5.0f64..5.0, x in -2.0f64..2.0) {
            let dist: Distribution = d.into();
            let g1 = |xi: &[f64], x: &[f64]| xi[0] * xi[0] - x[0];
            let g2 = |xi: &[f64], x: &[f64]| (xi[0] * x[0]).sin();
            let combo = expectation(&dist, &ScalarFn(move |xi: &[f64], x: &[f64]| a * g1(xi, x) + g2(xi, x)), &[x]).unwrap()[0];
            let e1 = expectation(&dist, &ScalarFn(g1), &[x]).unwrap()[0];
            let e2 = expectation(&dist, &ScalarFn(g2), &[x]).unwrap()[0];
            prop_assert!((combo - (a * e1 + e2)).abs() <= 1e-12);
        }

        #[test]
        fn perturbations_are_valid(nu in 1u64..200, seed in 0u64..1000) {
            let two = two_point();
            let schemes = vec![
                PerturbationSequence::new(two.clone(), Scheme::WeightShift { from: 0, to: 1, magnitude: Magnitude::new(1.0, 1.0, 1.0) }),
                PerturbationSequence::new(two.clone(), Scheme::TvBounded { target: DiscreteDistribution::dirac(vec![5.0]), magnitude: Magnitude::new(1.0, 0.0, 1.0) }),
                PerturbationSequence::new(two, Scheme::IidEmpirical { seed }),
                PerturbationSequence::new(Uniform1D::new(0.0, 1.0).unwrap(), Scheme::IidEmpirical { seed }),
                PerturbationSequence::new(Uniform1D::new(0.0, 1.0).unwrap(), Scheme::Quantize),
            ];
            for s in &schemes {
                let d = perturb(s, nu).unwrap();
                let total: f64 = d.weights().iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                prop_assert!(d.weights().iter().all(|w| *w >= 0.0));
            }
        }
    }
}
