//! Numerical probes: truncated epigraphical distance, outer Minkowski content,
//! metric subregularity of the feasible-set mapping and log-log rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chance::{chance_phi, ChanceProblem, ParamSet};
use crate::distributions::{prob_of_set, Distribution};
use crate::{Error, Point, Result, XReal};

/// Uniform lattice on a box, `resolution` points per axis including both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub bounds: Vec<(f64, f64)>,
    pub resolution: usize,
}

impl Lattice {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: usize) -> Result<Self> {
        if bounds.is_empty() || resolution < 2 {
            return Err(Error::InvalidInput("lattice needs a dimension and at least 2 points per axis".into()));
        }
        if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidInput("lattice axes need finite lo < hi".into()));
        }
        Ok(Lattice { bounds, resolution })
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| (hi - lo) / (self.resolution - 1) as f64).collect()
    }

    /// All lattice points, last coordinate fastest.
    pub fn points(&self) -> Vec<Point> {
        let r = self.resolution;
        let n = r.pow(self.bounds.len() as u32);
        let axis = |(lo, hi): (f64, f64), k: usize| {
            if k + 1 == r {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (r - 1) as f64
            }
        };
        (0..n)
            .map(|mut idx| {
                let mut p = vec![0.0; self.bounds.len()];
                for (i, b) in self.bounds.iter().enumerate().rev() {
                    p[i] = axis(*b, idx % r);
                    idx /= r;
                }
                p
            })
            .collect()
    }
}

/// Grid estimate of the `rho`-truncated Hausdorff distance between two epigraphs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiDistanceEstimate {
    pub rho: f64,
    /// Smallest `eta` for which the first Kenmochi inequality holds on the grid.
    pub eta_t1: f64,
    pub eta_t2: f64,
    /// `max(eta_t1, eta_t2)`.
    pub estimate: f64,
    /// Smallest `rho 2^-k` that is at least `estimate`.
    pub ladder_value: f64,
    pub ladder_step: u32,
    pub lattice: Lattice,
    /// Euclidean length of one lattice cell diagonal.
    pub grid_tolerance: f64,
    /// The estimate is below the grid tolerance, so it only bounds the distance by resolution.
    pub resolution_limited: bool,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smallest `eta` with: every `p` in `B(0, rho)` with `fa(p) <= rho` has some lattice `q`,
/// `|q - p| <= eta`, `fb(q) <= max(fa(p), -rho) + eta`.
fn one_sided(points: &[Point], fa: &[XReal], fb: &[XReal], rho: f64) -> f64 {
    let candidates: Vec<(usize, f64)> = fb
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_pos_inf())
        .map(|(i, v)| (i, if v.is_neg_inf() { f64::NEG_INFINITY } else { v.value() }))
        .collect();
    points
        .par_iter()
        .zip(fa)
        .filter(|(p, v)| euclid(p, &vec![0.0; p.len()]) <= rho && !v.is_pos_inf() && v.value() <= rho)
        .map(|(p, v)| {
            let level = v.value().max(-rho);
            candidates.iter().map(|&(j, fq)| euclid(p, &points[j]).max(fq - level)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Kenmochi-condition estimate of the truncated epigraphical distance between `f1` and `f2`.
pub fn epi_distance<F1, F2>(f1: &F1, f2: &F2, rho: f64, lattice: &Lattice) -> Result<EpiDistanceEstimate>
where
    F1: Fn(&[f64]) -> Result<XReal> + Sync + ?Sized,
    F2: Fn(&[f64]) -> Result<XReal> + Sync + ?Sized,
{
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("truncation radius must be positive, got {rho}")));
    }
    let points = lattice.points();
    let v1: Vec<XReal> = points.par_iter().map(|p| f1(p)).collect::<Result<_>>()?;
    let v2: Vec<XReal> = points.par_iter().map(|p| f2(p)).collect::<Result<_>>()?;
    let eta_t1 = one_sided(&points, &v1, &v2, rho);
    let eta_t2 = one_sided(&points, &v2, &v1, rho);
    let estimate = eta_t1.max(eta_t2);
    let grid_tolerance = lattice.spacing().iter().map(|h| h * h).sum::<f64>().sqrt();
    let mut ladder_step = 0u32;
    let mut ladder_value = rho;
    if estimate.is_finite() {
        while ladder_step < 60 && ladder_value / 2.0 >= estimate {
            ladder_value /= 2.0;
            ladder_step += 1;
        }
    } else {
        ladder_value = f64::INFINITY;
    }
    Ok(EpiDistanceEstimate {
        rho,
        eta_t1,
        eta_t2,
        estimate,
        ladder_value,
        ladder_step,
        lattice: lattice.clone(),
        grid_tolerance,
        resolution_limited: estimate < grid_tolerance,
    })
}

/// Default content ladder `2^-k`, `k = 3..=12`.
pub fn default_eps_ladder() -> Vec<f64> {
    (3..=12).map(|k| 0.5f64.powi(k)).collect()
}

/// `(1/eps) mu((H(x) + B(0, eps)) \ H(x))` for each `eps`.
pub fn minkowski_content(mu: &Distribution, set: &ParamSet, x: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidInput(format!("enlargement radius must be positive, got {e}")));
    }
    match mu {
        Distribution::Uniform(u) => {
            let intervals = set
                .intervals_1d(x)
                .map_err(|_| Error::Unsupported("content under a uniform law needs a 1-D interval set".into()))?;
            let base = u.mass_of_intervals(&intervals);
            Ok(eps
                .iter()
                .map(|e| {
                    let grown: Vec<(f64, f64)> = intervals.iter().map(|(a, b)| (a - e, b + e)).collect();
                    (u.mass_of_intervals(&grown) - base) / e
                })
                .collect())
        }
        Distribution::Discrete(d) => {
            if set.dim() != d.dim() {
                return Err(Error::InvalidInput("set and distribution dimensions differ".into()));
            }
            let realized = set.at(x);
            let dists: Vec<(f64, f64)> =
                d.support().filter_map(|(a, w)| realized.distance(a).map(|r| (r, w))).collect();
            Ok(eps
                .iter()
                .map(|e| dists.iter().filter(|(r, _)| *r > 0.0 && r <= e).map(|(_, w)| w).sum::<f64>() / e)
                .collect())
        }
    }
}

/// Empirical lower estimate of the subregularity modulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaProbe {
    /// `max dist(z, M(0)) / dist(0, M^-1(z))` over infeasible samples; 0 if none.
    pub kappa_lower: f64,
    /// Per-sample ratio, `None` for feasible samples or samples outside `dom g0`.
    pub ratios: Vec<Option<f64>>,
    /// Points of the lattice found in `M(0)`.
    pub feasible_points: usize,
    pub lattice: Lattice,
}

/// `|max(0, b - mu(H(z)))|_2`, the least right-hand-side shift making `z` feasible.
pub fn residual(cp: &ChanceProblem, mu: &Distribution, z: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for c in &cp.constraints {
        let gap = (c.level - prob_of_set(mu, &c.set, z)?).max(0.0);
        s += gap * gap;
    }
    Ok(s.sqrt())
}

/// Probes `dist(z, M(0)) <= kappa dist(0, M^-1(z))` at the samples; `M(0)` is
/// approximated by its points on `lattice`.
pub fn subregularity_probe(
    cp: &ChanceProblem,
    mu: &Distribution,
    samples: &[Point],
    lattice: &Lattice,
) -> Result<KappaProbe> {
    if lattice.bounds.len() != cp.n {
        return Err(Error::InvalidInput(format!("probe lattice must have dimension n = {}", cp.n)));
    }
    let feasible: Vec<Point> = lattice
        .points()
        .into_par_iter()
        .filter_map(|p| match chance_phi(cp, mu, &p) {
            Ok(v) if !v.is_pos_inf() => Some(Ok(p)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    if feasible.is_empty() {
        return Err(Error::EmptySet);
    }
    let ratios: Vec<Option<f64>> = samples
        .par_iter()
        .map(|z| -> Result<Option<f64>> {
            if cp.g0.eval(z)?.is_pos_inf() {
                return Ok(None);
            }
            let r = residual(cp, mu, z)?;
            if r <= 0.0 {
                return Ok(None);
            }
            let dist = feasible.iter().map(|q| euclid(z, q)).fold(f64::INFINITY, f64::min);
            Ok(Some(dist / r))
        })
        .collect::<Result<_>>()?;
    let kappa_lower = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(KappaProbe { kappa_lower, ratios, feasible_points: feasible.len(), lattice: lattice.clone() })
}

/// Least-squares line through `(log d, log err)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual on the log scale.
    pub residual: f64,
    pub points: usize,
}

/// Fits `log err = intercept + slope log d` over the positive pairs.
pub fn rate_fit(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let logs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(d, e)| *d > 0.0 && *e > 0.0 && d.is_finite() && e.is_finite())
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::InsufficientEvidence(format!("{} positive pairs, need at least 3", logs.len())));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientEvidence("all distances are equal".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit { slope, intercept, residual, points: logs.len() })
}
