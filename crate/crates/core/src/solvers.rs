//! Deterministic multiresolution grid minimization of extended-real functions
//! on boxes of dimension at most three.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result, XReal};

/// Each refinement round splits a kept cell into `REFINE^d` subcells.
pub const REFINE: i64 = 4;

/// Most cells carried from one round to the next.
pub const MAX_KEPT_CELLS: usize = 4096;

/// Highest supported box dimension.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Per-coordinate `[lo, hi]`.
    pub bounds: Vec<(f64, f64)>,
    /// Points per axis in round 0.
    pub resolution: usize,
    pub rounds: usize,
    /// Fraction of feasible cells refined after each round.
    pub keep: f64,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: usize, rounds: usize, keep: f64) -> Result<Self> {
        let spec = GridSpec { bounds, resolution, rounds, keep };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() || self.bounds.len() > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1..={MAX_DIM}, got {}",
                self.bounds.len()
            )));
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidInput(format!("grid axis [{lo}, {hi}] needs finite lo < hi")));
        }
        if self.resolution < 3 {
            return Err(Error::InvalidInput("grid resolution must be at least 3".into()));
        }
        if self.rounds > 8 {
            return Err(Error::InvalidInput("at most 8 refinement rounds".into()));
        }
        if !(self.keep > 0.0 && self.keep <= 1.0) {
            return Err(Error::InvalidInput(format!("keep fraction {} outside (0, 1]", self.keep)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Spacing of the finest evaluated lattice per axis (cell centers of the last round).
    pub fn finest_spacing(&self) -> Vec<f64> {
        let n = self.lattice_extent() as f64;
        self.bounds.iter().map(|(lo, hi)| (hi - lo) / n).collect()
    }

    /// Spacing between corners of the last round's cells per axis.
    pub fn final_cell_spacing(&self) -> Vec<f64> {
        let steps = (self.resolution - 1) as f64 * (REFINE as f64).powi(self.rounds as i32);
        self.bounds.iter().map(|(lo, hi)| (hi - lo) / steps).collect()
    }

    /// Lattice units spanned by one level-`level` cell.
    fn unit(&self, level: usize) -> i64 {
        REFINE.pow((self.rounds + 1 - level) as u32)
    }

    fn lattice_extent(&self) -> i64 {
        (self.resolution as i64 - 1) * self.unit(0)
    }

    fn coord(&self, idx: &[i64]) -> Point {
        let n = self.lattice_extent() as f64;
        idx.iter()
            .zip(&self.bounds)
            .map(|(&k, (lo, hi))| if k == self.lattice_extent() { *hi } else { lo + ((hi - lo) * k as f64) / n })
            .collect()
    }
}

/// Outcome of a grid minimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinResult {
    pub value: XReal,
    /// Evaluated points within `tolerance` of `value`, lexicographically sorted.
    pub representatives: Vec<Point>,
    pub tolerance: f64,
    pub feasible_found: bool,
    /// Some representative lies on the box boundary.
    pub box_clipped: bool,
    /// Best value after each round.
    pub round_values: Vec<XReal>,
    pub finest_spacing: Vec<f64>,
}

struct Sweep {
    values: HashMap<Vec<i64>, XReal>,
    round_values: Vec<XReal>,
}

fn cell_points(spec: &GridSpec, corner: &[i64], size: i64) -> Vec<Vec<i64>> {
    let d = corner.len();
    let mut pts = Vec::with_capacity((1 << d) + 1);
    for mask in 0..(1usize << d) {
        pts.push((0..d).map(|i| corner[i] + if mask >> i & 1 == 1 { size } else { 0 }).collect());
    }
    pts.push(corner.iter().map(|c| c + size / 2).collect());
    debug_assert!(pts.iter().flatten().all(|&k| k >= 0 && k <= spec.lattice_extent()));
    pts
}

fn sweep<F>(f: &F, spec: &GridSpec) -> Result<Sweep>
where
    F: Fn(&[f64]) -> Result<XReal> + Sync + ?Sized,
{
    spec.validate()?;
    let d = spec.dim();
    let cells_per_axis = spec.resolution as i64 - 1;
    let mut size = spec.unit(0);
    let mut cells: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..d {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                (0..cells_per_axis).map(move |k| {
                    let mut c = c.clone();
                    c.push(k * size);
                    c
                })
            })
            .collect();
    }

    let mut values: HashMap<Vec<i64>, XReal> = HashMap::new();
    let mut round_values = Vec::with_capacity(spec.rounds + 1);
    let mut best = XReal::POS_INF;
    for level in 0..=spec.rounds {
        let mut fresh: Vec<Vec<i64>> =
            cells.iter().flat_map(|c| cell_points(spec, c, size)).filter(|p| !values.contains_key(p)).collect();
        fresh.sort_unstable();
        fresh.dedup();
        let evaluated: Vec<(Vec<i64>, Result<XReal>)> = fresh
            .into_par_iter()
            .map(|p| {
                let x = spec.coord(&p);
                let v = f(&x);
                (p, v)
            })
            .collect();
        for (p, v) in evaluated {
            let v = v?;
            best = best.min(v);
            values.insert(p, v);
        }
        round_values.push(best);
        if level == spec.rounds {
            break;
        }

        let mut scored: Vec<(XReal, &Vec<i64>)> = cells
            .iter()
            .map(|c| {
                let s = cell_points(spec, c, size).iter().map(|p| values[p]).min().expect("cell has points");
                (s, c)
            })
            .filter(|(s, _)| !s.is_pos_inf())
            .collect();
        if scored.is_empty() {
            // No finite cell: later rounds cannot improve on +inf.
            for _ in level + 1..=spec.rounds {
                round_values.push(best);
            }
            break;
        }
        scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let quota = ((spec.keep * scored.len() as f64).ceil() as usize).clamp(1, scored.len());
        // Cells tied with the last one inside the quota are kept too.
        let cutoff = scored[quota - 1].0;
        let kept = scored.iter().take_while(|(s, _)| *s <= cutoff).count().min(MAX_KEPT_CELLS);
        let sub = size / REFINE;
        let mut next: Vec<Vec<i64>> = Vec::with_capacity(kept * REFINE.pow(d as u32) as usize);
        for (_, c) in scored.into_iter().take(kept) {
            let mut subs: Vec<Vec<i64>> = vec![Vec::new()];
            for &ci in c.iter() {
                subs = subs
                    .into_iter()
                    .flat_map(|s| {
                        (0..REFINE).map(move |k| {
                            let mut s = s.clone();
                            s.push(ci + k * sub);
                            s
                        })
                    })
                    .collect();
            }
            next.extend(subs);
        }
        next.sort_unstable();
        next.dedup();
        cells = next;
        size = sub;
    }
    Ok(Sweep { values, round_values })
}

fn collect_within(spec: &GridSpec, sw: &Sweep, threshold: XReal) -> (Vec<Point>, bool) {
    let extent = spec.lattice_extent();
    let mut hits: Vec<&Vec<i64>> = sw.values.iter().filter(|(_, v)| **v <= threshold).map(|(k, _)| k).collect();
    hits.sort_unstable();
    let clipped = hits.iter().any(|p| p.iter().any(|&k| k == 0 || k == extent));
    (hits.into_iter().map(|p| spec.coord(p)).collect(), clipped)
}

fn value_tolerance(v: XReal) -> f64 {
    if v.is_finite() {
        1e-12 * v.value().abs().max(1.0)
    } else {
        0.0
    }
}

/// Minimizes `f` over the box by refining around the best cells.
///
/// A cell survives a round when any corner or its center is finite, ranked by
/// its best such value; cells tied with the last kept one survive as well, up to
/// [`MAX_KEPT_CELLS`] in lexicographic cell order.
pub fn grid_minimize<F>(f: &F, spec: &GridSpec) -> Result<MinResult>
where
    F: Fn(&[f64]) -> Result<XReal> + Sync + ?Sized,
{
    let sw = sweep(f, spec)?;
    let value = *sw.round_values.last().expect("at least one round");
    let tolerance = value_tolerance(value);
    let (representatives, box_clipped) = if value.is_pos_inf() {
        (Vec::new(), false)
    } else if value.is_neg_inf() {
        collect_within(spec, &sw, XReal::NEG_INF)
    } else {
        collect_within(spec, &sw, XReal::finite(value.value() + tolerance))
    };
    Ok(MinResult {
        value,
        feasible_found: !value.is_pos_inf(),
        representatives,
        tolerance,
        box_clipped,
        round_values: sw.round_values,
        finest_spacing: spec.finest_spacing(),
    })
}

/// Evaluated grid points within `eps` of the minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearArgmin {
    pub value: XReal,
    pub points: Vec<Point>,
    pub box_clipped: bool,
}

impl NearArgmin {
    /// Coordinate-wise `[min, max]` over the points.
    pub fn hull(&self) -> Vec<(f64, f64)> {
        let d = self.points.first().map_or(0, Vec::len);
        (0..d)
            .map(|i| {
                self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])))
            })
            .collect()
    }
}

/// All evaluated points with value at most `min + eps` (plus rounding tolerance).
pub fn near_argmin<F>(f: &F, spec: &GridSpec, eps: f64) -> Result<NearArgmin>
where
    F: Fn(&[f64]) -> Result<XReal> + Sync + ?Sized,
{
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("eps must be >= 0, got {eps}")));
    }
    let sw = sweep(f, spec)?;
    let value = *sw.round_values.last().expect("at least one round");
    if value.is_pos_inf() {
        return Ok(NearArgmin { value, points: Vec::new(), box_clipped: false });
    }
    let threshold =
        if value.is_neg_inf() { XReal::NEG_INF } else { XReal::finite(value.value() + eps + value_tolerance(value)) };
    let (points, box_clipped) = collect_within(spec, &sw, threshold);
    Ok(NearArgmin { value, points, box_clipped })
}

/// One member of a minimized family.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRow {
    pub nu: u64,
    pub result: std::result::Result<MinResult, Error>,
    /// Largest distance from a representative to the reference set.
    pub dist_to_reference: Option<f64>,
}

/// Largest distance from any point of `points` to the nearest point of `reference`.
pub fn excess(points: &[Point], reference: &[Point]) -> Option<f64> {
    if points.is_empty() || reference.is_empty() {
        return None;
    }
    let dist = |a: &Point, b: &Point| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Some(points.iter().map(|p| reference.iter().map(|r| dist(p, r)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max))
}

/// Minimizes `family(nu)` for every `nu`; failures are recorded per row.
pub fn minimize_sequence<Fam, G>(family: &Fam, spec: &GridSpec, nus: &[u64], reference: &[Point]) -> Vec<SequenceRow>
where
    Fam: Fn(u64) -> Result<G> + Sync,
    G: Fn(&[f64]) -> Result<XReal> + Sync,
{
    nus.par_iter()
        .map(|&nu| {
            let result = family(nu).and_then(|g| grid_minimize(&g, spec));
            let dist_to_reference = result.as_ref().ok().and_then(|r| excess(&r.representatives, reference));
            SequenceRow { nu, result, dist_to_reference }
        })
        .collect()
}
