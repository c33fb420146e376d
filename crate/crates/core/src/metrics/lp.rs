//! Two-phase revised simplex with Bland's rule for small equality-form LPs
//! `minimize c . x  subject to  A x = b, x >= 0`.
//!
//! Columns are stored sparsely; the basis inverse is kept dense and refactored
//! periodically.

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const MAX_ITERATIONS: usize = 1_000_000;

/// Equality-form LP with sparse columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub n_rows: usize,
    /// Column `j` as `(row, coefficient)` pairs.
    pub columns: Vec<Vec<(usize, f64)>>,
    pub costs: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex multipliers `y` with `A^T y <= c` at optimality.
    pub duals: Vec<f64>,
}

impl LpProblem {
    pub fn new(n_rows: usize, rhs: Vec<f64>) -> Self {
        LpProblem { n_rows, columns: Vec::new(), costs: Vec::new(), rhs }
    }

    pub fn push_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) {
        self.columns.push(entries);
        self.costs.push(cost);
    }

    fn validate(&self) -> Result<()> {
        if self.rhs.len() != self.n_rows || self.columns.len() != self.costs.len() {
            return Err(Error::InvalidInput("LP dimensions inconsistent".into()));
        }
        if self.columns.iter().flatten().any(|(r, v)| *r >= self.n_rows || !v.is_finite()) {
            return Err(Error::InvalidInput("LP column entry out of range or non-finite".into()));
        }
        if self.costs.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("LP data must be finite".into()));
        }
        Ok(())
    }
}

struct Tableau<'a> {
    lp: &'a LpProblem,
    /// Row sign applied so that the working right-hand side is nonnegative.
    sign: Vec<f64>,
    /// Basic variable per row; indices `>= n_cols` are artificials.
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    pivots: usize,
}

impl<'a> Tableau<'a> {
    fn n_cols(&self) -> usize {
        self.lp.columns.len()
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j >= self.n_cols() {
            vec![(j - self.n_cols(), 1.0)]
        } else {
            self.lp.columns[j].iter().map(|&(r, v)| (r, v * self.sign[r])).collect()
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.lp.n_rows;
        let col = self.column(j);
        (0..m).map(|i| col.iter().map(|&(r, v)| self.binv[i][r] * v).sum()).collect()
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.lp.n_rows;
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost(j)).collect();
        (0..m).map(|r| (0..m).map(|i| cb[i] * self.binv[i][r]).sum()).collect()
    }

    fn pivot(&mut self, r: usize, entering: usize, w: &[f64]) {
        let m = self.lp.n_rows;
        let p = w[r];
        for v in self.binv[r].iter_mut() {
            *v /= p;
        }
        self.xb[r] /= p;
        let row_r = self.binv[r].clone();
        let xr = self.xb[r];
        for i in 0..m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                for (v, rr) in self.binv[i].iter_mut().zip(&row_r) {
                    *v -= f * rr;
                }
                self.xb[i] -= f * xr;
            }
        }
        self.basis[r] = entering;
        self.pivots += 1;
        if self.pivots % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    /// Recomputes the basis inverse and basic values from scratch.
    fn refactor(&mut self) {
        let m = self.lp.n_rows;
        let mut a = vec![vec![0.0; 2 * m]; m];
        for (i, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                a[r][i] = v;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).expect("nonempty");
            if a[piv][c].abs() < 1e-14 {
                return;
            }
            a.swap(c, piv);
            let p = a[c][c];
            for v in a[c].iter_mut() {
                *v /= p;
            }
            let rc = a[c].clone();
            for (i, row) in a.iter_mut().enumerate() {
                if i != c && row[c] != 0.0 {
                    let f = row[c];
                    for (v, q) in row.iter_mut().zip(&rc) {
                        *v -= f * q;
                    }
                }
            }
        }
        self.binv = a.into_iter().map(|row| row[m..].to_vec()).collect();
        let b: Vec<f64> = self.lp.rhs.iter().zip(&self.sign).map(|(b, s)| b * s).collect();
        self.xb = (0..m).map(|i| (0..m).map(|k| self.binv[i][k] * b[k]).sum::<f64>()).collect();
        for v in &mut self.xb {
            if v.abs() < 1e-13 {
                *v = 0.0;
            }
        }
    }

    /// Runs simplex iterations on the given cost; artificials never re-enter.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64) -> Result<()> {
        let n = self.n_cols();
        let mut in_basis = vec![false; n];
        for &j in &self.basis {
            if j < n {
                in_basis[j] = true;
            }
        }
        for _ in 0..MAX_ITERATIONS {
            let y = self.duals(cost);
            let entering = (0..n).find(|&j| {
                !in_basis[j] && {
                    let col = &self.lp.columns[j];
                    let reduced = cost(j) - col.iter().map(|&(r, v)| y[r] * v * self.sign[r]).sum::<f64>();
                    reduced < -COST_TOL * (1.0 + cost(j).abs())
                }
            });
            let Some(j) = entering else { return Ok(()) };
            let w = self.ftran(j);
            let mut leave: Option<(usize, f64)> = None;
            for (i, &wi) in w.iter().enumerate() {
                if wi > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / wi;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-15 || (ratio <= best + 1e-15 && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return Err(Error::LpUnbounded) };
            let old = self.basis[r];
            if old < n {
                in_basis[old] = false;
            }
            in_basis[j] = true;
            self.pivot(r, j, &w);
        }
        Err(Error::InvalidInput("simplex iteration limit reached".into()))
    }
}

/// Solves `min c . x, A x = b, x >= 0`.
pub fn solve(lp: &LpProblem) -> Result<LpSolution> {
    lp.validate()?;
    let m = lp.n_rows;
    let n = lp.columns.len();
    let sign: Vec<f64> = lp.rhs.iter().map(|b| if *b < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut t = Tableau {
        lp,
        binv: (0..m).map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect()).collect(),
        xb: lp.rhs.iter().zip(&sign).map(|(b, s)| b * s).collect(),
        basis: (n..n + m).collect(),
        sign,
        pivots: 0,
    };

    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    t.optimize(&phase1)?;
    let infeasibility: f64 = t.basis.iter().zip(&t.xb).filter(|(j, _)| **j >= n).map(|(_, v)| *v).sum();
    let scale = 1.0 + lp.rhs.iter().map(|b| b.abs()).sum::<f64>();
    if infeasibility > 1e-9 * scale {
        return Err(Error::LpInfeasible);
    }

    // Drive zero-level artificials out of the basis where a real column allows it.
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        let in_basis: Vec<bool> = {
            let mut v = vec![false; n];
            for &j in &t.basis {
                if j < n {
                    v[j] = true;
                }
            }
            v
        };
        if let Some((j, w)) = (0..n).filter(|&j| !in_basis[j]).map(|j| (j, t.ftran(j))).find(|(_, w)| w[r].abs() > 1e-9)
        {
            t.xb[r] = 0.0;
            t.pivot(r, j, &w);
        }
    }

    let phase2 = |j: usize| if j >= n { 0.0 } else { lp.costs[j] };
    t.optimize(&phase2)?;
    t.refactor();

    let mut x = vec![0.0; n];
    for (i, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.xb[i].max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.costs).map(|(x, c)| x * c).sum();
    let y = t.duals(&phase2);
    let duals = y.iter().zip(&t.sign).map(|(y, s)| y * s).collect();
    Ok(LpSolution { x, objective, duals })
}
