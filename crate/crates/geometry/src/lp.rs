//! Dense simplex for `max/min c·x  s.t.  G·x ≤ g` with free `x`.
//!
//! The problem is solved through its dual `min g·y  s.t.  Gᵀy = c, y ≥ 0`,
//! which is in standard form and has only `n = dim(x)` equality rows, so the
//! tableau stays tiny even for polytopes with many facets. The primal point
//! is read back from the simplex multipliers of the final basis.
//!
//! Pivoting uses Dantzig's rule and switches to Bland's rule after a run of
//! degenerate pivots, which rules out cycling.

use nalgebra::DMatrix;

use crate::{GeometryError, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 40;
const MAX_PIVOTS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal optimiser (empty unless optimal).
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per row of `G`, nonnegative, with `Gᵀy = c` for `max`.
    pub dual: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus, n: usize, m: usize) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            x: vec![0.0; n],
            value,
            dual: vec![0.0; m],
        }
    }
}

/// Solves `sense c·x` subject to `G·x ≤ g`.
///
/// For `Sense::Min` the reported `value` is the minimum and `dual` certifies
/// `Gᵀy = -c`.
pub fn lp_solve(c: &[f64], g_mat: &DMatrix<f64>, g: &[f64], sense: Sense) -> Result<LpSolution> {
    let (m, n) = g_mat.shape();
    if c.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    if g.len() != m {
        return Err(GeometryError::DimensionMismatch {
            expected: m,
            found: g.len(),
        });
    }
    let cost: Vec<f64> = match sense {
        Sense::Max => c.to_vec(),
        Sense::Min => c.iter().map(|v| -v).collect(),
    };
    let mut sol = maximize(&cost, g_mat, g)?;
    if sense == Sense::Min {
        sol.value = -sol.value;
    }
    Ok(sol)
}

fn maximize(c: &[f64], g_mat: &DMatrix<f64>, g: &[f64]) -> Result<LpSolution> {
    let (m, n) = g_mat.shape();
    if n == 0 {
        // Zero-dimensional space: the only point is feasible iff g >= 0.
        let status = if g.iter().all(|v| *v >= -1e-9) {
            LpStatus::Optimal
        } else {
            LpStatus::Infeasible
        };
        return Ok(LpSolution {
            status,
            x: Vec::new(),
            value: if status == LpStatus::Optimal { 0.0 } else { f64::NEG_INFINITY },
            dual: vec![0.0; m],
        });
    }
    let mut tab = DualTableau::new(c, g_mat, g);
    if !tab.phase_one()? {
        // Dual infeasible: the primal is unbounded unless it is empty.
        let zero = vec![0.0; n];
        let mut probe = DualTableau::new(&zero, g_mat, g);
        let feasible = probe.phase_one()?;
        debug_assert!(feasible);
        let status = match probe.phase_two()? {
            Phase2::Unbounded => LpStatus::Infeasible,
            Phase2::Optimal => LpStatus::Unbounded,
        };
        return Ok(LpSolution::without_point(status, n, m));
    }
    match tab.phase_two()? {
        Phase2::Unbounded => Ok(LpSolution::without_point(LpStatus::Infeasible, n, m)),
        Phase2::Optimal => {
            let (x, dual) = tab.extract();
            let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                value,
                dual,
            })
        }
    }
}

enum Phase2 {
    Optimal,
    Unbounded,
}

/// Tableau for `min g·y, S·Gᵀ y = S·c, y ≥ 0` plus `n` artificial columns.
struct DualTableau<'a> {
    n: usize,
    m: usize,
    width: usize,
    /// Row-major, `n` rows of `width = m + n + 1` entries; last is the rhs.
    t: Vec<f64>,
    /// Reduced costs, last entry holds minus the objective value.
    d: Vec<f64>,
    basis: Vec<usize>,
    sign: Vec<f64>,
    g: &'a [f64],
    bland: bool,
    pivots: usize,
}

impl<'a> DualTableau<'a> {
    fn new(c: &[f64], g_mat: &DMatrix<f64>, g: &'a [f64]) -> Self {
        let (m, n) = g_mat.shape();
        let width = m + n + 1;
        let mut t = vec![0.0; n * width];
        let mut sign = vec![1.0; n];
        for i in 0..n {
            let s = if c[i] < 0.0 { -1.0 } else { 1.0 };
            sign[i] = s;
            let row = &mut t[i * width..(i + 1) * width];
            for j in 0..m {
                row[j] = s * g_mat[(j, i)];
            }
            row[m + i] = 1.0;
            row[width - 1] = s * c[i];
        }
        Self {
            n,
            m,
            width,
            t,
            d: vec![0.0; width],
            basis: (m..m + n).collect(),
            sign,
            g,
            bland: false,
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.d[c];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.d[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs the simplex loop on the current reduced costs. Columns at or
    /// beyond `limit` never enter.
    fn iterate(&mut self, limit: usize) -> Result<bool> {
        let mut degenerate = 0usize;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(GeometryError::NumericalFailure(format!(
                    "simplex exceeded {MAX_PIVOTS} pivots"
                )));
            }
            let scale = 1.0 + self.d[..limit].iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1e-12;
            let entering = if self.bland {
                (0..limit).find(|&j| self.d[j] < -COST_TOL * scale)
            } else {
                let mut best = None;
                let mut best_val = -COST_TOL * scale;
                for j in 0..limit {
                    if self.d[j] < best_val {
                        best_val = self.d[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.n {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12 * (1.0 + best.abs())
                                || (ratio <= best + 1e-12 * (1.0 + best.abs())
                                    && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, step)) = leave else {
                return Ok(false);
            };
            if step <= 1e-14 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }

    /// Returns whether the dual constraints `Gᵀy = c, y ≥ 0` are feasible.
    fn phase_one(&mut self) -> Result<bool> {
        let (n, m, w) = (self.n, self.m, self.width);
        self.d.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for j in 0..m {
                self.d[j] -= self.t[i * w + j];
            }
            self.d[w - 1] -= self.t[i * w + w - 1];
        }
        self.iterate(m)?;
        let infeasibility = -self.d[w - 1];
        let scale = 1.0 + (0..n).map(|i| self.rhs(i).abs()).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok(false);
        }
        // Push zero-level artificials out of the basis where possible.
        for i in 0..n {
            if self.basis[i] >= m {
                let mut best = None;
                let mut best_abs = 1e-9;
                for j in 0..m {
                    let a = self.at(i, j).abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(j);
                    }
                }
                if let Some(j) = best {
                    self.pivot(i, j);
                }
            }
        }
        Ok(true)
    }

    fn phase_two(&mut self) -> Result<Phase2> {
        let (n, m, w) = (self.n, self.m, self.width);
        self.bland = false;
        for j in 0..w {
            self.d[j] = if j < m { self.g[j] } else { 0.0 };
        }
        for i in 0..n {
            let b = self.basis[i];
            let cb = if b < m { self.g[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..w {
                    self.d[j] -= cb * self.t[i * w + j];
                }
            }
        }
        if self.iterate(m)? {
            Ok(Phase2::Optimal)
        } else {
            Ok(Phase2::Unbounded)
        }
    }

    fn extract(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let mut dual = vec![0.0; m];
        for i in 0..n {
            let b = self.basis[i];
            if b < m {
                dual[b] = self.rhs(i).max(0.0);
            }
        }
        let mut x = vec![0.0; n];
        for (k, xk) in x.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                let b = self.basis[i];
                if b < m {
                    s += self.g[b] * self.at(i, m + k);
                }
            }
            *xk = self.sign[k] * s;
        }
        (x, dual)
    }
}
