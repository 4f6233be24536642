//! Double description method for the extreme rays of a pointed cone
//! `{w : r·w ≤ 0 for every row r}`.
//!
//! Rays are kept unit-normalised; adjacency uses the combinatorial test on
//! zero sets, which is exact as long as the sign classification is.

use nalgebra::{DMatrix, DVector};

use crate::{GeometryError, Result};

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64).max(1)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
    fn contains(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }
}

struct Ray {
    v: Vec<f64>,
    zeros: Bits,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Greedily picks `d` well-conditioned, linearly independent rows.
fn initial_rows(rows: &[Vec<f64>], d: usize) -> Option<Vec<usize>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut chosen = Vec::with_capacity(d);
    let mut residuals: Vec<Vec<f64>> = rows.to_vec();
    for _ in 0..d {
        let mut best = None;
        let mut best_norm = 1e-8;
        for (i, r) in residuals.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let n = dot(r, r).sqrt();
            if n > best_norm {
                best_norm = n;
                best = Some(i);
            }
        }
        let i = best?;
        let mut q = residuals[i].clone();
        normalize(&mut q);
        for r in residuals.iter_mut() {
            let p = dot(r, &q);
            r.iter_mut().zip(&q).for_each(|(x, y)| *x -= p * y);
        }
        basis.push(q);
        chosen.push(i);
    }
    Some(chosen)
}

/// Extreme rays of `{w ∈ R^d : rows·w ≤ 0}`.
///
/// Rows are expected to be unit-normalised. Returns `Unbounded` when the
/// cone contains a line, and an empty list when the cone is `{0}`.
pub(crate) fn extreme_rays(rows: &[Vec<f64>], d: usize, eps: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    let m = rows.len();
    let init = initial_rows(rows, d).ok_or(GeometryError::Unbounded)?;
    let m_init = DMatrix::from_fn(d, d, |i, j| rows[init[i]][j]);
    let inv = m_init
        .try_inverse()
        .ok_or_else(|| GeometryError::NumericalFailure("singular initial basis".into()))?;

    let mut rays: Vec<Ray> = Vec::with_capacity(d);
    for k in 0..d {
        let mut v: Vec<f64> = (0..d).map(|i| -inv[(i, k)]).collect();
        normalize(&mut v);
        let mut zeros = Bits::new(m);
        for (pos, &ri) in init.iter().enumerate() {
            if pos != k {
                zeros.set(ri);
            }
        }
        rays.push(Ray { v, zeros });
    }

    let mut is_init = vec![false; m];
    init.iter().for_each(|&i| is_init[i] = true);

    for (idx, row) in rows.iter().enumerate() {
        if is_init[idx] {
            continue;
        }
        let vals: Vec<f64> = rays.iter().map(|r| dot(row, &r.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > eps).collect();
        if pos.is_empty() {
            for (r, v) in rays.iter_mut().zip(&vals) {
                if v.abs() <= eps {
                    r.zeros.set(idx);
                }
            }
            continue;
        }
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < -eps).collect();

        let mut fresh = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].zeros.and(&rays[n].zeros);
                if (common.count() as usize) + 2 < d {
                    continue;
                }
                let blocked = rays
                    .iter()
                    .enumerate()
                    .any(|(k, r)| k != p && k != n && r.zeros.contains(&common));
                if blocked {
                    continue;
                }
                let (ap, an) = (vals[p], vals[n]);
                let mut v: Vec<f64> = rays[n]
                    .v
                    .iter()
                    .zip(&rays[p].v)
                    .map(|(vn, vp)| ap * vn - an * vp)
                    .collect();
                if normalize(&mut v) <= 1e-300 {
                    continue;
                }
                let mut zeros = common;
                zeros.set(idx);
                fresh.push(Ray { v, zeros });
            }
        }

        let mut kept: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (i, mut r) in rays.into_iter().enumerate() {
            if vals[i] > eps {
                continue;
            }
            if vals[i].abs() <= eps {
                r.zeros.set(idx);
            }
            kept.push(r);
        }
        kept.extend(fresh);
        if kept.len() > cap {
            return Err(GeometryError::EnumerationOverflow(cap));
        }
        rays = kept;
    }

    // Near-duplicates can appear under degeneracy; merge them.
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rays.len());
    for r in rays {
        if !out.iter().any(|o| dist2(o, &r.v) < 1e-16) {
            out.push(r.v);
        }
    }
    Ok(out)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solves the small dense system `M x = b`, returning `None` when singular.
pub(crate) fn solve(m: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = m.clone().lu();
    lu.solve(&DVector::from_column_slice(b)).map(|v| v.as_slice().to_vec())
}
