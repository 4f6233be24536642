use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dd;
use crate::lp::{lp_solve, LpStatus, Sense};
use crate::vpoly::VPolytope;
use crate::{GeometryError, Result, Tolerances};

/// Below this norm a row is treated as the zero row.
const ZERO_ROW: f64 = 1e-12;

/// Convex polyhedron `{x : G·x ≤ g}` with unit-norm rows.
///
/// The empty set may be marked explicitly by a single zero row with a
/// negative offset; every other row has unit Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HRepJson", into = "HRepJson")]
pub struct HPolytope {
    dim: usize,
    a: DMatrix<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HRepJson {
    #[serde(rename = "G")]
    g_mat: Vec<Vec<f64>>,
    g: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<HRepJson> for HPolytope {
    type Error = GeometryError;
    fn try_from(j: HRepJson) -> Result<Self> {
        let dim = match (j.g_mat.first(), j.dim) {
            (Some(r), _) => r.len(),
            (None, Some(d)) => d,
            (None, None) => 0,
        };
        HPolytope::from_rows(dim, &j.g_mat, &j.g)
    }
}

impl From<HPolytope> for HRepJson {
    fn from(p: HPolytope) -> Self {
        let g_mat: Vec<Vec<f64>> = (0..p.n_rows()).map(|j| p.row(j)).collect();
        HRepJson {
            dim: if g_mat.is_empty() { Some(p.dim) } else { None },
            g_mat,
            g: p.b,
        }
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn contains_box(&self, other: &BoundingBox, eps: f64) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| *a <= b + eps)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| *a >= b - eps)
    }

    pub fn intersects(&self, other: &BoundingBox, eps: f64) -> bool {
        (0..self.lo.len()).all(|i| self.lo[i] <= other.hi[i] + eps && other.lo[i] <= self.hi[i] + eps)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).max(0.0)).product()
    }

    pub fn hull(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

/// Largest inscribed ball. `radius` is negative for empty sets and infinite
/// when arbitrarily large balls fit.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl HPolytope {
    /// Builds `{x : a·x ≤ b}`, normalising rows and dropping trivial ones.
    pub fn new(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        let dim = a.ncols();
        let mut rows = Vec::with_capacity(a.nrows());
        let mut rhs = Vec::with_capacity(a.nrows());
        for j in 0..a.nrows() {
            let r: Vec<f64> = a.row(j).iter().copied().collect();
            rows.push(r);
            rhs.push(b[j]);
        }
        Ok(Self::assemble(dim, rows, rhs))
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        if rows.len() != b.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: rows.len(),
                found: b.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Ok(Self::assemble(dim, rows.to_vec(), b.to_vec()))
    }

    fn assemble(dim: usize, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Self {
        let mut keep_rows: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
        let mut keep_b = Vec::with_capacity(rows.len());
        for (mut r, bj) in rows.into_iter().zip(rhs) {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= ZERO_ROW {
                if bj < -1e-12 {
                    return Self::empty(dim);
                }
                continue;
            }
            r.iter_mut().for_each(|v| *v /= norm);
            keep_rows.push(r);
            keep_b.push(bj / norm);
        }
        let a = DMatrix::from_fn(keep_rows.len(), dim, |i, j| keep_rows[i][j]);
        Self { dim, a, b: keep_b }
    }

    /// The explicitly empty set in `R^dim`.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            a: DMatrix::zeros(1, dim),
            b: vec![-1.0],
        }
    }

    /// The whole space `R^dim` (no constraints).
    pub fn universe(dim: usize) -> Self {
        Self {
            dim,
            a: DMatrix::zeros(0, dim),
            b: Vec::new(),
        }
    }

    /// `B_∞(r) = {x : |x_i| ≤ r}`.
    pub fn unit_box(dim: usize, r: f64) -> Self {
        Self::box_bounds(&vec![-r; dim], &vec![r; dim])
    }

    pub fn box_bounds(lo: &[f64], hi: &[f64]) -> Self {
        let dim = lo.len();
        let mut rows = Vec::with_capacity(2 * dim);
        let mut b = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut r = vec![0.0; dim];
            r[i] = 1.0;
            rows.push(r.clone());
            b.push(hi[i]);
            r[i] = -1.0;
            rows.push(r);
            b.push(-lo[i]);
        }
        Self::assemble(dim, rows, b)
    }

    /// The singleton `{p}`.
    pub fn point(p: &[f64]) -> Self {
        Self::box_bounds(p, p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.a.row(j).iter().copied().collect()
    }

    fn row_dot(&self, j: usize, x: &[f64]) -> f64 {
        (0..self.dim).map(|k| self.a[(j, k)] * x[k]).sum()
    }

    /// True for the explicit empty marker (a cheap, incomplete test).
    pub fn is_marked_empty(&self) -> bool {
        (0..self.n_rows()).any(|j| self.b[j] < 0.0 && (0..self.dim).all(|k| self.a[(j, k)] == 0.0))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: d,
            })
        } else {
            Ok(())
        }
    }

    /// `max_{x∈P} q·x` together with a maximiser.
    pub fn support_point(&self, q: &[f64], _tol: &Tolerances) -> Result<(f64, Vec<f64>)> {
        self.check_dim(q.len())?;
        if self.is_marked_empty() {
            return Err(GeometryError::EmptySet);
        }
        let sol = lp_solve(q, &self.a, &self.b, Sense::Max)?;
        match sol.status {
            LpStatus::Optimal => Ok((sol.value, sol.x)),
            LpStatus::Infeasible => Err(GeometryError::EmptySet),
            LpStatus::Unbounded => Err(GeometryError::Unbounded),
        }
    }

    /// Support function `h_P(q) = max_{x∈P} q·x`.
    pub fn support(&self, q: &[f64], tol: &Tolerances) -> Result<f64> {
        self.support_point(q, tol).map(|(v, _)| v)
    }

    /// Chebyshev ball; works for empty and unbounded sets too.
    pub fn chebyshev(&self, _tol: &Tolerances) -> Result<Chebyshev> {
        if self.is_marked_empty() {
            return Ok(Chebyshev {
                center: vec![0.0; self.dim],
                radius: f64::NEG_INFINITY,
            });
        }
        let m = self.n_rows();
        if m == 0 {
            return Ok(Chebyshev {
                center: vec![0.0; self.dim],
                radius: f64::INFINITY,
            });
        }
        let n = self.dim;
        let a = DMatrix::from_fn(m, n + 1, |i, j| if j < n { self.a[(i, j)] } else { 1.0 });
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let sol = lp_solve(&c, &a, &self.b, Sense::Max)?;
        match sol.status {
            LpStatus::Optimal => Ok(Chebyshev {
                center: sol.x[..n].to_vec(),
                radius: sol.x[n],
            }),
            LpStatus::Unbounded => {
                // Arbitrarily large balls fit; any feasible centre will do.
                let zero = vec![0.0; n];
                let p = lp_solve(&zero, &self.a, &self.b, Sense::Max)?;
                Ok(Chebyshev {
                    center: p.x,
                    radius: f64::INFINITY,
                })
            }
            LpStatus::Infeasible => Err(GeometryError::NumericalFailure(
                "Chebyshev problem reported infeasible".into(),
            )),
        }
    }

    pub fn is_empty(&self, tol: &Tolerances) -> bool {
        if self.is_marked_empty() {
            return true;
        }
        match self.chebyshev(tol) {
            Ok(c) => c.radius < -tol.eps_feas,
            Err(_) => true,
        }
    }

    /// Empty or without interior (inscribed radius at most `eps`).
    pub fn is_flat(&self, eps: f64, tol: &Tolerances) -> bool {
        match self.chebyshev(tol) {
            Ok(c) => c.radius <= eps,
            Err(_) => true,
        }
    }

    pub fn contains_point(&self, x: &[f64], tol: &Tolerances) -> bool {
        x.len() == self.dim && (0..self.n_rows()).all(|j| self.row_dot(j, x) <= self.b[j] + tol.eps_feas)
    }

    /// Largest violation `max_j (G_j·x − g_j)`; nonpositive inside.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.n_rows())
            .map(|j| self.row_dot(j, x) - self.b[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `other ⊆ self`, checked row by row through support functions.
    pub fn contains_set(&self, other: &HPolytope, tol: &Tolerances) -> Result<bool> {
        self.contains_set_within(other, tol.eps_set, tol)
    }

    /// `other ⊆ self` up to a slack of `eps` per unit-norm row.
    pub fn contains_set_within(&self, other: &HPolytope, eps: f64, tol: &Tolerances) -> Result<bool> {
        self.check_dim(other.dim)?;
        if other.is_empty(tol) {
            return Ok(true);
        }
        for j in 0..self.n_rows() {
            match other.support(&self.row(j), tol) {
                Ok(h) if h <= self.b[j] + eps => {}
                Ok(_) | Err(GeometryError::Unbounded) => return Ok(false),
                Err(GeometryError::EmptySet) => return Ok(true),
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }

    pub fn intersect(&self, other: &HPolytope) -> Result<HPolytope> {
        self.check_dim(other.dim)?;
        if self.is_marked_empty() || other.is_marked_empty() {
            return Ok(Self::empty(self.dim));
        }
        let m = self.n_rows() + other.n_rows();
        let a = DMatrix::from_fn(m, self.dim, |i, j| {
            if i < self.n_rows() {
                self.a[(i, j)]
            } else {
                other.a[(i - self.n_rows(), j)]
            }
        });
        let mut b = self.b.clone();
        b.extend_from_slice(&other.b);
        Ok(Self { dim: self.dim, a, b })
    }

    /// Adds one half-space `row·x ≤ rhs` (normalised on the way in).
    pub fn with_row(&self, row: &[f64], rhs: f64) -> Result<HPolytope> {
        self.check_dim(row.len())?;
        let extra = Self::from_rows(self.dim, &[row.to_vec()], &[rhs])?;
        self.intersect(&extra)
    }

    /// Drops rows implied by the others (and duplicate rows).
    ///
    /// Returns the explicit empty marker for empty input.
    pub fn remove_redundancy(&self, tol: &Tolerances) -> Result<HPolytope> {
        if self.is_empty(tol) {
            return Ok(Self::empty(self.dim));
        }
        let m = self.n_rows();
        // Exact duplicates of direction: keep the tightest offset.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| self.b[i].total_cmp(&self.b[j]));
        let mut keep: Vec<usize> = Vec::with_capacity(m);
        for &i in &order {
            let dup = keep.iter().any(|&k| {
                let d: f64 = (0..self.dim).map(|c| (self.a[(i, c)] - self.a[(k, c)]).powi(2)).sum();
                d < 1e-20
            });
            if !dup {
                keep.push(i);
            }
        }
        let mut active = vec![true; keep.len()];
        for idx in 0..keep.len() {
            let j = keep[idx];
            let rows: Vec<usize> = keep
                .iter()
                .enumerate()
                .filter(|(k, _)| active[*k])
                .map(|(_, &r)| r)
                .collect();
            let a = DMatrix::from_fn(rows.len(), self.dim, |i, c| self.a[(rows[i], c)]);
            let b: Vec<f64> = rows
                .iter()
                .map(|&r| if r == j { self.b[r] + 1.0 } else { self.b[r] })
                .collect();
            let sol = lp_solve(&self.row(j), &a, &b, Sense::Max)?;
            if sol.status == LpStatus::Optimal && sol.value <= self.b[j] + tol.eps_feas {
                active[idx] = false;
            }
        }
        let rows: Vec<Vec<f64>> = keep
            .iter()
            .enumerate()
            .filter(|(k, _)| active[*k])
            .map(|(_, &r)| self.row(r))
            .collect();
        let b: Vec<f64> = keep
            .iter()
            .enumerate()
            .filter(|(k, _)| active[*k])
            .map(|(_, &r)| self.b[r])
            .collect();
        Self::from_rows(self.dim, &rows, &b)
    }

    pub fn bounding_box(&self, tol: &Tolerances) -> Result<BoundingBox> {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[i] = 1.0;
            hi[i] = self.support(&e, tol)?;
            e[i] = -1.0;
            lo[i] = -self.support(&e, tol)?;
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn is_bounded(&self, tol: &Tolerances) -> bool {
        self.bounding_box(tol).is_ok()
    }

    /// Compact with the origin strictly inside.
    pub fn is_cset(&self, tol: &Tolerances) -> bool {
        !self.is_marked_empty()
            && self.b.iter().all(|v| *v > tol.eps_feas)
            && self.is_bounded(tol)
    }

    /// Pontryagin difference `{x : x ⊕ Q ⊆ P}`.
    pub fn erode(&self, q: &HPolytope, tol: &Tolerances) -> Result<HPolytope> {
        self.check_dim(q.dim)?;
        if self.is_marked_empty() {
            return Ok(self.clone());
        }
        let mut b = self.b.clone();
        for (j, bj) in b.iter_mut().enumerate() {
            *bj -= q.support(&self.row(j), tol)?;
        }
        Ok(Self {
            dim: self.dim,
            a: self.a.clone(),
            b,
        })
    }

    /// `{z : M·z + t ∈ P}`, exact in half-space form.
    pub fn affine_preimage(&self, m: &DMatrix<f64>, t: &[f64]) -> Result<HPolytope> {
        self.check_dim(m.nrows())?;
        self.check_dim(t.len())?;
        if self.is_marked_empty() {
            return Ok(Self::empty(m.ncols()));
        }
        let a = &self.a * m;
        let b: Vec<f64> = (0..self.n_rows()).map(|j| self.b[j] - self.row_dot(j, t)).collect();
        Self::new(a, b)
    }

    /// `{M·x + t : x ∈ P}` through vertices and a hull.
    pub fn affine_image(&self, m: &DMatrix<f64>, t: &[f64], tol: &Tolerances) -> Result<HPolytope> {
        self.check_dim(m.ncols())?;
        let v = self.vertices(tol)?;
        v.affine_map(m, t)?.hull(tol)
    }

    /// `P ⊕ Q` via pairwise vertex sums.
    pub fn minkowski_sum(&self, q: &HPolytope, tol: &Tolerances) -> Result<HPolytope> {
        self.check_dim(q.dim)?;
        let vp = self.vertices(tol)?;
        let vq = q.vertices(tol)?;
        vp.minkowski_sum(&vq)?.hull(tol)
    }

    /// `{λx : x ∈ P}` for `λ > 0`.
    pub fn scale(&self, lambda: f64) -> HPolytope {
        Self {
            dim: self.dim,
            a: self.a.clone(),
            b: self.b.iter().map(|v| v * lambda).collect(),
        }
    }

    pub fn translate(&self, t: &[f64]) -> HPolytope {
        let b = (0..self.n_rows()).map(|j| self.b[j] + self.row_dot(j, t)).collect();
        Self {
            dim: self.dim,
            a: self.a.clone(),
            b,
        }
    }

    /// `P × Q` in `R^{n+m}`.
    pub fn cartesian(&self, other: &HPolytope) -> HPolytope {
        let (n1, n2) = (self.dim, other.dim);
        let m1 = self.n_rows();
        let a = DMatrix::from_fn(m1 + other.n_rows(), n1 + n2, |i, j| {
            if i < m1 {
                if j < n1 {
                    self.a[(i, j)]
                } else {
                    0.0
                }
            } else if j >= n1 {
                other.a[(i - m1, j - n1)]
            } else {
                0.0
            }
        });
        let mut b = self.b.clone();
        b.extend_from_slice(&other.b);
        Self { dim: n1 + n2, a, b }
    }

    /// Fixes the coordinates `fixed_dims` to `values` and returns the set in
    /// the remaining coordinates (in increasing index order).
    pub fn slice(&self, fixed_dims: &[usize], values: &[f64]) -> Result<HPolytope> {
        if fixed_dims.len() != values.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: fixed_dims.len(),
                found: values.len(),
            });
        }
        if let Some(&bad) = fixed_dims.iter().find(|&&d| d >= self.dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: bad + 1,
            });
        }
        let free: Vec<usize> = (0..self.dim).filter(|d| !fixed_dims.contains(d)).collect();
        if self.is_marked_empty() {
            return Ok(Self::empty(free.len()));
        }
        let rows: Vec<Vec<f64>> = (0..self.n_rows())
            .map(|j| free.iter().map(|&k| self.a[(j, k)]).collect())
            .collect();
        let b: Vec<f64> = (0..self.n_rows())
            .map(|j| {
                self.b[j]
                    - fixed_dims
                        .iter()
                        .zip(values)
                        .map(|(&k, v)| self.a[(j, k)] * v)
                        .sum::<f64>()
            })
            .collect();
        Self::from_rows(free.len(), &rows, &b)
    }

    /// Vertex list of a bounded polytope.
    pub fn vertices(&self, tol: &Tolerances) -> Result<VPolytope> {
        if self.is_empty(tol) {
            return Err(GeometryError::EmptySet);
        }
        let n = self.dim;
        if n == 0 {
            return Ok(VPolytope::new(0, vec![Vec::new()]));
        }
        let reduced = self.remove_redundancy(tol)?;
        let mut rows: Vec<Vec<f64>> = (0..reduced.n_rows())
            .map(|j| {
                let mut r = reduced.row(j);
                r.push(-reduced.b[j]);
                let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.iter_mut().for_each(|v| *v /= norm);
                r
            })
            .collect();
        let mut t_row = vec![0.0; n + 1];
        t_row[n] = -1.0;
        rows.push(t_row);
        let rays = dd::extreme_rays(&rows, n + 1, 1e-10, 200_000)?;
        let mut verts = Vec::new();
        for r in rays {
            let t = r[n];
            if t > 1e-12 {
                verts.push(r[..n].iter().map(|v| v / t).collect::<Vec<f64>>());
            } else {
                return Err(GeometryError::Unbounded);
            }
        }
        if verts.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        Ok(VPolytope::new(n, verts))
    }

    /// Exact volume (zero for sets without interior).
    pub fn volume(&self, tol: &Tolerances) -> Result<f64> {
        if self.is_empty(tol) {
            return Ok(0.0);
        }
        if !self.is_bounded(tol) {
            return Err(GeometryError::Unbounded);
        }
        if self.is_flat(1e-12, tol) {
            return Ok(0.0);
        }
        if let Some(v) = self.box_volume() {
            return Ok(v);
        }
        self.vertices(tol)?.volume(tol)
    }

    /// Product of extents when every row is axis-aligned.
    fn box_volume(&self) -> Option<f64> {
        let mut lo = vec![f64::NEG_INFINITY; self.dim];
        let mut hi = vec![f64::INFINITY; self.dim];
        for j in 0..self.n_rows() {
            let mut nz = (0..self.dim).filter(|&k| self.a[(j, k)] != 0.0);
            let k = nz.next()?;
            if nz.next().is_some() {
                return None;
            }
            let v = self.b[j] / self.a[(j, k)];
            if self.a[(j, k)] > 0.0 {
                hi[k] = hi[k].min(v);
            } else {
                lo[k] = lo[k].max(v);
            }
        }
        let mut vol = 1.0;
        for k in 0..self.dim {
            if !(hi[k] - lo[k]).is_finite() {
                return None;
            }
            vol *= (hi[k] - lo[k]).max(0.0);
        }
        Some(vol)
    }

    /// `μ(self, other) = max{λ ≥ 0 : λ·self ⊆ other}` for C-sets.
    pub fn minkowski_distance(&self, other: &HPolytope, tol: &Tolerances) -> Result<f64> {
        self.check_dim(other.dim)?;
        if !self.is_cset(tol) || !other.is_cset(tol) {
            return Err(GeometryError::NotCSet);
        }
        let mut mu = f64::INFINITY;
        for j in 0..other.n_rows() {
            let h = self.support(&other.row(j), tol)?;
            if h > 0.0 {
                mu = mu.min(other.b[j] / h);
            }
        }
        Ok(mu.max(0.0))
    }

    /// Solves the square system formed by the given rows held with equality.
    pub fn active_point(&self, rows: &[usize]) -> Option<Vec<f64>> {
        let m = DMatrix::from_fn(rows.len(), self.dim, |i, j| self.a[(rows[i], j)]);
        let b: Vec<f64> = rows.iter().map(|&r| self.b[r]).collect();
        dd::solve(&m, &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn construction_normalises_and_drops_zero_rows() {
        let p = HPolytope::from_rows(2, &[vec![2.0, 0.0], vec![0.0, 0.0]], &[4.0, 1.0]).unwrap();
        assert_eq!(p.n_rows(), 1);
        assert_eq!(p.row(0), vec![1.0, 0.0]);
        assert_eq!(p.offsets(), &[2.0]);
        let e = HPolytope::from_rows(2, &[vec![0.0, 0.0]], &[-1.0]).unwrap();
        assert!(e.is_marked_empty());
        assert!(e.is_empty(&tol()));
    }

    #[test]
    fn support_examples() {
        let t = tol();
        assert!((HPolytope::unit_box(2, 1.0).support(&[1.0, 0.0], &t).unwrap() - 1.0).abs() < 1e-12);
        let w = HPolytope::unit_box(1, 0.01);
        assert!((w.support(&[1.0], &t).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(HPolytope::empty(1).support(&[1.0], &t), Err(GeometryError::EmptySet));
        let half = HPolytope::from_rows(1, &[vec![-1.0]], &[0.0]).unwrap();
        assert_eq!(half.support(&[1.0], &t), Err(GeometryError::Unbounded));
    }

    #[test]
    fn erosion_examples() {
        let t = tol();
        let p = HPolytope::unit_box(2, 1.0);
        let e = p.erode(&HPolytope::unit_box(2, 0.25), &t).unwrap();
        assert!(e.contains_set(&HPolytope::unit_box(2, 0.75), &t).unwrap());
        assert!(HPolytope::unit_box(2, 0.75).contains_set(&e, &t).unwrap());
        let z = p.erode(&p, &t).unwrap();
        assert!(!z.is_empty(&t));
        assert!(z.is_flat(1e-9, &t));
        assert!(z.contains_point(&[0.0, 0.0], &t));
        // Output band [0, 2] robustified against |w| <= 0.01.
        let y = HPolytope::box_bounds(&[0.0], &[2.0]);
        let ey = y.erode(&HPolytope::unit_box(1, 0.01), &t).unwrap();
        let bb = ey.bounding_box(&t).unwrap();
        assert!((bb.lo[0] - 0.01).abs() < 1e-12 && (bb.hi[0] - 1.99).abs() < 1e-12);
    }

    #[test]
    fn minkowski_sum_boxes() {
        let t = tol();
        let s = HPolytope::unit_box(2, 1.0)
            .minkowski_sum(&HPolytope::unit_box(2, 0.5), &t)
            .unwrap();
        let target = HPolytope::unit_box(2, 1.5);
        assert!(s.contains_set(&target, &t).unwrap() && target.contains_set(&s, &t).unwrap());
        let id = HPolytope::unit_box(2, 1.0)
            .minkowski_sum(&HPolytope::point(&[0.0, 0.0]), &t)
            .unwrap();
        assert!(id.contains_set(&HPolytope::unit_box(2, 1.0), &t).unwrap());
        assert!(HPolytope::unit_box(2, 1.0).contains_set(&id, &t).unwrap());
        assert!(matches!(
            HPolytope::unit_box(2, 1.0).minkowski_sum(&HPolytope::unit_box(3, 1.0), &t),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn containment_and_intersection() {
        let t = tol();
        assert!(HPolytope::unit_box(2, 1.0)
            .contains_set(&HPolytope::unit_box(2, 0.5), &t)
            .unwrap());
        let a = HPolytope::box_bounds(&[0.0, 0.0], &[1.0, 1.0]);
        let b = HPolytope::box_bounds(&[2.0, 2.0], &[3.0, 3.0]);
        assert!(a.intersect(&b).unwrap().is_empty(&t));
    }

    #[test]
    fn vertex_counts() {
        let t = tol();
        assert_eq!(HPolytope::box_bounds(&[0.0, 0.0], &[1.0, 1.0]).vertices(&t).unwrap().len(), 4);
        assert_eq!(HPolytope::unit_box(4, 1.0).vertices(&t).unwrap().len(), 16);
    }

    #[test]
    fn affine_maps() {
        let t = tol();
        let p = HPolytope::unit_box(2, 1.0);
        let id = DMatrix::identity(2, 2);
        let img = p.affine_image(&id, &[0.0, 0.0], &t).unwrap();
        assert!(img.contains_set(&p, &t).unwrap() && p.contains_set(&img, &t).unwrap());
        let pre = p.affine_preimage(&(id * 2.0), &[0.0, 0.0]).unwrap();
        let half = HPolytope::unit_box(2, 0.5);
        assert!(pre.contains_set(&half, &t).unwrap() && half.contains_set(&pre, &t).unwrap());
    }

    #[test]
    fn slices() {
        let t = tol();
        let p = HPolytope::unit_box(4, 1.0);
        let s = p.slice(&[2, 3], &[0.0, 0.0]).unwrap();
        let q = HPolytope::unit_box(2, 1.0);
        assert!(s.contains_set(&q, &t).unwrap() && q.contains_set(&s, &t).unwrap());
        assert!(p.slice(&[2, 3], &[2.0, 0.0]).unwrap().is_empty(&t));
    }

    #[test]
    fn volumes() {
        let t = tol();
        assert!((HPolytope::box_bounds(&[0.0; 3], &[1.0; 3]).volume(&t).unwrap() - 1.0).abs() < 1e-12);
        assert!((HPolytope::unit_box(2, 0.5).volume(&t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minkowski_distance_examples() {
        let t = tol();
        let s = HPolytope::unit_box(2, 1.0);
        assert!((s.minkowski_distance(&s, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.scale(2.0).minkowski_distance(&s, &t).unwrap() - 0.5).abs() < 1e-12);
        let not_c = HPolytope::box_bounds(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(s.minkowski_distance(&not_c, &t), Err(GeometryError::NotCSet));
    }

    #[test]
    fn json_format() {
        let p = HPolytope::unit_box(1, 2.0);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"G":[[1.0],[-1.0]],"g":[2.0,2.0]}"#);
        let back: HPolytope = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
