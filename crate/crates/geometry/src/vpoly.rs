use nalgebra::DMatrix;

use crate::hpoly::HPolytope;
use crate::{GeometryError, Result, Tolerances};

/// Relative threshold below which singular values count as zero.
const RANK_EPS: f64 = 1e-9;

/// Finite point set standing for its convex hull.
#[derive(Clone, Debug, PartialEq)]
pub struct VPolytope {
    dim: usize,
    points: Vec<Vec<f64>>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl VPolytope {
    /// Wraps the points, merging near-duplicates.
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Self {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            debug_assert_eq!(p.len(), dim);
            let scale = 1.0 + p.iter().map(|v| v * v).sum::<f64>();
            if !out.iter().any(|o| dist2(o, &p) <= 1e-22 * scale) {
                out.push(p);
            }
        }
        Self { dim, points: out }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn centroid(&self) -> Vec<f64> {
        let k = self.points.len().max(1) as f64;
        (0..self.dim)
            .map(|i| self.points.iter().map(|p| p[i]).sum::<f64>() / k)
            .collect()
    }

    /// `{M·p + t}` for every point.
    pub fn affine_map(&self, m: &DMatrix<f64>, t: &[f64]) -> Result<VPolytope> {
        if m.ncols() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: m.ncols(),
            });
        }
        let pts = self
            .points
            .iter()
            .map(|p| {
                (0..m.nrows())
                    .map(|i| t[i] + (0..self.dim).map(|k| m[(i, k)] * p[k]).sum::<f64>())
                    .collect()
            })
            .collect();
        Ok(VPolytope::new(m.nrows(), pts))
    }

    pub fn minkowski_sum(&self, other: &VPolytope) -> Result<VPolytope> {
        if other.dim != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut pts = Vec::with_capacity(self.len() * other.len());
        for p in &self.points {
            for q in &other.points {
                pts.push(p.iter().zip(q).map(|(a, b)| a + b).collect());
            }
        }
        Ok(VPolytope::new(self.dim, pts))
    }

    /// Orthonormal basis of the affine hull directions and its complement.
    fn affine_frame(&self, c: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim;
        let k = self.points.len();
        let centred = DMatrix::from_fn(k, n, |i, j| self.points[i][j] - c[j]);
        let svd = centred.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let scale = smax.max(1e-300);
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > RANK_EPS * scale.max(1.0) && **s > 1e-12)
            .count();
        // Singular values come sorted in decreasing order.
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let span = DMatrix::from_fn(n, rank, |i, j| v_t[(idx[j], i)]);
        // Complete to a basis of R^n.
        let full = span.clone().qr();
        let mut complement_cols = Vec::new();
        if rank < n {
            let mut q = DMatrix::<f64>::identity(n, n);
            if rank > 0 {
                let qm = full.q();
                let proj = &qm * qm.transpose();
                q -= proj;
            }
            let svd2 = q.svd(true, false);
            let u = svd2.u.expect("requested left singular vectors");
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| svd2.singular_values[b].total_cmp(&svd2.singular_values[a]));
            for &j in order.iter().take(n - rank) {
                complement_cols.push(u.column(j).iter().copied().collect::<Vec<f64>>());
            }
        }
        let comp = DMatrix::from_fn(n, complement_cols.len(), |i, j| complement_cols[j][i]);
        (span, comp)
    }

    /// Half-space form of the convex hull.
    pub fn hull(&self, tol: &Tolerances) -> Result<HPolytope> {
        if self.points.is_empty() {
            return Ok(HPolytope::empty(self.dim));
        }
        let c = self.centroid();
        if self.points.len() == 1 {
            return Ok(HPolytope::point(&c));
        }
        let (span, comp) = self.affine_frame(&c);
        let r = span.ncols();
        if r == 0 {
            return Ok(HPolytope::point(&c));
        }
        let coords: Vec<Vec<f64>> = self
            .points
            .iter()
            .map(|p| {
                (0..r)
                    .map(|j| (0..self.dim).map(|i| span[(i, j)] * (p[i] - c[i])).sum())
                    .collect()
            })
            .collect();
        let (facets, offs) = full_dim_hull(r, &coords, tol)?;

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for (f, off) in facets.iter().zip(&offs) {
            let row: Vec<f64> = (0..self.dim)
                .map(|i| (0..r).map(|j| f[j] * span[(i, j)]).sum())
                .collect();
            let shift: f64 = row.iter().zip(&c).map(|(a, x)| a * x).sum();
            rows.push(row);
            b.push(off + shift);
        }
        for j in 0..comp.ncols() {
            let n: Vec<f64> = comp.column(j).iter().copied().collect();
            let s: f64 = n.iter().zip(&c).map(|(a, x)| a * x).sum();
            rows.push(n.clone());
            b.push(s);
            rows.push(n.iter().map(|v| -v).collect());
            b.push(-s);
        }
        HPolytope::from_rows(self.dim, &rows, &b)
    }

    /// Exact volume of the hull (zero when not full-dimensional).
    pub fn volume(&self, tol: &Tolerances) -> Result<f64> {
        crate::volume::vertex_volume(self.dim, &self.points, tol)
    }
}

/// Facets `f·y ≤ off` of the hull of points spanning `R^r`, through the polar
/// set around the centroid.
pub(crate) fn full_dim_hull(r: usize, pts: &[Vec<f64>], tol: &Tolerances) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let k = pts.len() as f64;
    let c: Vec<f64> = (0..r).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / k).collect();
    if r == 1 {
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return Ok((vec![vec![1.0], vec![-1.0]], vec![hi, -lo]));
    }
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| p.iter().zip(&c).map(|(a, b)| a - b).collect())
        .collect();
    let polar = HPolytope::from_rows(r, &rows, &vec![1.0; rows.len()])?;
    let ys = polar.vertices(tol)?;
    let mut facets = Vec::with_capacity(ys.len());
    let mut offs = Vec::with_capacity(ys.len());
    for y in ys.points() {
        let shift: f64 = y.iter().zip(&c).map(|(a, b)| a * b).sum();
        facets.push(y.clone());
        offs.push(1.0 + shift);
    }
    Ok((facets, offs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_point() {
        let tol = Tolerances::default();
        let v = VPolytope::new(
            2,
            vec![
                vec![1.0, 1.0],
                vec![-1.0, 1.0],
                vec![1.0, -1.0],
                vec![-1.0, -1.0],
                vec![0.2, 0.1],
            ],
        );
        let h = v.hull(&tol).unwrap();
        assert_eq!(h.n_rows(), 4);
        let b = HPolytope::unit_box(2, 1.0);
        assert!(h.contains_set(&b, &tol).unwrap() && b.contains_set(&h, &tol).unwrap());
    }

    #[test]
    fn hull_of_segment_in_plane() {
        let tol = Tolerances::default();
        let v = VPolytope::new(2, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let h = v.hull(&tol).unwrap();
        assert!(h.contains_point(&[0.5, 0.5], &tol));
        assert!(!h.contains_point(&[0.5, 0.6], &tol));
        assert!(!h.contains_point(&[1.1, 1.1], &tol));
    }
}
