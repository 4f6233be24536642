//! State-dependent sets of stealthy attacks and their worst-case functionals.
//!
//! For a mode with attack vector `a = (a_u, a_y)`, the admissible attacks at
//! augmented state `z` form the polytope `A(z) = {a : G_a a ≤ h0 + H z}`:
//! corrupted inputs stay in `U`, corrupted outputs stay in the robust output
//! set, and the residual stays inside the detector set for every noise value.

use cpsafe_geometry::{lp_solve, GeometryError, HPolytope, LpStatus, Sense, Tolerances};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{mat_vec, Detector, Gains, Mode, PlantModel};

/// Default cap on enumerated dual vertices (and extreme rays).
pub const DEFAULT_DUAL_CAP: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StealthError {
    #[error("worst-case attack term is unbounded wherever attacks are feasible")]
    DualInfeasible,
    #[error("more than {0} dual vertices")]
    EnumerationOverflow(usize),
    #[error("{what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = StealthError> = std::result::Result<T, E>;

/// `A(z) = {a : G_a a ≤ h0 + H z}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPolytope {
    #[serde(rename = "Ga", with = "rows")]
    pub ga: DMatrix<f64>,
    pub h0: Vec<f64>,
    #[serde(rename = "H", with = "rows")]
    pub h: DMatrix<f64>,
}

mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Shaped {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Shaped {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let sh = Shaped::deserialize(d)?;
        if sh.data.len() != sh.rows || sh.data.iter().any(|r| r.len() != sh.cols) {
            return Err(serde::de::Error::custom("matrix shape does not match data"));
        }
        Ok(DMatrix::from_fn(sh.rows, sh.cols, |i, j| sh.data[i][j]))
    }
}

impl ParamPolytope {
    /// The trivial set over `n_a = 0` attack coordinates: `A(z) = {()}`.
    pub fn trivial(n_z: usize) -> Self {
        Self {
            ga: DMatrix::zeros(0, 0),
            h0: Vec::new(),
            h: DMatrix::zeros(0, n_z),
        }
    }

    pub fn n_attack(&self) -> usize {
        self.ga.ncols()
    }

    pub fn n_param(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.h0.len()
    }

    /// Right-hand side `h0 + H z`.
    pub fn rhs(&self, z: &[f64]) -> Vec<f64> {
        let hz = mat_vec(&self.h, z);
        self.h0.iter().zip(hz).map(|(a, b)| a + b).collect()
    }

    /// `A(z)` as a polytope in attack space (possibly empty).
    pub fn eval_at(&self, z: &[f64]) -> Result<HPolytope> {
        if z.len() != self.n_param() {
            return Err(StealthError::Dimension {
                what: "parameter",
                expected: self.n_param(),
                found: z.len(),
            });
        }
        Ok(HPolytope::new(self.ga.clone(), self.rhs(z))?)
    }

    /// Whether `a ∈ A(z)` within `eps`.
    pub fn contains(&self, z: &[f64], a: &[f64], eps: f64) -> bool {
        let rhs = self.rhs(z);
        let ga = mat_vec(&self.ga, a);
        ga.iter().zip(&rhs).all(|(l, r)| *l <= r + eps)
    }

    /// Closed-form interval for one attack coordinate, `None` if empty.
    pub fn interval_at(&self, z: &[f64]) -> Option<(f64, f64)> {
        debug_assert_eq!(self.n_attack(), 1);
        let rhs = self.rhs(z);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (i, r) in rhs.iter().enumerate() {
            let g = self.ga[(i, 0)];
            if g > 1e-14 {
                hi = hi.min(r / g);
            } else if g < -1e-14 {
                lo = lo.max(r / g);
            } else if *r < 0.0 {
                return None;
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Stacks rows; both sets must act on the same attack space.
    pub fn intersect(&self, other: &ParamPolytope) -> Result<ParamPolytope> {
        if self.n_attack() != other.n_attack() || self.n_param() != other.n_param() {
            return Err(StealthError::Dimension {
                what: "stacked set",
                expected: self.n_attack(),
                found: other.n_attack(),
            });
        }
        Ok(Self {
            ga: vstack(&self.ga, &other.ga),
            h0: [self.h0.clone(), other.h0.clone()].concat(),
            h: vstack(&self.h, &other.h),
        })
    }

    /// Adds `|a_k| ≤ bound` rows for each coordinate with a bound.
    pub fn with_box(&self, bounds: &[Option<f64>]) -> Result<ParamPolytope> {
        let n = self.n_attack();
        if bounds.len() != n {
            return Err(StealthError::Dimension {
                what: "attack bounds",
                expected: n,
                found: bounds.len(),
            });
        }
        let mut rows = Vec::new();
        let mut h0 = Vec::new();
        for (k, b) in bounds.iter().enumerate() {
            if let Some(b) = b {
                let mut r = vec![0.0; n];
                r[k] = 1.0;
                rows.push(r.clone());
                h0.push(*b);
                r[k] = -1.0;
                rows.push(r);
                h0.push(*b);
            }
        }
        let extra = Self {
            ga: DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]),
            h0,
            h: DMatrix::zeros(rows.len(), self.n_param()),
        };
        self.intersect(&extra)
    }
}

fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = a.ncols().max(b.ncols());
    DMatrix::from_fn(a.nrows() + b.nrows(), cols, |i, j| {
        if i < a.nrows() {
            a[(i, j)]
        } else {
            b[(i - a.nrows(), j)]
        }
    })
}

/// Drops rows whose attack part is zero (they only restrict `z`, which the
/// constraint set already does) and sets with no attack coordinates.
fn strip(p: ParamPolytope) -> ParamPolytope {
    if p.n_attack() == 0 {
        return ParamPolytope {
            ga: DMatrix::zeros(0, 0),
            h0: Vec::new(),
            h: DMatrix::zeros(0, p.n_param()),
        };
    }
    let keep: Vec<usize> = (0..p.n_rows())
        .filter(|&i| p.ga.row(i).iter().any(|v| v.abs() > 1e-14))
        .collect();
    ParamPolytope {
        ga: DMatrix::from_fn(keep.len(), p.n_attack(), |i, j| p.ga[(keep[i], j)]),
        h0: keep.iter().map(|&i| p.h0[i]).collect(),
        h: DMatrix::from_fn(keep.len(), p.n_param(), |i, j| p.h[(keep[i], j)]),
    }
}

/// Input stealth: `u + Γ^u a_u ∈ U` with `u = −K(x − e)`, plus `|a_u| ≤ bound`.
pub fn build_input_set(
    gamma_u: &DMatrix<f64>,
    u_set: &HPolytope,
    k: &DMatrix<f64>,
    bounds: &[Option<f64>],
) -> Result<ParamPolytope> {
    let nx = k.ncols();
    let gu = u_set.normals();
    // G_u K [I, −I]
    let mut kk = DMatrix::zeros(k.nrows(), 2 * nx);
    kk.view_mut((0, 0), (k.nrows(), nx)).copy_from(k);
    kk.view_mut((0, nx), (k.nrows(), nx)).copy_from(&(-k));
    let p = ParamPolytope {
        ga: gu * gamma_u,
        h0: u_set.offsets().to_vec(),
        h: gu * kk,
    };
    Ok(strip(p.with_box(bounds)?))
}

/// Output stealth: `C_p x + w + Γ^y a_y ∈ Y` for every `w ∈ W`, plus bounds.
pub fn build_output_set(
    gamma_y: &DMatrix<f64>,
    y_set: &HPolytope,
    w_set: &HPolytope,
    c_p: &DMatrix<f64>,
    bounds: &[Option<f64>],
    tol: &Tolerances,
) -> Result<ParamPolytope> {
    let nx = c_p.ncols();
    let gy = y_set.normals();
    let mut h0 = y_set.offsets().to_vec();
    for (j, hj) in h0.iter_mut().enumerate() {
        *hj -= w_set.support(&y_set.row(j), tol)?;
    }
    let mut cx = DMatrix::zeros(c_p.nrows(), 2 * nx);
    cx.view_mut((0, 0), (c_p.nrows(), nx)).copy_from(c_p);
    let p = ParamPolytope {
        ga: gy * gamma_y,
        h0,
        h: -(gy * cx),
    };
    Ok(strip(p.with_box(bounds)?))
}

/// Residual stealth: `C z + Γ^y a_y + w ∈ R` for every `w ∈ W`.
pub fn build_residual_set(
    gamma_y: &DMatrix<f64>,
    r_set: &HPolytope,
    w_set: &HPolytope,
    c: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<ParamPolytope> {
    let gr = r_set.normals();
    let mut h0 = r_set.offsets().to_vec();
    for (j, hj) in h0.iter_mut().enumerate() {
        *hj -= w_set.support(&r_set.row(j), tol)?;
    }
    Ok(strip(ParamPolytope {
        ga: gr * gamma_y,
        h0,
        h: -(gr * c),
    }))
}

/// `A^u × (A^y ∩ A^r)` over `a = (a_u, a_y)`.
pub fn product_set(au: &ParamPolytope, ay: &ParamPolytope, ar: &ParamPolytope) -> Result<ParamPolytope> {
    let n_z = au.n_param().max(ay.n_param()).max(ar.n_param());
    let out_part = if ay.n_attack() == 0 && ar.n_attack() == 0 {
        ParamPolytope::trivial(n_z)
    } else if ay.n_attack() == 0 {
        ar.clone()
    } else if ar.n_attack() == 0 {
        ay.clone()
    } else {
        ay.intersect(ar)?
    };
    let (nu, ny) = (au.n_attack(), out_part.n_attack());
    let (mu, my) = (au.n_rows(), out_part.n_rows());
    let ga = DMatrix::from_fn(mu + my, nu + ny, |i, j| match (i < mu, j < nu) {
        (true, true) => au.ga[(i, j)],
        (false, false) => out_part.ga[(i - mu, j - nu)],
        _ => 0.0,
    });
    let h = DMatrix::from_fn(mu + my, n_z, |i, j| {
        if i < mu {
            au.h[(i, j)]
        } else {
            out_part.h[(i - mu, j)]
        }
    });
    Ok(ParamPolytope {
        ga,
        h0: [au.h0.clone(), out_part.h0.clone()].concat(),
        h,
    })
}

/// The stealthy attack set of `mode`.
pub fn mode_attack_set(
    plant: &PlantModel,
    gains: &Gains,
    detector: &Detector,
    mode: &Mode,
    input_bounds: &[Option<f64>],
    output_bounds: &[Option<f64>],
    tol: &Tolerances,
) -> Result<ParamPolytope> {
    let au = build_input_set(&mode.gamma_u, &plant.u_set, &gains.k, input_bounds)?;
    let ay = build_output_set(&mode.gamma_y, &plant.y_set, &plant.w_set, &plant.c, output_bounds, tol)?;
    let ar = build_residual_set(&mode.gamma_y, &detector.r_set, &plant.w_set, &mode.c, tol)?;
    product_set(&au, &ay, &ar)
}

/// An affine lower envelope `z ↦ min_k (c_k·z + d_k)` of a worst-case
/// attack term, with the region where no attack exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustifiedRow {
    /// Affine forms `(c_k, d_k)`, one per dual vertex.
    pub forms: Vec<(Vec<f64>, f64)>,
    /// `(p, s)` pairs: `A(z) = ∅` iff `p·z < s` for some pair.
    pub infeasible: Vec<(Vec<f64>, f64)>,
}

impl RobustifiedRow {
    /// `max_{a∈A(z)} q·a`, or `None` when `A(z)` is empty.
    pub fn value(&self, z: &[f64]) -> Option<f64> {
        if self.is_infeasible_at(z, 0.0) {
            return None;
        }
        Some(
            self.forms
                .iter()
                .map(|(c, d)| dot(c, z) + d)
                .fold(f64::INFINITY, f64::min),
        )
    }

    /// True when some infeasibility certificate holds with margin `eps`.
    pub fn is_infeasible_at(&self, z: &[f64], eps: f64) -> bool {
        self.infeasible.iter().any(|(p, s)| dot(p, z) < s - eps)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Iterates over `k`-subsets of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if k > n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx)?;
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return Ok(());
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Basic feasible solutions of `{y ≥ 0 : M y = rhs}` with `M` of size
/// `k × m` and full row rank `k`.
fn basic_solutions(m: &DMatrix<f64>, rhs: &[f64], cap: usize) -> Result<Vec<Vec<f64>>> {
    let (k, n) = m.shape();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for_each_subset(n, k, |basis| {
        let sub = DMatrix::from_fn(k, k, |i, j| m[(i, basis[j])]);
        let lu = sub.lu();
        if lu.determinant().abs() < 1e-12 {
            return Ok(());
        }
        let Some(y_b) = lu.solve(&nalgebra::DVector::from_column_slice(rhs)) else {
            return Ok(());
        };
        if y_b.iter().any(|v| *v < -1e-10) {
            return Ok(());
        }
        let mut y = vec![0.0; n];
        for (j, &b) in basis.iter().enumerate() {
            y[b] = y_b[j].max(0.0);
        }
        if !out.iter().any(|o| o.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-10)) {
            if out.len() >= cap {
                return Err(StealthError::EnumerationOverflow(cap));
            }
            out.push(y);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Worst-case value of `q·a` over `A(z)` as a function of `z`.
///
/// By LP duality `max_{a∈A(z)} q·a = min_k y_k·(h0 + Hz)` over the vertices
/// `y_k` of `{y ≥ 0 : G_aᵀ y = q}` whenever `A(z)` is nonempty; emptiness is
/// certified by the extreme rays of `{r ≥ 0 : G_aᵀ r = 0}`.
pub fn robustify(q: &[f64], set: &ParamPolytope, cap: usize) -> Result<RobustifiedRow> {
    let n_a = set.n_attack();
    let n_z = set.n_param();
    if q.len() != n_a {
        return Err(StealthError::Dimension {
            what: "direction",
            expected: n_a,
            found: q.len(),
        });
    }
    let m = set.n_rows();
    if n_a == 0 || m == 0 {
        return if n_a == 0 || q.iter().all(|v| v.abs() < 1e-14) {
            Ok(RobustifiedRow {
                forms: vec![(vec![0.0; n_z], 0.0)],
                infeasible: Vec::new(),
            })
        } else {
            Err(StealthError::DualInfeasible)
        };
    }
    let gat = set.ga.transpose();
    // Drop dependent equations so the basis size matches the rank.
    let rank = gat.clone().svd(false, false).rank(1e-10);
    if rank < n_a {
        // A(z) contains a line; bounded only if q is orthogonal to it.
        let sol = lp_solve(q, &set.ga, &vec![1.0; m], Sense::Max)?;
        if sol.status == LpStatus::Unbounded {
            return Err(StealthError::DualInfeasible);
        }
    }
    let (eq_mat, eq_rhs) = independent_rows(&gat, q, rank);
    let duals = basic_solutions(&eq_mat, &eq_rhs, cap)?;
    if duals.is_empty() {
        return Err(StealthError::DualInfeasible);
    }
    let forms = duals
        .iter()
        .map(|y| {
            let c: Vec<f64> = (0..n_z).map(|j| (0..m).map(|i| y[i] * set.h[(i, j)]).sum()).collect();
            (c, dot(y, &set.h0))
        })
        .collect();

    let mut ray_mat = DMatrix::zeros(rank + 1, m);
    ray_mat.view_mut((0, 0), (rank, m)).copy_from(&eq_mat);
    ray_mat.row_mut(rank).fill(1.0);
    let mut ray_rhs = vec![0.0; rank + 1];
    ray_rhs[rank] = 1.0;
    let rays = basic_solutions(&ray_mat, &ray_rhs, cap)?;
    let infeasible = rays
        .iter()
        .map(|r| {
            let p: Vec<f64> = (0..n_z).map(|j| (0..m).map(|i| r[i] * set.h[(i, j)]).sum()).collect();
            (p, -dot(r, &set.h0))
        })
        .collect();
    Ok(RobustifiedRow { forms, infeasible })
}

/// Picks `rank` linearly independent rows of `[M | rhs]`.
fn independent_rows(m: &DMatrix<f64>, rhs: &[f64], rank: usize) -> (DMatrix<f64>, Vec<f64>) {
    if rank == m.nrows() {
        return (m.clone(), rhs.to_vec());
    }
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..m.nrows() {
        let mut trial = chosen.clone();
        trial.push(i);
        let sub = DMatrix::from_fn(trial.len(), m.ncols(), |a, b| m[(trial[a], b)]);
        if sub.svd(false, false).rank(1e-10) == trial.len() {
            chosen = trial;
        }
        if chosen.len() == rank {
            break;
        }
    }
    (
        DMatrix::from_fn(rank, m.ncols(), |a, b| m[(chosen[a], b)]),
        chosen.iter().map(|&i| rhs[i]).collect(),
    )
}

/// Pointwise worst case by a direct LP, `None` when `A(z)` is empty.
pub fn pointwise_max(q: &[f64], set: &ParamPolytope, z: &[f64]) -> Result<Option<f64>> {
    if set.n_attack() == 0 {
        return Ok(Some(0.0));
    }
    let sol = lp_solve(q, &set.ga, &set.rhs(z), Sense::Max)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.value)),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(StealthError::DualInfeasible),
    }
}

/// Vertices of `A(z)`, empty when the set is empty.
pub fn attack_vertices(set: &ParamPolytope, z: &[f64], tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    match set.n_attack() {
        0 => Ok(vec![Vec::new()]),
        1 => Ok(match set.interval_at(z) {
            None => Vec::new(),
            Some((lo, hi)) if hi - lo <= 1e-15 => vec![vec![0.5 * (lo + hi)]],
            Some((lo, hi)) => vec![vec![lo], vec![hi]],
        }),
        _ => {
            let p = set.eval_at(z)?;
            match p.vertices(tol) {
                Ok(v) => Ok(v.points().to_vec()),
                Err(GeometryError::EmptySet) => Ok(Vec::new()),
                Err(e) => Err(e.into()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerate_all() {
        let mut n = 0;
        for_each_subset(5, 2, |_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 10);
        let mut m = 0;
        for_each_subset(3, 3, |_| {
            m += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(m, 1);
    }

    #[test]
    fn constant_box_gives_single_form() {
        let set = ParamPolytope {
            ga: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            h0: vec![0.3, 0.3],
            h: DMatrix::zeros(2, 2),
        };
        let row = robustify(&[1.0], &set, 16).unwrap();
        assert_eq!(row.forms.len(), 1);
        assert!((row.value(&[0.5, -0.2]).unwrap() - 0.3).abs() < 1e-12);
        let zero = robustify(&[0.0], &set, 16).unwrap();
        assert_eq!(zero.value(&[1.0, 1.0]), Some(0.0));
    }

    #[test]
    fn empty_interval_is_certified() {
        // a ≤ z, −a ≤ −1  →  empty when z < 1.
        let set = ParamPolytope {
            ga: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            h0: vec![0.0, -1.0],
            h: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        };
        let row = robustify(&[1.0], &set, 16).unwrap();
        assert_eq!(row.value(&[0.5]), None);
        assert!((row.value(&[2.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(set.interval_at(&[0.5]), None);
        assert_eq!(set.interval_at(&[2.0]), Some((1.0, 2.0)));
    }

    #[test]
    fn unbounded_direction_is_rejected() {
        let set = ParamPolytope {
            ga: DMatrix::from_row_slice(1, 1, &[1.0]),
            h0: vec![1.0],
            h: DMatrix::zeros(1, 1),
        };
        assert_eq!(robustify(&[-1.0], &set, 16), Err(StealthError::DualInfeasible));
    }
}
