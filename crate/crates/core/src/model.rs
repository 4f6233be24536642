//! Closed-loop plant, observer and detector assembled on the augmented state
//! `z = (x, e)`, where `e = x − x̂` is the estimation error.

use cpsafe_geometry::{GeometryError, HPolytope, Tolerances};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("channel index {index} out of range 1..={total}")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("pair is not controllable")]
    Uncontrollable,
    #[error("{0} has spectral radius {1:.6} ≥ 1")]
    NotSchur(&'static str, f64),
    #[error("{0} is not a C-set")]
    NotCSet(&'static str),
    #[error("augmented constraint set is empty or not a C-set")]
    EmptyConstraintSet,
    #[error("{what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Plant matrices and constraint/disturbance sets in deviation coordinates.
#[derive(Clone, Debug)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub x_set: HPolytope,
    pub u_set: HPolytope,
    pub y_set: HPolytope,
    pub v_set: HPolytope,
    pub w_set: HPolytope,
}

impl PlantModel {
    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn nu(&self) -> usize {
        self.b.ncols()
    }
    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// Checks shapes and C-set assumptions. Returns non-fatal warnings
    /// (controllability/observability rank deficits).
    pub fn check(&self, tol: &Tolerances) -> Result<Vec<String>> {
        let (nx, nu, ny) = (self.nx(), self.nu(), self.ny());
        let dims = [
            ("A columns", nx, self.a.ncols()),
            ("B rows", nx, self.b.nrows()),
            ("C columns", nx, self.c.ncols()),
            ("X dimension", nx, self.x_set.dim()),
            ("U dimension", nu, self.u_set.dim()),
            ("Y dimension", ny, self.y_set.dim()),
            ("V dimension", nx, self.v_set.dim()),
            ("W dimension", ny, self.w_set.dim()),
        ];
        for (what, expected, found) in dims {
            if expected != found {
                return Err(ModelError::Dimension { what, expected, found });
            }
        }
        let sets = [
            ("X", &self.x_set),
            ("U", &self.u_set),
            ("Y", &self.y_set),
            ("V", &self.v_set),
            ("W", &self.w_set),
        ];
        for (name, s) in sets {
            if !s.is_cset(tol) {
                return Err(ModelError::NotCSet(name));
            }
        }
        let mut warnings = Vec::new();
        if rank(&controllability(&self.a, &self.b)) < nx {
            warnings.push("(A_p, B_p) is not controllable".to_string());
        }
        if rank(&controllability(&self.a.transpose(), &self.c.transpose())) < nx {
            warnings.push("(A_p, C_p) is not observable".to_string());
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug)]
pub struct Gains {
    /// State feedback, `u = −K x̂`.
    pub k: DMatrix<f64>,
    /// Observer injection gain.
    pub l: DMatrix<f64>,
}

impl Gains {
    /// Validates shapes and that both closed-loop matrices are Schur.
    pub fn new(plant: &PlantModel, k: DMatrix<f64>, l: DMatrix<f64>) -> Result<Self> {
        if k.shape() != (plant.nu(), plant.nx()) {
            return Err(ModelError::Dimension {
                what: "K shape",
                expected: plant.nu() * plant.nx(),
                found: k.len(),
            });
        }
        if l.shape() != (plant.nx(), plant.ny()) {
            return Err(ModelError::Dimension {
                what: "L shape",
                expected: plant.nx() * plant.ny(),
                found: l.len(),
            });
        }
        let rk = spectral_radius(&(&plant.a - &plant.b * &k));
        if rk >= 1.0 {
            return Err(ModelError::NotSchur("A_p − B_p K", rk));
        }
        let rl = spectral_radius(&(&plant.a - &l * &plant.c));
        if rl >= 1.0 {
            return Err(ModelError::NotSchur("A_p − L C_p", rl));
        }
        Ok(Self { k, l })
    }

    /// Places controller and observer poles (single input, single output).
    pub fn from_poles(plant: &PlantModel, k_poles: &[f64], l_poles: &[f64]) -> Result<Self> {
        let k = ackermann_place(&plant.a, &plant.b, k_poles)?;
        let lt = ackermann_place(&plant.a.transpose(), &plant.c.transpose(), l_poles)?;
        Self::new(plant, k, lt.transpose())
    }
}

/// Attacked channels, as 1-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChannelSelection {
    pub attacked_inputs: Vec<usize>,
    pub attacked_outputs: Vec<usize>,
}

impl ChannelSelection {
    pub fn is_nominal(&self) -> bool {
        self.attacked_inputs.is_empty() && self.attacked_outputs.is_empty()
    }
}

/// One dynamic mode of the closed loop:
/// `z⁺ = A z + B a + E η`, `r = C z + D a + F η`.
#[derive(Clone, Debug)]
pub struct Mode {
    pub label: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub gamma_u: DMatrix<f64>,
    pub gamma_y: DMatrix<f64>,
}

impl Mode {
    pub fn n_attack(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_attack_u(&self) -> usize {
        self.gamma_u.ncols()
    }
    pub fn n_attack_y(&self) -> usize {
        self.gamma_y.ncols()
    }
    pub fn is_nominal(&self) -> bool {
        self.n_attack() == 0
    }

    pub fn step(&self, z: &[f64], a: &[f64], eta: &[f64]) -> Vec<f64> {
        let mut out = mat_vec(&self.a, z);
        add_assign(&mut out, &mat_vec(&self.b, a));
        add_assign(&mut out, &mat_vec(&self.e, eta));
        out
    }

    pub fn residual(&self, z: &[f64], a: &[f64], eta: &[f64]) -> Vec<f64> {
        let mut out = mat_vec(&self.c, z);
        add_assign(&mut out, &mat_vec(&self.d, a));
        add_assign(&mut out, &mat_vec(&self.f, eta));
        out
    }
}

#[derive(Clone, Debug)]
pub struct Detector {
    pub r_set: HPolytope,
}

impl Detector {
    pub fn new(r_set: HPolytope, tol: &Tolerances) -> Result<Self> {
        if !r_set.is_cset(tol) {
            return Err(ModelError::NotCSet("R"));
        }
        Ok(Self { r_set })
    }

    /// True when `r` lies outside the (closed) residual set.
    pub fn alarm(&self, r: &[f64]) -> bool {
        self.r_set.max_violation(r) > 1e-12
    }
}

/// Free-function form of [`Detector::alarm`].
pub fn residual_alarm(detector: &Detector, r: &[f64]) -> bool {
    detector.alarm(r)
}

#[derive(Clone, Debug)]
pub struct AugmentedConstraints {
    /// Admissible augmented states.
    pub z: HPolytope,
    /// Disturbances `η = (v, w)`.
    pub h: HPolytope,
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

pub(crate) fn add_assign(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn controllability(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut w = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        w.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    w
}

fn rank(m: &DMatrix<f64>) -> usize {
    m.clone().svd(false, false).rank(1e-10)
}

/// Selection matrix `total × |selection|` mapping attack coordinates to the
/// 1-based channels in `selection` (sorted ascending).
pub fn build_gamma(selection: &[usize], total: usize) -> Result<DMatrix<f64>> {
    let mut sel = selection.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let mut g = DMatrix::zeros(total, sel.len());
    for (col, &idx) in sel.iter().enumerate() {
        if idx == 0 || idx > total {
            return Err(ModelError::IndexOutOfRange { index: idx, total });
        }
        g[(idx - 1, col)] = 1.0;
    }
    Ok(g)
}

/// Assembles the augmented matrices of one attack mode.
///
/// The input attack enters both the state and the error rows because the
/// estimator is driven by the controller's (uncorrupted) command.
pub fn build_mode(plant: &PlantModel, gains: &Gains, sel: &ChannelSelection, label: &str) -> Result<Mode> {
    let (nx, nu, ny) = (plant.nx(), plant.nu(), plant.ny());
    let gu = build_gamma(&sel.attacked_inputs, nu)?;
    let gy = build_gamma(&sel.attacked_outputs, ny)?;
    let (nau, nay) = (gu.ncols(), gy.ncols());
    let (ap, bp, cp) = (&plant.a, &plant.b, &plant.c);
    let (k, l) = (&gains.k, &gains.l);

    let mut a = DMatrix::zeros(2 * nx, 2 * nx);
    a.view_mut((0, 0), (nx, nx)).copy_from(&(ap - bp * k));
    a.view_mut((0, nx), (nx, nx)).copy_from(&(bp * k));
    a.view_mut((nx, nx), (nx, nx)).copy_from(&(ap - l * cp));

    let mut b = DMatrix::zeros(2 * nx, nau + nay);
    let bu = bp * &gu;
    b.view_mut((0, 0), (nx, nau)).copy_from(&bu);
    b.view_mut((nx, 0), (nx, nau)).copy_from(&bu);
    b.view_mut((nx, nau), (nx, nay)).copy_from(&(-(l * &gy)));

    let mut e = DMatrix::zeros(2 * nx, nx + ny);
    e.view_mut((0, 0), (nx, nx)).fill_with_identity();
    e.view_mut((nx, 0), (nx, nx)).fill_with_identity();
    e.view_mut((nx, nx), (nx, ny)).copy_from(&(-l));

    let mut c = DMatrix::zeros(ny, 2 * nx);
    c.view_mut((0, nx), (ny, nx)).copy_from(cp);
    let mut d = DMatrix::zeros(ny, nau + nay);
    d.view_mut((0, nau), (ny, nay)).copy_from(&gy);
    let mut f = DMatrix::zeros(ny, nx + ny);
    f.view_mut((0, nx), (ny, ny)).fill_with_identity();

    Ok(Mode {
        label: label.to_string(),
        a,
        b,
        e,
        c,
        d,
        f,
        gamma_u: gu,
        gamma_y: gy,
    })
}

/// Ackermann pole placement for a single-input pair: returns `K` (1×n) with
/// `eig(A − bK) = poles`.
pub fn ackermann_place(a: &DMatrix<f64>, b: &DMatrix<f64>, poles: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if b.ncols() != 1 || b.nrows() != n {
        return Err(ModelError::Dimension {
            what: "single-input column",
            expected: n,
            found: b.len(),
        });
    }
    if poles.len() != n {
        return Err(ModelError::Dimension {
            what: "pole count",
            expected: n,
            found: poles.len(),
        });
    }
    let wc = controllability(a, b);
    let wc_inv = wc.try_inverse().ok_or(ModelError::Uncontrollable)?;
    if rank(&wc_inv) < n {
        return Err(ModelError::Uncontrollable);
    }
    // Characteristic polynomial evaluated at A: Π (A − p I).
    let mut phi = DMatrix::identity(n, n);
    for &p in poles {
        phi = &phi * (a - DMatrix::identity(n, n) * p);
    }
    let mut en = DMatrix::zeros(1, n);
    en[(0, n - 1)] = 1.0;
    Ok(en * wc_inv * phi)
}

/// Augmented constraint set and disturbance set.
///
/// `Z` bounds the state, the applied input `−K(x − e)` and the output
/// (robustly against measurement noise), plus `‖e‖∞ ≤ e_max`.
pub fn build_augmented_constraints(
    plant: &PlantModel,
    gains: &Gains,
    e_max: f64,
    tol: &Tolerances,
) -> Result<AugmentedConstraints> {
    let nx = plant.nx();
    let mut x_part = DMatrix::zeros(nx, 2 * nx);
    x_part.view_mut((0, 0), (nx, nx)).fill_with_identity();
    let zeros = vec![0.0; nx];
    let on_x = plant.x_set.affine_preimage(&x_part, &zeros)?;

    // u = −K x + K e.
    let mut u_map = DMatrix::zeros(plant.nu(), 2 * nx);
    u_map.view_mut((0, 0), (plant.nu(), nx)).copy_from(&(-&gains.k));
    u_map.view_mut((0, nx), (plant.nu(), nx)).copy_from(&gains.k);
    let on_u = plant.u_set.affine_preimage(&u_map, &vec![0.0; plant.nu()])?;

    let y_robust = plant.y_set.erode(&plant.w_set, tol)?;
    let y_map = &plant.c * &x_part;
    let on_y = y_robust.affine_preimage(&y_map, &vec![0.0; plant.ny()])?;

    let e_box = HPolytope::unit_box(nx, 1.0)
        .scale(e_max)
        .affine_preimage(
            &{
                let mut m = DMatrix::zeros(nx, 2 * nx);
                m.view_mut((0, nx), (nx, nx)).fill_with_identity();
                m
            },
            &zeros,
        )?;

    let z = on_x.intersect(&on_u)?.intersect(&on_y)?.intersect(&e_box)?;
    let z = z.remove_redundancy(tol)?;
    if !z.is_cset(tol) {
        return Err(ModelError::EmptyConstraintSet);
    }
    let h = plant.v_set.cartesian(&plant.w_set);
    Ok(AugmentedConstraints { z, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tank() -> PlantModel {
        PlantModel {
            a: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.8]),
            b: DMatrix::from_row_slice(2, 1, &[0.1, 0.0]),
            c: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            x_set: HPolytope::unit_box(2, 1.0),
            u_set: HPolytope::unit_box(1, 1.0),
            y_set: HPolytope::unit_box(1, 1.0),
            v_set: HPolytope::unit_box(2, 0.01),
            w_set: HPolytope::unit_box(1, 0.01),
        }
    }

    fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(build_gamma(&[2], 2).unwrap(), DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(build_gamma(&[], 2).unwrap().ncols(), 0);
        assert_eq!(
            build_gamma(&[1, 3], 3).unwrap(),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        );
        assert!(matches!(build_gamma(&[3], 2), Err(ModelError::IndexOutOfRange { .. })));
    }

    #[test]
    fn two_tank_poles() {
        let p = two_tank();
        let g = Gains::from_poles(&p, &[0.7, 0.8], &[0.86, 0.001]).unwrap();
        let ek = sorted_eigs(&(&p.a - &p.b * &g.k));
        assert!((ek[0] - 0.7).abs() < 1e-8 && (ek[1] - 0.8).abs() < 1e-8);
        let el = sorted_eigs(&(&p.a - &g.l * &p.c));
        assert!((el[0] - 0.001).abs() < 1e-8 && (el[1] - 0.86).abs() < 1e-8);
    }

    #[test]
    fn placing_existing_spectrum_keeps_it() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -0.06, 0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let eigs = sorted_eigs(&a);
        let k = ackermann_place(&a, &b, &eigs).unwrap();
        assert!(k.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn uncontrollable_pair_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.4]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(ackermann_place(&a, &b, &[0.1, 0.2]), Err(ModelError::Uncontrollable));
    }

    #[test]
    fn nominal_mode_has_no_attack_columns() {
        let p = two_tank();
        let g = Gains::from_poles(&p, &[0.7, 0.8], &[0.86, 0.001]).unwrap();
        let m = build_mode(&p, &g, &ChannelSelection::default(), "N").unwrap();
        assert_eq!(m.b.ncols(), 0);
        assert_eq!(m.d.ncols(), 0);
        assert!(spectral_radius(&m.a) < 1.0);
    }

    #[test]
    fn constraint_set_rows() {
        let tol = Tolerances::default();
        let p = two_tank();
        let g = Gains::from_poles(&p, &[0.7, 0.8], &[0.86, 0.001]).unwrap();
        let c = build_augmented_constraints(&p, &g, 0.5, &tol).unwrap();
        assert!((c.z.support(&[1.0, 0.0, 0.0, 0.0], &tol).unwrap() - 1.0).abs() < 1e-9);
        assert!((c.z.support(&[0.0, 1.0, 0.0, 0.0], &tol).unwrap() - 0.99).abs() < 1e-9);
        assert!((c.z.support(&[0.0, 0.0, 0.0, 1.0], &tol).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(c.h.dim(), 3);
    }

    #[test]
    fn alarm_convention() {
        let tol = Tolerances::default();
        let d = Detector::new(HPolytope::unit_box(1, 0.01), &tol).unwrap();
        assert!(!residual_alarm(&d, &[0.0]));
        assert!(residual_alarm(&d, &[0.02]));
        assert!(!residual_alarm(&d, &[0.01]));
    }
}
