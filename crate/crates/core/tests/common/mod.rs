#![allow(dead_code)]

use std::path::PathBuf;

use cpsafe::geometry::{HPolytope, Tolerances};
use cpsafe::reach::SwitchedSystem;
use cpsafe::scenario::Scenario;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FIXTURES: [&str; 4] = ["sensor1", "sensor2", "actuator", "combined"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("scenarios/twotank_{name}.json"))
}

pub fn fixture(name: &str) -> Scenario {
    Scenario::from_path(fixture_path(name)).unwrap()
}

/// Uniform point of `p` by rejection from its bounding box.
pub fn sample_in(p: &HPolytope, rng: &mut ChaCha8Rng, tol: &Tolerances) -> Vec<f64> {
    let bb = p.bounding_box(tol).unwrap();
    loop {
        let x: Vec<f64> = bb.lo.iter().zip(&bb.hi).map(|(l, h)| rng.gen_range(*l..=*h)).collect();
        if p.contains_point(&x, tol) {
            return x;
        }
    }
}

pub fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if q.iter().any(|v| v.abs() > 1e-3) {
            return q;
        }
    }
}

/// Maximal robust invariant set of the attack-free loop by the textbook
/// recursion `O ← O ∩ A⁻¹(O ⊖ E·H)`.
pub fn mrpi_oracle(sys: &SwitchedSystem, max_iter: usize) -> HPolytope {
    let tol = sys.tol;
    let m = &sys.mode("N").unwrap().mode;
    let h = &sys.constraints.h;
    let mut o = sys.z_set().clone();
    for _ in 0..max_iter {
        // Erode by E·H through the support of H along Eᵀg.
        let rows: Vec<Vec<f64>> = (0..o.n_rows()).map(|j| o.row(j)).collect();
        let offs: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let et: Vec<f64> = (0..m.e.ncols()).map(|c| (0..g.len()).map(|r| g[r] * m.e[(r, c)]).sum()).collect();
                o.offsets()[j] - h.support(&et, &tol).unwrap()
            })
            .collect();
        let eroded = HPolytope::from_rows(o.dim(), &rows, &offs).unwrap();
        let pre = eroded.affine_preimage(&m.a, &vec![0.0; o.dim()]).unwrap();
        let next = o.intersect(&pre).unwrap().remove_redundancy(&tol).unwrap();
        if next.contains_set_within(&o, tol.eps_set, &tol).unwrap() {
            return next;
        }
        o = next;
    }
    panic!("oracle did not converge");
}
