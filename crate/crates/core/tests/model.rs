mod common;

use common::fixture;
use cpsafe::model::spectral_radius;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Plant, observer and controller stepped separately agree with the lifted
/// `z = (x, e)` dynamics and residual in every mode.
#[test]
fn lifted_dynamics_match_the_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sc = fixture("combined");
    let plant = sc.plant().unwrap();
    let gains = sc.gains(&plant).unwrap();
    let sys = sc.build().unwrap();
    let (a, b, c) = (&plant.a, &plant.b, &plant.c);
    let (k, l) = (&gains.k, &gains.l);
    let nx = a.nrows();
    for md in sys.modes.values() {
        let m = &md.mode;
        let (nau, nay) = (m.gamma_u.ncols(), m.gamma_y.ncols());
        for _ in 0..200 {
            let x = rand_vec(nx, &mut rng);
            let xhat = rand_vec(nx, &mut rng);
            let au = rand_vec(nau, &mut rng);
            let ay = rand_vec(nay, &mut rng);
            let v = rand_vec(nx, &mut rng);
            let w = rand_vec(c.nrows(), &mut rng);

            let u = -(k * &xhat);
            let x_next = a * &x + b * (&u + &m.gamma_u * &au) + &v;
            let y_recv = c * &x + &w + &m.gamma_y * &ay;
            let r = &y_recv - c * &xhat;
            let xhat_next = a * &xhat + b * &u + l * &r;

            let e = &x - &xhat;
            let z: Vec<f64> = x.iter().chain(e.iter()).copied().collect();
            let att: Vec<f64> = au.iter().chain(ay.iter()).copied().collect();
            let eta: Vec<f64> = v.iter().chain(w.iter()).copied().collect();
            let z_next = m.step(&z, &att, &eta);
            let e_next = &x_next - &xhat_next;
            for i in 0..nx {
                assert!((z_next[i] - x_next[i]).abs() < 1e-12);
                assert!((z_next[nx + i] - e_next[i]).abs() < 1e-12);
            }
            let r_lift = m.residual(&z, &att, &eta);
            for (p, q) in r_lift.iter().zip(r.iter()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }
}

fn char_poly_2x2(m: &DMatrix<f64>) -> (f64, f64) {
    (m.trace(), m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)])
}

#[test]
fn placed_poles_are_the_requested_ones() {
    for name in ["sensor1", "sensor2"] {
        let sc = fixture(name);
        let plant = sc.plant().unwrap();
        let gains = sc.gains(&plant).unwrap();
        let (tr, det) = char_poly_2x2(&(&plant.a - &plant.b * &gains.k));
        assert!((tr - 1.5).abs() < 1e-10 && (det - 0.56).abs() < 1e-10);
        let (tr, det) = char_poly_2x2(&(&plant.a - &gains.l * &plant.c));
        assert!((tr - 0.861).abs() < 1e-10 && (det - 0.00086).abs() < 1e-10);
    }
}

#[test]
fn two_tank_loop_is_stable() {
    let sc = fixture("sensor2");
    let plant = sc.plant().unwrap();
    // Eigenvalues 0.85 ± √0.0125.
    assert!((spectral_radius(&plant.a) - (0.85 + 0.0125f64.sqrt())).abs() < 1e-12);
    let sys = sc.build().unwrap();
    let nominal = sys.mode("N").unwrap();
    assert!(spectral_radius(&nominal.mode.a) < 1.0);
}

#[test]
fn operating_point_shift_centres_the_constraints() {
    let plant = fixture("sensor2").plant().unwrap();
    let tol = cpsafe::geometry::Tolerances::default();
    // X = [1,3]×[0,2] around x* = (2,1) becomes the unit box.
    let bb = plant.x_set.bounding_box(&tol).unwrap();
    for k in 0..2 {
        assert!((bb.lo[k] + 1.0).abs() < 1e-12 && (bb.hi[k] - 1.0).abs() < 1e-12);
    }
    let ub = plant.u_set.bounding_box(&tol).unwrap();
    assert!((ub.lo[0] + 1.0).abs() < 1e-12 && (ub.hi[0] - 1.0).abs() < 1e-12);
}
