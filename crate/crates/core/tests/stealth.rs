mod common;

use common::{fixture, random_direction, sample_in, FIXTURES};
use cpsafe::attack_graph::ChannelKind;
use cpsafe::geometry::{lp_solve, LpStatus, Sense, Tolerances};
use cpsafe::reach::SwitchedSystem;
use cpsafe::stealth::{robustify, ParamPolytope, DEFAULT_DUAL_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A state of `Z` with the estimation error shrunk by a random factor, so
/// that degenerate stealth sets are nonempty often enough.
fn state(sys: &SwitchedSystem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let z = sample_in(sys.z_set(), rng, &sys.tol);
    let nx = z.len() / 2;
    let s = [1.0, 0.1, 0.01, 0.0][rng.gen_range(0..4)];
    z.iter().enumerate().map(|(i, v)| if i < nx { *v } else { v * s }).collect()
}

fn lp_max(set: &ParamPolytope, q: &[f64], z: &[f64]) -> Option<f64> {
    let sol = lp_solve(q, &set.ga, &set.rhs(z), Sense::Max).unwrap();
    match sol.status {
        LpStatus::Optimal => Some(sol.value),
        LpStatus::Infeasible => None,
        LpStatus::Unbounded => panic!("stealth set unbounded at {z:?}"),
    }
}

#[test]
fn worst_case_envelope_matches_pointwise_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in FIXTURES {
        let sys = fixture(name).build().unwrap();
        let z_set = sys.z_set().clone();
        for (label, md) in &sys.modes {
            let set = &md.attack;
            if set.n_attack() == 0 {
                continue;
            }
            // Directions of the backward map (rows of Z through B) and random ones.
            let mut dirs: Vec<Vec<f64>> = (0..z_set.n_rows())
                .map(|j| {
                    let g = z_set.row(j);
                    (0..md.mode.b.ncols())
                        .map(|c| (0..g.len()).map(|r| g[r] * md.mode.b[(r, c)]).sum())
                        .collect()
                })
                .collect();
            dirs.push(random_direction(set.n_attack(), &mut rng));
            dirs.push(vec![0.0; set.n_attack()]);
            for q in &dirs {
                let row = robustify(q, set, DEFAULT_DUAL_CAP).unwrap();
                let mut feasible = 0;
                let mut tries = 0;
                while feasible < 50 && tries < 5000 {
                    tries += 1;
                    let z = state(&sys, &mut rng);
                    let lp = lp_max(set, q, &z);
                    let dual = row.value(&z);
                    match (lp, dual) {
                        (Some(a), Some(b)) => {
                            assert!((a - b).abs() <= 1e-7, "{name}/{label}: lp {a} vs envelope {b}");
                            feasible += 1;
                        }
                        (None, None) => {}
                        (a, b) => panic!("{name}/{label}: feasibility disagrees at {z:?}: {a:?} {b:?}"),
                    }
                }
                assert_eq!(feasible, 50, "{name}/{label}: too few feasible states");
            }
        }
    }
}

fn active_form(forms: &[(Vec<f64>, f64)], z: &[f64]) -> usize {
    let val = |(c, d): &(Vec<f64>, f64)| c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + d;
    (0..forms.len())
        .min_by(|&i, &j| val(&forms[i]).total_cmp(&val(&forms[j])))
        .unwrap()
}

#[test]
fn attack_support_is_concave_and_affine_where_unsplit() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tol = Tolerances::default();
    let mut affine = 0;
    for name in FIXTURES {
        let sys = fixture(name).build().unwrap();
        for md in sys.modes.values() {
            let set = &md.attack;
            if set.n_attack() == 0 {
                continue;
            }
            let mut checked = 0;
            while checked < 50 {
                let (z1, z2) = (state(&sys, &mut rng), state(&sys, &mut rng));
                let q = random_direction(set.n_attack(), &mut rng);
                let (Some(h1), Some(h2)) = (lp_max(set, &q, &z1), lp_max(set, &q, &z2)) else {
                    continue;
                };
                let lam: f64 = rng.gen();
                let zm: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
                let hm = lp_max(set, &q, &zm).expect("midpoint of feasible states is feasible");
                let mix = lam * h1 + (1.0 - lam) * h2;
                // The graph of A is convex, so the support is concave in z.
                assert!(hm >= mix - tol.eps_feas, "{name}: {hm} < {mix}");
                // On a segment where one affine form is active throughout the
                // support is affine, hence also convex.
                let row = robustify(&q, set, DEFAULT_DUAL_CAP).unwrap();
                if active_form(&row.forms, &z1) == active_form(&row.forms, &z2) {
                    assert!(hm <= mix + tol.eps_feas, "{name}: {hm} > {mix}");
                    affine += 1;
                }
                checked += 1;
            }
        }
    }
    assert!(affine > 0);
}

/// Direct check of the three stealth conditions for one `(z, a)`.
fn stealthy_by_definition(name: &str, label: &str, z: &[f64], a: &[f64]) -> bool {
    let sc = fixture(name);
    let sys = sc.build().unwrap();
    let plant = sc.plant().unwrap();
    let gains = sc.gains(&plant).unwrap();
    let md = sys.mode(label).unwrap();
    let tol = sys.tol;
    let nx = plant.a.nrows();
    let (x, e) = z.split_at(nx);
    let nau = md.mode.gamma_u.ncols();
    let (au, ay) = a.split_at(nau);
    // Applied input u = −K(x − e) + Γ^u a_u.
    let xhat: Vec<f64> = x.iter().zip(e).map(|(a, b)| a - b).collect();
    let u: Vec<f64> = (0..gains.k.nrows())
        .map(|i| {
            -(0..nx).map(|j| gains.k[(i, j)] * xhat[j]).sum::<f64>()
                + (0..nau).map(|j| md.mode.gamma_u[(i, j)] * au[j]).sum::<f64>()
        })
        .collect();
    let bound = |kind| sc.channels.iter().find(|c| c.kind == kind).and_then(|c| c.bound);
    let within = |v: &[f64], b: Option<f64>| b.is_none_or(|b| v.iter().all(|x| x.abs() <= b + 1e-12));
    if !within(au, bound(ChannelKind::Actuator)) || !within(ay, bound(ChannelKind::Sensor)) {
        return false;
    }
    if nau > 0 && !plant.u_set.contains_point(&u, &tol) {
        return false;
    }
    if ay.is_empty() {
        return true;
    }
    let ws = plant.w_set.vertices(&tol).unwrap();
    for w in ws.points() {
        let y: Vec<f64> = (0..plant.c.nrows())
            .map(|i| {
                (0..nx).map(|j| plant.c[(i, j)] * x[j]).sum::<f64>()
                    + w[i]
                    + (0..ay.len()).map(|j| md.mode.gamma_y[(i, j)] * ay[j]).sum::<f64>()
            })
            .collect();
        if !plant.y_set.contains_point(&y, &tol) {
            return false;
        }
        let eta: Vec<f64> = vec![0.0; nx].into_iter().chain(w.iter().copied()).collect();
        let r = md.mode.residual(z, a, &eta);
        if sys.detector.alarm(&r) {
            return false;
        }
    }
    true
}

#[test]
fn membership_agrees_with_the_stealth_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in ["sensor2", "actuator", "combined"] {
        let sys = fixture(name).build().unwrap();
        for (label, md) in &sys.modes {
            let set = &md.attack;
            let n = set.n_attack();
            if n == 0 {
                continue;
            }
            let mut inside = 0;
            let mut outside = 0;
            for _ in 0..400 {
                let z = state(&sys, &mut rng);
                // Attacks near the admissible ones, some just outside.
                let a: Vec<f64> = match lp_max(set, &random_direction(n.max(1), &mut rng)[..n], &z) {
                    Some(_) if n > 0 => {
                        let p = set.eval_at(&z).unwrap();
                        let c = p.chebyshev(&sys.tol).unwrap().center;
                        c.iter().map(|v| v + rng.gen_range(-0.02..0.02)).collect()
                    }
                    _ => (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect(),
                };
                let by_set = set.contains(&z, &a, 1e-9);
                let margin_ok = {
                    let rhs = set.rhs(&z);
                    let ga: Vec<f64> = (0..set.n_rows())
                        .map(|i| (0..n).map(|j| set.ga[(i, j)] * a[j]).sum())
                        .collect();
                    ga.iter().zip(&rhs).all(|(l, r)| (l - r).abs() > 1e-6)
                };
                if !margin_ok {
                    continue;
                }
                assert_eq!(by_set, stealthy_by_definition(name, label, &z, &a), "{name}/{label} z={z:?} a={a:?}");
                if by_set {
                    inside += 1;
                } else {
                    outside += 1;
                }
            }
            assert!(outside > 0, "{name}/{label}");
            // Sensor attack sets have no interior, so only input attacks land
            // strictly inside.
            if md.mode.gamma_y.ncols() == 0 {
                assert!(inside > 0, "{name}/{label}");
            }
        }
    }
}

#[test]
fn box_attack_set_has_constant_worst_case() {
    let set = ParamPolytope {
        ga: nalgebra::DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        h0: vec![0.3, 0.3],
        h: nalgebra::DMatrix::zeros(2, 4),
    };
    let row = robustify(&[1.0], &set, DEFAULT_DUAL_CAP).unwrap();
    for z in [[0.0; 4], [1.0, -2.0, 0.5, 3.0]] {
        assert!((row.value(&z).unwrap() - 0.3).abs() < 1e-12);
    }
    let zero = robustify(&[0.0], &set, DEFAULT_DUAL_CAP).unwrap();
    assert_eq!(zero.value(&[0.0; 4]), Some(0.0));
}
