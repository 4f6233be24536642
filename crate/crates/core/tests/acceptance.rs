//! One line per acceptance criterion, `PASS` or `FAIL` with the measured
//! quantities. Run with `--nocapture` to see the lines.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use common::{fixture, mrpi_oracle, random_direction, sample_in, FIXTURES};
use cpsafe::attack_graph::{build_dwell_graph, dwell_admits, kron_product, AttackGraph};
use cpsafe::cli::{impact_sweep, SweepPoint};
use cpsafe::geometry::{lp_solve, multiset_equal, HPolytope, LpStatus, PolyUnion, Sense, Tolerances, VPolytope};
use cpsafe::metrics::impact;
use cpsafe::reach::{backward_sequence, backward_step, union_subset, PsiMode, ReachStatus};
use cpsafe::sim::{grid_oracle, invariance_certificate, stealth_campaign, GridLabel};
use cpsafe::stealth::{robustify, DEFAULT_DUAL_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, name: &str, ok: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn first_full_impact(points: &[SweepPoint]) -> Option<usize> {
    points
        .iter()
        .find(|p| p.full.i1 >= 1.0 - 1e-9 && p.full.i2 >= 1.0 - 1e-9)
        .map(|p| p.n_max)
}

#[test]
fn criterion_1_two_tank_reproduction() {
    let started = Instant::now();
    let sweep: Vec<usize> = (1..=6).collect();
    let run = |name: &str| impact_sweep(&fixture(name), &sweep).unwrap();
    let s1 = run("sensor1");
    let s2 = run("sensor2");
    let act = run("actuator");

    // (a) e = 0 slices of the Tank-2 sensor scenario: nonempty, nested and
    // strictly shrinking as n_max grows.
    let sc2 = fixture("sensor2");
    let tol = sc2.tolerances;
    let nx = 2;
    let slices: Vec<PolyUnion> = sweep
        .iter()
        .map(|&n| {
            let res = backward_sequence(&sc2.build_with_n_max(n).unwrap(), 200, PsiMode::Exact).unwrap();
            cpsafe::metrics::slice_union(&res.safe_set, &[nx, nx + 1], &[0.0, 0.0], &tol).unwrap()
        })
        .collect();
    let vols: Vec<f64> = s2.iter().map(|p| p.slice.vol_attacked).collect();
    let mut a_ok = slices.iter().all(|s| !s.is_empty(&tol));
    for k in 1..slices.len() {
        let nested = union_subset(&slices[k], &slices[k - 1], &tol).unwrap().0;
        let sampled = s2[k].slice.volume_mode != cpsafe::geometry::VolumeMode::Exact;
        let margin = if sampled { tol.eps_vol * vols[k - 1] } else { 0.0 };
        a_ok &= nested && vols[k] < vols[k - 1] - margin;
    }

    // (b) the actuator sweep empties the safe set at a smaller n_max than
    // either sensor sweep.
    let (fa, f1, f2) = (first_full_impact(&act), first_full_impact(&s1), first_full_impact(&s2));
    let earlier = |s: Option<usize>| match (fa, s) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let b_ok = earlier(f1) && earlier(f2);

    // (c) Tank-2 sensor no more harmful than Tank-1 sensor.
    let c_ok = s1.iter().zip(&s2).all(|(p1, p2)| p2.full.i1 <= p1.full.i1 + 1e-12);

    let secs = started.elapsed().as_secs_f64();
    let fmt = |v: &[SweepPoint]| v.iter().map(|p| format!("{:.4}", p.full.i1)).collect::<Vec<_>>().join(",");
    let ok = a_ok && b_ok && c_ok && secs < 600.0;
    report(
        1,
        "two-tank reproduction",
        ok,
        format!(
            "a={} slice volumes [{}]; b={} first n_max with I1=I2=1: actuator {fa:?}, sensor1 {f1:?}, sensor2 {f2:?}; \
             c={} I1 sensor1 [{}] sensor2 [{}] actuator [{}]; {secs:.1}s",
            a_ok,
            vols.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(","),
            b_ok,
            c_ok,
            fmt(&s1),
            fmt(&s2),
            fmt(&act),
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_fixed_point_correctness() {
    let sys = fixture("sensor2").build_nominal().unwrap();
    let tol = sys.tol;
    let res = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
    let converged = matches!(res.status, ReachStatus::Converged(_));
    let (again, _) = backward_step(&sys, &res.multiset, PsiMode::Exact).unwrap();
    let stable = again
        .sets
        .iter()
        .zip(&res.multiset.sets)
        .all(|(a, b)| multiset_equal(a, b, &tol).unwrap().equal);
    let oracle = PolyUnion::single(mrpi_oracle(&sys, 1000));
    let inside = union_subset(&res.safe_set, &oracle, &tol).unwrap().0;
    let covers = union_subset(&oracle, &res.safe_set, &tol).unwrap().0;
    let ok = converged && stable && inside && covers;
    report(
        2,
        "fixed-point correctness",
        ok,
        format!("status {:?}, extra update unchanged {stable}, matches classical recursion {}", res.status, inside && covers),
    );
    assert!(ok);
}

#[test]
fn criterion_3_nestedness_and_invariance() {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in FIXTURES {
        let sc = fixture(name);
        let mut nested = true;
        for n in sc.sweep_values() {
            let res = backward_sequence(&sc.build_with_n_max(n).unwrap(), 200, PsiMode::Exact).unwrap();
            nested &= res.history.iter().all(|h| h.nested);
        }
        let sys = sc.build().unwrap();
        let res = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
        let cert = invariance_certificate(&sys, &res.multiset, 500, sc.seed).unwrap();
        ok &= nested && cert.failures == 0 && cert.samples == 500;
        detail.push(format!(
            "{name}: nested {nested}, {} successors, {} failures",
            cert.successors_checked, cert.failures
        ));
    }
    report(3, "nestedness and invariance certificates", ok, detail.join("; "));
    assert!(ok);
}

#[test]
fn criterion_4_oracle_containment() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, nominal) in [("sensor2", true), ("sensor1", false), ("sensor2", false)] {
        let sc = fixture(name);
        let sys = if nominal { sc.build_nominal().unwrap() } else { sc.build().unwrap() };
        let safe = backward_sequence(&sys, 200, PsiMode::Exact).unwrap().safe_set;
        let grid = grid_oracle(&sys, 9, 30).unwrap();
        let (mut in_safe, mut bad, mut violating) = (0, 0, 0);
        for g in &grid {
            let is_safe = safe.contains_point(&g.z, &sys.tol);
            in_safe += usize::from(is_safe);
            if let GridLabel::Violates(_) = g.label {
                violating += 1;
                bad += usize::from(is_safe);
            }
        }
        ok &= bad == 0 && grid.len() == 6561;
        let tag = if nominal { "nominal".to_string() } else { name.to_string() };
        detail.push(format!("{tag}: {in_safe} safe points, {violating} violating, {bad} misclassified"));
    }
    report(4, "grid oracle containment", ok, detail.join("; "));
    assert!(ok);
}

#[test]
fn criterion_5_stealth_soundness() {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in FIXTURES {
        let sc = fixture(name);
        let sys = sc.build().unwrap();
        let safe = backward_sequence(&sys, 200, PsiMode::Exact).unwrap().safe_set;
        let rep = stealth_campaign(&sys, &safe, 10_000, 50, sc.seed).unwrap();
        ok &= rep.rollouts == 10_000 && rep.attack_alarms == 0 && rep.z_exits == 0;
        detail.push(format!(
            "{name}: {} rollouts, {} steps, {} attack alarms, {} Z exits, {} fallback steps",
            rep.rollouts, rep.steps, rep.attack_alarms, rep.z_exits, rep.fallback_steps
        ));
    }
    report(5, "stealth soundness", ok, detail.join("; "));
    assert!(ok);
}

fn random_polytope(dim: usize, rng: &mut ChaCha8Rng, tol: &Tolerances) -> HPolytope {
    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let n = rng.gen_range(dim + 2..dim + 8);
    let mut pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|k| c[k] + rng.gen_range(-1.0..1.0)).collect())
        .collect();
    for k in 0..=dim {
        pts.push((0..dim).map(|i| c[i] + if k == dim { -0.3 } else if i == k { 0.3 } else { 0.0 }).collect());
    }
    VPolytope::new(dim, pts).hull(tol).unwrap()
}

fn same(a: &HPolytope, b: &HPolytope, tol: &Tolerances) -> bool {
    a.contains_set_within(b, tol.eps_set, tol).unwrap() && b.contains_set_within(a, tol.eps_set, tol).unwrap()
}

#[test]
fn criterion_6_geometry_suite() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cases = 100;
    let (mut support, mut duality, mut hull, mut scaling, mut boxes) = (0, 0, 0, 0, 0);
    for i in 0..cases {
        let dim = 2 + i % 2;
        let p = random_polytope(dim, &mut rng, &tol);
        let q = random_polytope(dim, &mut rng, &tol);
        let d = random_direction(dim, &mut rng);
        let s = p.minkowski_sum(&q, &tol).unwrap();
        let lhs = s.support(&d, &tol).unwrap();
        let rhs = p.support(&d, &tol).unwrap() + q.support(&d, &tol).unwrap();
        support += usize::from((lhs - rhs).abs() <= 1e-7 * (1.0 + rhs.abs()));

        duality += usize::from(same(&s.erode(&q, &tol).unwrap(), &p, &tol));

        let back = p.vertices(&tol).unwrap().hull(&tol).unwrap();
        hull += usize::from(same(&back, &p, &tol));

        let centre = p.chebyshev(&tol).unwrap().center;
        let neg: Vec<f64> = centre.iter().map(|v| -v).collect();
        let c = p.translate(&neg);
        let lam = rng.gen_range(0.05..3.0);
        let mu = c.minkowski_distance(&c.scale(lam), &tol).unwrap();
        scaling += usize::from((mu - lam).abs() <= 1e-9 * lam.max(1.0));

        let dimb = 1 + i % 5;
        let lo: Vec<f64> = (0..dimb).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + 1.0).collect();
        let unit = HPolytope::box_bounds(&vec![-0.5; dimb], &vec![0.5; dimb]).volume(&tol).unwrap();
        let moved = HPolytope::box_bounds(&lo, &hi).volume(&tol).unwrap();
        boxes += usize::from(unit == 1.0 && (moved - 1.0).abs() <= 1e-12);
    }
    let ok = [support, duality, hull, scaling, boxes].iter().all(|&n| n == cases);
    report(
        6,
        "geometry suite",
        ok,
        format!(
            "of {cases}: support additivity {support}, erosion/sum duality {duality}, hull round-trip {hull}, \
             scaling law {scaling}, unit-box volume {boxes}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_parametric_lp_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut ok = true;
    for name in FIXTURES {
        let sys = fixture(name).build().unwrap();
        for (label, md) in &sys.modes {
            let set = &md.attack;
            if set.n_attack() == 0 {
                continue;
            }
            let q = random_direction(set.n_attack(), &mut rng);
            let row = robustify(&q, set, DEFAULT_DUAL_CAP).unwrap();
            let mut n = 0;
            let mut tries = 0;
            while n < 50 && tries < 20_000 {
                tries += 1;
                let z0 = sample_in(sys.z_set(), &mut rng, &sys.tol);
                let s = [1.0, 0.1, 0.01, 0.0][rng.gen_range(0..4)];
                let z: Vec<f64> = z0.iter().enumerate().map(|(i, v)| if i < 2 { *v } else { v * s }).collect();
                let lp = lp_solve(&q, &set.ga, &set.rhs(&z), Sense::Max).unwrap();
                match (lp.status, row.value(&z)) {
                    (LpStatus::Optimal, Some(v)) => {
                        worst = worst.max((lp.value - v).abs());
                        n += 1;
                    }
                    (LpStatus::Infeasible, None) => {}
                    _ => ok = false,
                }
            }
            if n < 50 {
                println!("  {name}/{label}: only {n} feasible states");
                ok = false;
            }
            checked += n;
        }
    }
    ok &= worst <= 1e-7;
    report(7, "parametric-LP duality", ok, format!("{checked} states, max gap {worst:.2e}"));
    assert!(ok);
}

fn random_graph(rng: &mut ChaCha8Rng, tag: &str) -> AttackGraph {
    let n = rng.gen_range(1..6);
    let nodes: Vec<String> = (0..n).map(|i| format!("{tag}{i}")).collect();
    let mut edges = BTreeSet::new();
    for _ in 0..rng.gen_range(0..12) {
        let (s, d) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let l = ["N", "A", "B"][rng.gen_range(0..3)];
        edges.insert((nodes[s].clone(), nodes[d].clone(), l.to_string()));
    }
    AttackGraph::new(nodes, edges.into_iter().collect()).unwrap()
}

#[test]
fn criterion_8_graph_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut kron = 0;
    for _ in 0..100 {
        let g1 = random_graph(&mut rng, "p");
        let g2 = random_graph(&mut rng, "q");
        let g = kron_product(&g1, &g2);
        kron += usize::from(
            g.nodes().len() == g1.nodes().len() * g2.nodes().len()
                && g.edges().len() == g1.edges().len() * g2.edges().len(),
        );
    }
    let mut words = 0usize;
    let mut mismatches = 0usize;
    for n_max in 0..=4 {
        for n_min in 1..=4 {
            let g = build_dwell_graph(n_max, n_min).unwrap();
            let all: Vec<usize> = (0..g.nodes().len()).collect();
            for len in 0..=8 {
                let lang: BTreeSet<Vec<bool>> = g
                    .enumerate_words(len, &all)
                    .into_iter()
                    .map(|w| w.labels.iter().map(|l| l == "A").collect())
                    .collect();
                for bits in 0u32..(1 << len) {
                    let w: Vec<bool> = (0..len).map(|k| bits >> k & 1 == 1).collect();
                    words += 1;
                    mismatches += usize::from(lang.contains(&w) != dwell_admits(&w, n_max, n_min));
                }
            }
        }
    }
    let ok = kron == 100 && mismatches == 0;
    report(
        8,
        "graph algebra",
        ok,
        format!("product cardinalities {kron}/100; dwell language {mismatches} mismatches over {words} words"),
    );
    assert!(ok);
}

#[test]
fn criterion_9_trivial_attack_identity() {
    let mut sc = fixture("sensor2");
    sc.channels.clear();
    let tol = sc.tolerances;
    let s0 = backward_sequence(&sc.build_nominal().unwrap(), 200, PsiMode::Exact).unwrap().safe_set;
    let s = backward_sequence(&sc.build().unwrap(), 200, PsiMode::Exact).unwrap().safe_set;
    let rep = impact(&s0, &s, &tol, "nominal-only").unwrap();
    let ok = rep.i1 == 0.0 && rep.i2 == 0.0;
    report(9, "trivial-attack identity", ok, format!("I1 = {}, I2 = {}", rep.i1, rep.i2));
    assert!(ok);
}
