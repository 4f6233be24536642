mod common;

use common::fixture;
use cpsafe::geometry::{HPolytope, PolyUnion, Tolerances, VPolytope};
use cpsafe::metrics::{impact, scaling_into, MetricsError};
use cpsafe::reach::{backward_sequence, PsiMode};
use proptest::prelude::*;

fn cset(pts: Vec<Vec<f64>>) -> Option<HPolytope> {
    let mut pts = pts;
    pts.extend([vec![0.2, 0.0], vec![-0.2, 0.2], vec![-0.2, -0.2]]);
    let h = VPolytope::new(2, pts).hull(&Tolerances::default()).ok()?;
    h.is_cset(&Tolerances::default()).then_some(h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn scaling_of_a_shrunk_copy_is_the_factor(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 3..8),
        lam in 0.05f64..1.0,
    ) {
        let Some(s) = cset(pts) else { return Ok(()) };
        let tol = Tolerances::default();
        let s0 = PolyUnion::single(s.clone());
        let mu = scaling_into(&s0, &s.scale(lam), &tol).unwrap();
        prop_assert!((mu - lam).abs() <= 1e-9, "{mu} vs {lam}");
        let rep = impact(&s0, &PolyUnion::single(s.scale(lam)), &tol, "t").unwrap();
        prop_assert!((rep.i2 - (1.0 - lam)).abs() <= 1e-9);
        prop_assert!((rep.i1 - (1.0 - lam * lam)).abs() <= 1e-9);
    }
}

#[test]
fn identical_sets_have_zero_impact() {
    let tol = Tolerances::default();
    let s = PolyUnion::single(HPolytope::unit_box(3, 1.0));
    let rep = impact(&s, &s, &tol, "same").unwrap();
    assert_eq!((rep.i1, rep.i2, rep.mu), (0.0, 0.0, 1.0));
}

#[test]
fn empty_attacked_set_has_full_impact() {
    let tol = Tolerances::default();
    let s = PolyUnion::single(HPolytope::unit_box(2, 1.0));
    let rep = impact(&s, &PolyUnion::empty(2), &tol, "empty").unwrap();
    assert_eq!((rep.i1, rep.i2), (1.0, 1.0));
}

#[test]
fn larger_attacked_set_is_rejected() {
    let tol = Tolerances::default();
    let s0 = PolyUnion::single(HPolytope::unit_box(2, 1.0));
    let s = PolyUnion::single(HPolytope::unit_box(2, 1.5));
    assert!(matches!(impact(&s0, &s, &tol, "x"), Err(MetricsError::NotSubset)));
    assert!(matches!(impact(&PolyUnion::empty(2), &s, &tol, "x"), Err(MetricsError::NominalEmpty)));
}

#[test]
fn scenario_without_attacks_has_zero_impact() {
    let mut sc = fixture("sensor2");
    sc.channels.clear();
    let tol = sc.tolerances;
    let s0 = backward_sequence(&sc.build_nominal().unwrap(), 200, PsiMode::Exact).unwrap();
    let s = backward_sequence(&sc.build().unwrap(), 200, PsiMode::Exact).unwrap();
    let rep = impact(&s0.safe_set, &s.safe_set, &tol, "nominal").unwrap();
    assert_eq!((rep.i1, rep.i2), (0.0, 0.0));
}

#[test]
fn impact_of_the_actuator_fixture_is_small_but_positive() {
    let sc = fixture("actuator");
    let tol = sc.tolerances;
    let s0 = backward_sequence(&sc.build_nominal().unwrap(), 200, PsiMode::Exact).unwrap();
    let s = backward_sequence(&sc.build().unwrap(), 200, PsiMode::Exact).unwrap();
    let rep = impact(&s0.safe_set, &s.safe_set, &tol, "actuator").unwrap();
    assert!(rep.i1 > 0.0 && rep.i1 < 0.01, "{rep:?}");
    assert!(rep.i2 > 0.0 && rep.i2 < 0.01, "{rep:?}");
}
