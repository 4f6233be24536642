mod common;

use common::{fixture, mrpi_oracle, FIXTURES};
use cpsafe::geometry::{multiset_equal, HPolytope, PolyUnion, Tolerances};
use cpsafe::reach::{backward_sequence, backward_step, union_subset, PsiMode, ReachStatus};
use cpsafe::scenario::Scenario;
use cpsafe::sim::invariance_certificate;
use nalgebra::DMatrix;

#[test]
fn attack_free_fixed_point_matches_the_classical_recursion() {
    let sys = fixture("sensor2").build_nominal().unwrap();
    let res = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
    assert!(matches!(res.status, ReachStatus::Converged(_)));
    let (again, _) = backward_step(&sys, &res.multiset, PsiMode::Exact).unwrap();
    for (a, b) in again.sets.iter().zip(&res.multiset.sets) {
        assert!(multiset_equal(a, b, &sys.tol).unwrap().equal);
    }
    let oracle = PolyUnion::single(mrpi_oracle(&sys, 500));
    assert!(union_subset(&res.safe_set, &oracle, &sys.tol).unwrap().0);
    assert!(union_subset(&oracle, &res.safe_set, &sys.tol).unwrap().0);
}

const DEADBEAT: &str = r#"{
  "name": "scalar-deadbeat",
  "plant": {
    "A": [[2.0]], "B": [[1.0]], "C": [[1.0]],
    "X": {"lo": [-1], "hi": [1]},
    "U": {"lo": [-1], "hi": [1]},
    "Y": {"lo": [-1], "hi": [1]},
    "V": {"lo": [-0.1], "hi": [0.1]},
    "W": {"lo": [-0.01], "hi": [0.01]}
  },
  "gains": {"K": [[2.0]], "L": [[2.0]]},
  "detector": {"R": {"lo": [-1], "hi": [1]}},
  "e_max": 0.5
}"#;

/// `x⁺ = 2e + v`, `e⁺ = v − 2w`: the safe set is `|e| ≤ 0.24`,
/// `|x − e| ≤ 0.5` (from the input bound one step ahead), area 0.48.
#[test]
fn scalar_deadbeat_loop_has_the_hand_computed_safe_set() {
    let sc = Scenario::from_json(DEADBEAT).unwrap();
    let sys = sc.build().unwrap();
    let res = backward_sequence(&sys, 50, PsiMode::Exact).unwrap();
    assert!(matches!(res.status, ReachStatus::Converged(_)));
    let expected = HPolytope::new(
        DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 0.0, -1.0, 1.0, -1.0, -1.0, 1.0]),
        vec![0.24, 0.24, 0.5, 0.5],
    )
    .unwrap();
    let tol = sys.tol;
    let exp = PolyUnion::single(expected);
    assert!(multiset_equal(&res.safe_set, &exp, &tol).unwrap().equal);
    assert!((res.safe_set.volume(&tol).unwrap().value - 0.48).abs() < 1e-9);
}

#[test]
fn backward_sequence_is_nested_for_every_fixture() {
    for name in FIXTURES {
        let sc = fixture(name);
        for n in [1, 3] {
            let sys = sc.build_with_n_max(n).unwrap();
            let res = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
            assert!(res.history.iter().all(|h| h.nested), "{name} n_max={n}");
            assert!(!res.underapproximation, "{name} n_max={n}");
        }
    }
}

#[test]
fn one_step_invariance_holds_on_the_fixed_point() {
    for name in ["sensor2", "actuator"] {
        let sys = fixture(name).build().unwrap();
        let res = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
        let rep = invariance_certificate(&sys, &res.multiset, 100, 9).unwrap();
        assert_eq!(rep.failures, 0, "{name}: {rep:?}");
        assert!(rep.successors_checked > 0);
    }
}

#[test]
fn convex_inner_mode_stays_inside_the_exact_result() {
    let tol = Tolerances::default();
    for name in ["sensor2", "actuator"] {
        let sys = fixture(name).build().unwrap();
        let exact = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
        let inner = backward_sequence(&sys, 200, PsiMode::ConvexInner).unwrap();
        assert!(union_subset(&inner.safe_set, &exact.safe_set, &tol).unwrap().0, "{name}");
    }
}

#[test]
fn attacked_safe_set_lies_inside_the_attack_free_one() {
    let tol = Tolerances::default();
    for name in FIXTURES {
        let sc = fixture(name);
        let nominal = backward_sequence(&sc.build_nominal().unwrap(), 200, PsiMode::Exact).unwrap();
        let attacked = backward_sequence(&sc.build().unwrap(), 200, PsiMode::Exact).unwrap();
        assert!(union_subset(&attacked.safe_set, &nominal.safe_set, &tol).unwrap().0, "{name}");
    }
}
