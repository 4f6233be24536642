//! Adversarial rollouts and boundary falsification of a computed safe set.
//!
//! `cargo run --release --example falsify -- crates/core/scenarios/twotank_sensor2.json 2000`

use cpsafe::geometry::PolyUnion;
use cpsafe::reach::backward_sequence;
use cpsafe::scenario::Scenario;
use cpsafe::sim::{falsify, rollout, stealth_campaign, AttackPolicy, DisturbancePolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/twotank_sensor2.json").into());
    let budget: usize = args.next().map(|b| b.parse()).transpose()?.unwrap_or(1000);
    let sc = Scenario::from_path(&path)?;
    let sys = sc.build()?;
    let safe = backward_sequence(&sys, 200, sc.mode.unwrap_or_default())?.safe_set;

    let rep = stealth_campaign(&sys, &safe, budget, 50, sc.seed)?;
    println!("{rep:#?}");
    let rep = falsify(&sys, &safe, budget, 50, sc.seed)?;
    println!("falsify: {} trials, counterexample {}, {} outside escapes", rep.trials, rep.counterexample.is_some(), rep.outside_escapes);

    // A 10% inflation of the safe set is not safe.
    let inflated = PolyUnion::new(sys.dim(), safe.pieces().iter().map(|p| p.scale(1.1)).collect())?;
    let rep = falsify(&sys, &inflated, budget, 50, sc.seed)?;
    if let Some(tr) = rep.counterexample {
        println!("inflated set: start {:?} leaves Z at step {:?}", tr.z[0], tr.violation_step);
    }

    let tr = rollout(&sys, &[0.2, 0.1, 0.0, 0.0], 0, 10, AttackPolicy::Extreme, DisturbancePolicy::Vertex, 1)?;
    for t in 0..tr.labels.len() {
        println!("t={t:2} {:>4} a={:?} z={:.4?}", tr.labels[t], tr.attacks[t], tr.z[t + 1]);
    }
    Ok(())
}
