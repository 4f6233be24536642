//! Stealthy attack sets of each mode, pointwise and as worst-case envelopes.
//!
//! `cargo run --example stealth_sets -- crates/core/scenarios/twotank_combined.json`

use cpsafe::scenario::Scenario;
use cpsafe::stealth::{pointwise_max, robustify, DEFAULT_DUAL_CAP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/twotank_combined.json").into());
    let sc = Scenario::from_path(&path)?;
    let sys = sc.build()?;
    let states = [[0.0, 0.0, 0.0, 0.0], [0.3, -0.2, 0.0, 0.02], [0.3, -0.2, 0.1, 0.1]];
    for (label, md) in &sys.modes {
        let set = &md.attack;
        println!("mode {label}: {} attack coordinates, {} rows", set.n_attack(), set.n_rows());
        if set.n_attack() == 0 {
            continue;
        }
        for z in &states {
            let a = set.eval_at(z)?;
            let bb = a.bounding_box(&sys.tol).ok();
            println!("  z={z:?}: attack box {:?}", bb.map(|b| (b.lo, b.hi)));
        }
        // Worst case of the first attack coordinate as a function of z.
        let mut q = vec![0.0; set.n_attack()];
        q[0] = 1.0;
        let row = robustify(&q, set, DEFAULT_DUAL_CAP)?;
        println!("  max a[0]: {} affine pieces, {} emptiness certificates", row.forms.len(), row.infeasible.len());
        for z in &states {
            println!("    z={z:?}: envelope {:?}, LP {:?}", row.value(z), pointwise_max(&q, set, z)?);
        }
    }
    Ok(())
}
