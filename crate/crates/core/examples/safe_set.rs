//! Maximal safe set of a bundled scenario.
//!
//! `cargo run --release --example safe_set -- crates/core/scenarios/twotank_sensor2.json`

use std::time::Instant;

use cpsafe::metrics::slice_union;
use cpsafe::reach::backward_sequence;
use cpsafe::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/twotank_sensor2.json").into());
    let sc = Scenario::from_path(&path)?;
    let sys = sc.build()?;
    println!("{}: {} nodes, {} modes", sc.name, sys.graph.nodes().len(), sys.modes.len());
    let t = Instant::now();
    let res = backward_sequence(&sys, sc.lmax.unwrap_or(200), sc.mode.unwrap_or_default())?;
    println!("status {:?} after {:.2?}", res.status, t.elapsed());
    for h in &res.history {
        println!("  l={:3} pieces {:?} nested {}", h.iteration, h.pieces, h.nested);
    }
    let tol = &sys.tol;
    println!("safe set: {} pieces, volume {:.6}", res.safe_set.len(), res.safe_set.volume(tol)?.value);
    let slice = slice_union(&res.safe_set, &[2, 3], &[0.0, 0.0], tol)?;
    println!("e = 0 slice: {} pieces, area {:.6}", slice.len(), slice.volume(tol)?.value);
    Ok(())
}
