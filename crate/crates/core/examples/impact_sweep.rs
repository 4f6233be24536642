//! Impact metrics against the maximum attack duration.
//!
//! `cargo run --release --example impact_sweep -- crates/core/scenarios/twotank_actuator.json`

use cpsafe::cli::impact_sweep;
use cpsafe::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/twotank_actuator.json").into());
    let sc = Scenario::from_path(&path)?;
    let values = sc.sweep_values();
    println!("{}: n_max in {values:?}", sc.name);
    println!("n_max      I1      I2   slice I1  slice I2  status");
    for p in impact_sweep(&sc, &values)? {
        println!(
            "{:5}  {:.4}  {:.4}     {:.4}    {:.4}  {:?}",
            p.n_max, p.full.i1, p.full.i2, p.slice.i1, p.slice.i2, p.status
        );
    }
    Ok(())
}
