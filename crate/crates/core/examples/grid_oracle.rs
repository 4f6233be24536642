//! Brute-force classification of a state grid, compared with the safe set.
//!
//! `cargo run --release --example grid_oracle -- crates/core/scenarios/twotank_sensor1.json 7 30`

use cpsafe::reach::backward_sequence;
use cpsafe::scenario::Scenario;
use cpsafe::sim::{grid_oracle, GridLabel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/twotank_sensor1.json").into());
    let res: usize = args.next().map(|v| v.parse()).transpose()?.unwrap_or(7);
    let horizon: usize = args.next().map(|v| v.parse()).transpose()?.unwrap_or(30);
    let sc = Scenario::from_path(&path)?;
    let sys = sc.build()?;
    let safe = backward_sequence(&sys, 200, sc.mode.unwrap_or_default())?.safe_set;
    let grid = grid_oracle(&sys, res, horizon)?;
    let (mut outside, mut violating, mut quiet, mut in_safe, mut wrong) = (0, 0, 0, 0, 0);
    for g in &grid {
        let s = safe.contains_point(&g.z, &sys.tol);
        in_safe += usize::from(s);
        match g.label {
            GridLabel::OutsideZ => outside += 1,
            GridLabel::Violates(_) => {
                violating += 1;
                wrong += usize::from(s);
            }
            GridLabel::NoViolationFound => quiet += 1,
        }
    }
    println!("{} points: {outside} outside Z, {violating} violating, {quiet} without violation", grid.len());
    println!("{in_safe} inside the safe set, {wrong} of them violating (must be 0)");
    Ok(())
}
