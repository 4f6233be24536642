//! Vertex loops of the `e = 0` slice of every node set, as CSV on stdout.
//!
//! `cargo run --release --example export_slice -- crates/core/scenarios/twotank_sensor2.json > slices.csv`

use cpsafe::cli::vertex_loop;
use cpsafe::metrics::slice_union;
use cpsafe::reach::backward_sequence;
use cpsafe::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/twotank_sensor2.json").into());
    let sc = Scenario::from_path(&path)?;
    let sys = sc.build()?;
    let tol = &sys.tol;
    let res = backward_sequence(&sys, 200, sc.mode.unwrap_or_default())?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["node", "piece", "vertex", "x1", "x2"])?;
    let named = res.multiset.named(&sys.graph);
    let sets = named.iter().map(|(n, s)| (n.as_str(), s)).chain([("safe", &res.safe_set)]);
    for (node, set) in sets {
        let slice = slice_union(set, &[2, 3], &[0.0, 0.0], tol)?;
        for (k, p) in slice.pieces().iter().enumerate() {
            for (i, v) in vertex_loop(p, tol)?.iter().enumerate() {
                w.write_record([node.to_string(), k.to_string(), i.to_string(), v[0].to_string(), v[1].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
