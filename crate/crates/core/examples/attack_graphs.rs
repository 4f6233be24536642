//! Dwell-time patterns and their product for two channels.
//!
//! `cargo run --example attack_graphs -- 2 1`

use cpsafe::attack_graph::{build_dwell_graph, compose_modes, Channel, ChannelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let n_max = args.next().transpose()?.unwrap_or(2);
    let n_min = args.next().transpose()?.unwrap_or(1);

    let g = build_dwell_graph(n_max, n_min)?;
    println!("dwell graph n_max={n_max} n_min={n_min}: nodes {:?}", g.nodes());
    for e in g.edges() {
        println!("  {} -{}-> {}", g.nodes()[e.src], e.label, g.nodes()[e.dst]);
    }
    let all: Vec<usize> = (0..g.nodes().len()).collect();
    let words: Vec<String> = g.enumerate_words(4, &[0]).iter().map(|w| w.labels.concat()).collect();
    println!("words of length 4 from n0: {}", words.join(" "));
    println!("walks of length 8 from anywhere: {}", g.walk_counts(8, &all).iter().sum::<u128>());

    let sensor = Channel {
        kind: ChannelKind::Sensor,
        index: 1,
        bound: Some(0.05),
        graph: g,
    };
    let actuator = Channel {
        kind: ChannelKind::Actuator,
        index: 1,
        bound: Some(0.01),
        graph: build_dwell_graph(1, 2)?,
    };
    let (prod, modes) = compose_modes(&[sensor, actuator]);
    println!("product: {} nodes, {} edges", prod.nodes().len(), prod.edges().len());
    for m in &modes {
        println!(
            "  mode {:5} inputs {:?} outputs {:?}",
            m.label, m.selection.attacked_inputs, m.selection.attacked_outputs
        );
    }
    Ok(())
}
