//! Attack patterns as labelled directed graphs.
//!
//! A graph node is an automaton state; an edge `(src, dst, label)` lets the
//! system move from `src` to `dst` while running the mode named `label`.
//! Composite labels produced by [`kron_product`] join the factor labels with
//! [`LABEL_SEP`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ChannelSelection;

/// Separator between factor labels in a product graph.
pub const LABEL_SEP: char = ',';
/// Label of the attack-free action in dwell-time graphs.
pub const IDLE: &str = "N";
/// Label of the attacking action in dwell-time graphs.
pub const ATTACK: &str = "A";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge references unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node {0:?}")]
    DuplicateNode(String),
    #[error("duplicate edge {0:?} -> {1:?} [{2}]")]
    DuplicateEdge(String, String, String),
    #[error("dwell bounds need n_min ≥ 1 (got n_max={n_max}, n_min={n_min})")]
    InvalidDwell { n_max: usize, n_min: usize },
    #[error("graph has no nodes")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
}

/// Reasons a graph fails validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Node without outgoing edges.
    Sink(String),
    /// Edge label that names no known mode.
    UnknownLabel(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Sink(n) => write!(f, "node {n:?} has no outgoing edge"),
            Violation::UnknownLabel(l) => write!(f, "label {l:?} names no mode"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct AttackGraph {
    nodes: Vec<String>,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<String>,
    edges: Vec<(String, String, String)>,
}

impl TryFrom<GraphJson> for AttackGraph {
    type Error = GraphError;
    fn try_from(j: GraphJson) -> Result<Self, GraphError> {
        AttackGraph::new(j.nodes, j.edges)
    }
}

impl From<AttackGraph> for GraphJson {
    fn from(g: AttackGraph) -> Self {
        GraphJson {
            edges: g
                .edges
                .iter()
                .map(|e| (g.nodes[e.src].clone(), g.nodes[e.dst].clone(), e.label.clone()))
                .collect(),
            nodes: g.nodes,
        }
    }
}

/// A walk: `nodes.len() == labels.len() + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<usize>,
    pub labels: Vec<String>,
}

impl AttackGraph {
    pub fn new(nodes: Vec<String>, edges: Vec<(String, String, String)>) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (s, d, l) in edges {
            let src = *index.get(&s).ok_or_else(|| GraphError::UnknownNode(s.clone()))?;
            let dst = *index.get(&d).ok_or_else(|| GraphError::UnknownNode(d.clone()))?;
            if !seen.insert((src, dst, l.clone())) {
                return Err(GraphError::DuplicateEdge(s, d, l));
            }
            out.push(Edge { src, dst, label: l });
        }
        Ok(Self { nodes, edges: out })
    }

    /// One node with a self-loop carrying `label`.
    pub fn single_loop(label: &str) -> Self {
        Self {
            nodes: vec!["n0".into()],
            edges: vec![Edge {
                src: 0,
                dst: 0,
                label: label.into(),
            }],
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.src == node)
    }

    pub fn in_edges(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == node)
    }

    /// Distinct edge labels in first-appearance order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.edges {
            if !out.contains(&e.label) {
                out.push(e.label.clone());
            }
        }
        out
    }

    /// Every node must have an outgoing edge.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let v: Vec<Violation> = (0..self.nodes.len())
            .filter(|&i| self.out_edges(i).next().is_none())
            .map(|i| Violation::Sink(self.nodes[i].clone()))
            .collect();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// [`validate`](Self::validate) plus a check that every label is known.
    pub fn validate_labels(&self, known: &[String]) -> Result<(), Vec<Violation>> {
        let mut v = self.validate().err().unwrap_or_default();
        for l in self.labels() {
            if !known.contains(&l) {
                v.push(Violation::UnknownLabel(l));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Number of walks with `len` edges starting in `from`, per end node.
    pub fn walk_counts(&self, len: usize, from: &[usize]) -> Vec<u128> {
        let mut counts = vec![0u128; self.nodes.len()];
        for &f in from {
            counts[f] += 1;
        }
        for _ in 0..len {
            let mut next = vec![0u128; self.nodes.len()];
            for e in &self.edges {
                next[e.dst] += counts[e.src];
            }
            counts = next;
        }
        counts
    }

    /// All walks of exactly `len` edges starting in `from`.
    pub fn enumerate_words(&self, len: usize, from: &[usize]) -> Vec<Walk> {
        let mut out = Vec::new();
        let mut stack: Vec<Walk> = from
            .iter()
            .map(|&f| Walk {
                nodes: vec![f],
                labels: Vec::new(),
            })
            .collect();
        stack.reverse();
        while let Some(w) = stack.pop() {
            if w.labels.len() == len {
                out.push(w);
                continue;
            }
            let last = *w.nodes.last().expect("walks are nonempty");
            let mut children: Vec<Walk> = self
                .out_edges(last)
                .map(|e| {
                    let mut c = w.clone();
                    c.nodes.push(e.dst);
                    c.labels.push(e.label.clone());
                    c
                })
                .collect();
            children.reverse();
            stack.extend(children);
        }
        out
    }
}

/// Product graph: nodes are pairs `"p.q"`, and `((p₁,q₁),(p₂,q₂))` carries
/// label `"σ₁,σ₂"` iff `(p₁,p₂,σ₁)` and `(q₁,q₂,σ₂)` are edges of the factors.
pub fn kron_product(g1: &AttackGraph, g2: &AttackGraph) -> AttackGraph {
    let n2 = g2.nodes.len();
    let mut nodes = Vec::with_capacity(g1.nodes.len() * n2);
    for p in &g1.nodes {
        for q in &g2.nodes {
            nodes.push(format!("{p}.{q}"));
        }
    }
    let mut edges = Vec::with_capacity(g1.edges.len() * g2.edges.len());
    for e1 in &g1.edges {
        for e2 in &g2.edges {
            edges.push(Edge {
                src: e1.src * n2 + e2.src,
                dst: e1.dst * n2 + e2.dst,
                label: format!("{}{LABEL_SEP}{}", e1.label, e2.label),
            });
        }
    }
    AttackGraph { nodes, edges }
}

/// Dwell-time pattern over `{N, A}`: attack runs last at most `n_max` steps
/// and are followed by at least `n_min` idle steps.
///
/// Nodes: `n0` (idle, free to attack), `a1..a{n_max}` (attack counters),
/// `r1..r{n_min−1}` (mandatory recovery).
pub fn build_dwell_graph(n_max: usize, n_min: usize) -> Result<AttackGraph, GraphError> {
    if n_min < 1 {
        return Err(GraphError::InvalidDwell { n_max, n_min });
    }
    if n_max == 0 {
        return Ok(AttackGraph::single_loop(IDLE));
    }
    let mut nodes = vec!["n0".to_string()];
    nodes.extend((1..=n_max).map(|k| format!("a{k}")));
    nodes.extend((1..n_min).map(|k| format!("r{k}")));
    let recovery_entry = if n_min == 1 { "n0".to_string() } else { "r1".to_string() };

    let mut edges = vec![
        ("n0".to_string(), "n0".to_string(), IDLE.to_string()),
        ("n0".to_string(), "a1".to_string(), ATTACK.to_string()),
    ];
    for k in 1..=n_max {
        if k < n_max {
            edges.push((format!("a{k}"), format!("a{}", k + 1), ATTACK.to_string()));
        }
        edges.push((format!("a{k}"), recovery_entry.clone(), IDLE.to_string()));
    }
    for k in 1..n_min {
        let next = if k + 1 < n_min { format!("r{}", k + 1) } else { "n0".to_string() };
        edges.push((format!("r{k}"), next, IDLE.to_string()));
    }
    AttackGraph::new(nodes, edges)
}

/// Whether a finite `{N, A}` word can be produced by the dwell pattern when
/// observed from an arbitrary point of an admissible infinite run.
///
/// A finite window may start in the middle of an attack or recovery phase,
/// so the leading run is only bounded, never required to be long.
pub fn dwell_admits(word: &[bool], n_max: usize, n_min: usize) -> bool {
    // `true` = attack step. Split into maximal runs.
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &a in word {
        match runs.last_mut() {
            Some((b, n)) if *b == a => *n += 1,
            _ => runs.push((a, 1)),
        }
    }
    for (i, &(attack, len)) in runs.iter().enumerate() {
        if attack && len > n_max {
            return false;
        }
        // Idle runs strictly between two attack runs must be long enough.
        let interior = i > 0 && i + 1 < runs.len();
        if !attack && interior && len < n_min {
            return false;
        }
    }
    true
}

/// Kind of vulnerable channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Sensor,
    Actuator,
}

/// One vulnerable channel with its own attack pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    /// 1-based sensor or actuator index.
    pub index: usize,
    /// Magnitude bound `|a| ≤ bound`, if any.
    pub bound: Option<f64>,
    pub graph: AttackGraph,
}

/// A mode required by a product graph label.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRequest {
    pub label: String,
    pub selection: ChannelSelection,
    /// Bounds per attacked input, ascending channel order.
    pub input_bounds: Vec<Option<f64>>,
    /// Bounds per attacked output, ascending channel order.
    pub output_bounds: Vec<Option<f64>>,
}

/// Builds the product of the channel graphs and the mode each composite
/// label stands for. The all-idle label maps to the nominal mode.
pub fn compose_modes(channels: &[Channel]) -> (AttackGraph, Vec<ModeRequest>) {
    let graph = match channels.split_first() {
        None => AttackGraph::single_loop(IDLE),
        Some((first, rest)) => rest.iter().fold(first.graph.clone(), |g, c| kron_product(&g, &c.graph)),
    };
    let mut requests = Vec::new();
    for label in graph.labels() {
        let parts: Vec<&str> = if channels.is_empty() {
            vec![IDLE]
        } else {
            label.split(LABEL_SEP).collect()
        };
        let mut inputs: BTreeMap<usize, Option<f64>> = BTreeMap::new();
        let mut outputs: BTreeMap<usize, Option<f64>> = BTreeMap::new();
        for (c, part) in channels.iter().zip(&parts) {
            if *part == IDLE {
                continue;
            }
            let slot = match c.kind {
                ChannelKind::Sensor => outputs.entry(c.index).or_insert(c.bound),
                ChannelKind::Actuator => inputs.entry(c.index).or_insert(c.bound),
            };
            // Two channels on one signal: keep the looser bound.
            *slot = match (*slot, c.bound) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
        requests.push(ModeRequest {
            label,
            selection: ChannelSelection {
                attacked_inputs: inputs.keys().copied().collect(),
                attacked_outputs: outputs.keys().copied().collect(),
            },
            input_bounds: inputs.values().copied().collect(),
            output_bounds: outputs.values().copied().collect(),
        });
    }
    (graph, requests)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(g: &AttackGraph, w: &Walk) -> String {
        let _ = g;
        w.labels.concat()
    }

    #[test]
    fn dwell_shapes() {
        let g = build_dwell_graph(2, 1).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.edges().len(), 5);
        let h = build_dwell_graph(1, 1).unwrap();
        assert_eq!(h.nodes().len(), 2);
        assert_eq!(h.edges().len(), 3);
        let z = build_dwell_graph(0, 1).unwrap();
        assert_eq!(z.nodes().len(), 1);
        assert_eq!(z.edges().len(), 1);
        assert!(matches!(build_dwell_graph(1, 0), Err(GraphError::InvalidDwell { .. })));
        assert_eq!(build_dwell_graph(3, 2).unwrap().nodes().len(), 5);
    }

    #[test]
    fn product_of_figure_factors() {
        let g = kron_product(&build_dwell_graph(2, 1).unwrap(), &build_dwell_graph(1, 1).unwrap());
        assert_eq!(g.nodes().len(), 6);
        assert_eq!(g.edges().len(), 15);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn sink_is_reported() {
        let g = AttackGraph::new(
            vec!["a".into(), "b".into()],
            vec![("a".into(), "b".into(), "N".into())],
        )
        .unwrap();
        assert_eq!(g.validate(), Err(vec![Violation::Sink("b".into())]));
    }

    #[test]
    fn words_exclude_three_attacks() {
        let g = build_dwell_graph(2, 1).unwrap();
        let a = g.node_index("a1").unwrap();
        let words = g.enumerate_words(3, &[a]);
        assert!(words.iter().all(|w| names(&g, w) != "AAA"));
        assert!(!words.is_empty());
        let single = AttackGraph::single_loop("N");
        assert_eq!(single.enumerate_words(5, &[0]).len(), 1);
    }

    #[test]
    fn composite_modes() {
        let sensor = Channel {
            kind: ChannelKind::Sensor,
            index: 2,
            bound: Some(0.05),
            graph: build_dwell_graph(1, 1).unwrap(),
        };
        let actuator = Channel {
            kind: ChannelKind::Actuator,
            index: 1,
            bound: Some(0.01),
            graph: build_dwell_graph(1, 2).unwrap(),
        };
        let (_, req) = compose_modes(&[sensor.clone()]);
        let a = req.iter().find(|r| r.label == "A").unwrap();
        assert_eq!(a.selection.attacked_outputs, vec![2]);
        assert!(a.selection.attacked_inputs.is_empty());
        let (g, req) = compose_modes(&[sensor, actuator]);
        assert_eq!(g.nodes().len(), 2 * 3);
        assert!(req.iter().find(|r| r.label == "N,N").unwrap().selection.is_nominal());
        let both = req.iter().find(|r| r.label == "A,A").unwrap();
        assert_eq!(both.selection.attacked_inputs, vec![1]);
        assert_eq!(both.selection.attacked_outputs, vec![2]);
        assert_eq!(both.input_bounds, vec![Some(0.01)]);
    }

    #[test]
    fn json_edges() {
        let g = build_dwell_graph(1, 1).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains(r#"["n0","a1","A"]"#));
        let back: AttackGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
