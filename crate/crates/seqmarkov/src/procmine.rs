//! Stochastic process mining: empirical transition-rate estimation,
//! thresholded transition graphs with initial-probability node annotations,
//! per-cluster and per-group maps, and signed difference maps.
//!
//! Graphs are exported as DOT text and JSON; rendering and layout are
//! delegated to external engines. Nodes are always emitted in alphabet
//! order, and a fixed graph-level `start` seed attribute makes force-layout
//! renderers deterministic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{estimate_mm, MarkovModel, MmEstimate, ProbabilityVector, TransitionMatrix};
use crate::mixture::{ClusterModel, MixtureModel};
use crate::seqdata::SequenceSet;

/// Layout seed emitted as the DOT graph-level `start` attribute.
const DOT_LAYOUT_SEED: u32 = 42;
/// DOT pen widths: normal edges versus faded (below-`cut`) edges.
const DOT_PENWIDTH_NORMAL: f64 = 1.8;
const DOT_PENWIDTH_FADED: f64 = 0.6;

/// Display thresholds of a process map: edges below `minimum` are hidden,
/// edges in `[minimum, cut)` are de-emphasized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub cut: f64,
    pub minimum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    /// Initial-probability annotation in [0, 1] (pie size in the source
    /// figures).
    pub initial: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub p: f64,
    pub faded: bool,
}

/// A thresholded transition graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub thresholds: Thresholds,
}

/// Transition probabilities of the full panel; identical to the transition
/// component of [`estimate_mm`].
pub fn seqtrate(s: &SequenceSet) -> Result<TransitionMatrix> {
    Ok(estimate_mm(s)?.model.transitions)
}

/// Build a process graph from a transition matrix and an initial-probability
/// vector. Edges with probability below `minimum` are omitted; edges in
/// `[minimum, cut)` are marked faded; self-loops are kept. Nodes follow the
/// matrix label order.
pub fn build_process_graph(
    transitions: &TransitionMatrix,
    initial: &ProbabilityVector,
    cut: f64,
    minimum: f64,
    colors: Option<&[String]>,
) -> Result<ProcessGraph> {
    if !(0.0..=1.0).contains(&minimum) || !(0.0..=1.0).contains(&cut) || minimum > cut {
        return Err(Error::InvalidInput(format!(
            "thresholds must satisfy 0 <= minimum <= cut <= 1; got minimum={minimum}, cut={cut}"
        )));
    }
    if initial.len() != transitions.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "initial vector has {} entries for {} states",
            initial.len(),
            transitions.n_states()
        )));
    }
    if let Some(c) = colors {
        if c.len() != transitions.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "{} colors for {} states",
                c.len(),
                transitions.n_states()
            )));
        }
    }
    let labels = transitions.labels();
    let nodes = labels
        .iter()
        .enumerate()
        .map(|(i, label)| GraphNode {
            label: label.clone(),
            initial: initial.get(i),
            color: colors.map(|c| c[i].clone()),
        })
        .collect();
    let mut edges = Vec::new();
    for (r, from) in labels.iter().enumerate() {
        for (c, to) in labels.iter().enumerate() {
            let p = transitions.get(r, c);
            if p < minimum {
                continue;
            }
            edges.push(GraphEdge { from: from.clone(), to: to.clone(), p, faded: p < cut });
        }
    }
    Ok(ProcessGraph { nodes, edges, thresholds: Thresholds { cut, minimum } })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl ProcessGraph {
    /// DOT text. Faded edges carry `style="dashed"` and a reduced
    /// `penwidth`; edge labels are probabilities rounded to 2 decimals; the
    /// node label carries the initial probability on a second line.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
        let _ = writeln!(out, "  graph [start={DOT_LAYOUT_SEED}];");
        let _ = writeln!(out, "  node [shape=circle, style=filled, fillcolor=white];");
        for node in &self.nodes {
            let mut attrs = format!(
                "label=\"{}\\n{:.2}\"",
                dot_escape(&node.label),
                node.initial
            );
            if let Some(color) = &node.color {
                let _ = write!(attrs, ", fillcolor=\"{}\"", dot_escape(color));
            }
            let _ = writeln!(out, "  \"{}\" [{attrs}];", dot_escape(&node.label));
        }
        for edge in &self.edges {
            let style = if edge.faded {
                format!("style=\"dashed\", penwidth={DOT_PENWIDTH_FADED}")
            } else {
                format!("penwidth={DOT_PENWIDTH_NORMAL}")
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.2}\", {style}];",
                dot_escape(&edge.from),
                dot_escape(&edge.to),
                edge.p
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEdge {
    pub from: String,
    pub to: String,
    /// Signed weight `b − a` for the edge.
    pub weight: f64,
    pub sign: Sign,
}

/// Signed difference map between two transition matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffGraph {
    pub labels: Vec<String>,
    pub edges: Vec<DiffEdge>,
    pub minimum: f64,
}

/// Edge weights are `b − a`; entries with `|b − a| < minimum` are dropped.
pub fn diff_graph(a: &TransitionMatrix, b: &TransitionMatrix, minimum: f64) -> Result<DiffGraph> {
    if a.n_states() != b.n_states() || a.labels() != b.labels() {
        return Err(Error::DimensionMismatch(
            "difference map needs matrices with identical shape and labels".into(),
        ));
    }
    let labels = a.labels();
    let mut edges = Vec::new();
    for (r, from) in labels.iter().enumerate() {
        for (c, to) in labels.iter().enumerate() {
            let weight = b.get(r, c) - a.get(r, c);
            if weight.abs() < minimum || weight == 0.0 {
                continue;
            }
            edges.push(DiffEdge {
                from: from.clone(),
                to: to.clone(),
                weight,
                sign: if weight > 0.0 { Sign::Positive } else { Sign::Negative },
            });
        }
    }
    Ok(DiffGraph { labels: labels.to_vec(), edges, minimum })
}

impl DiffGraph {
    /// DOT text: positive edges blue, negative edges red, weights labeled
    /// with 2 decimals.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
        let _ = writeln!(out, "  graph [start={DOT_LAYOUT_SEED}];");
        let _ = writeln!(out, "  node [shape=circle, style=filled, fillcolor=white];");
        for label in &self.labels {
            let _ = writeln!(out, "  \"{}\";", dot_escape(label));
        }
        for edge in &self.edges {
            let color = match edge.sign {
                Sign::Positive => "blue",
                Sign::Negative => "red",
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.2}\", color={color}, penwidth={DOT_PENWIDTH_NORMAL}];",
                dot_escape(&edge.from),
                dot_escape(&edge.to),
                edge.weight
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fit one Markov model per group of sequences. Group labels are aligned
/// positionally with the panel rows.
pub fn group_models(
    s: &SequenceSet,
    groups: &[String],
) -> Result<BTreeMap<String, MmEstimate>> {
    if groups.len() != s.n_sequences() {
        return Err(Error::DimensionMismatch(format!(
            "{} group labels for {} sequences",
            groups.len(),
            s.n_sequences()
        )));
    }
    let mut by_group: BTreeMap<String, Vec<Vec<crate::seqdata::Cell>>> = BTreeMap::new();
    let mut ids_by_group: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for ((row, group), id) in s.rows().zip(groups).zip(s.ids()) {
        by_group.entry(group.clone()).or_default().push(row.to_vec());
        ids_by_group.entry(group.clone()).or_default().push(id.clone());
    }
    let mut out = BTreeMap::new();
    for (group, rows) in by_group {
        let ids = ids_by_group.remove(&group).expect("same keys");
        let subset = SequenceSet::new(s.alphabet().clone(), ids, rows)?;
        let fit = estimate_mm(&subset)
            .map_err(|e| Error::Estimation(format!("group {group:?}: {e}")))?;
        out.insert(group, fit);
    }
    Ok(out)
}

/// One process graph per cluster of a mixture Markov model, sharing node
/// label order across clusters. The node annotation is the within-cluster
/// initial vector.
pub fn cluster_process_maps(
    m: &MixtureModel,
    cut: f64,
    minimum: f64,
) -> Result<Vec<ProcessGraph>> {
    let colors = m.alphabet().colors().map(<[String]>::to_vec);
    m.clusters
        .iter()
        .map(|cluster| match cluster {
            ClusterModel::Markov(mm) => {
                build_process_graph(&mm.transitions, &mm.initial, cut, minimum, colors.as_deref())
            }
            ClusterModel::Hidden(_) => Err(Error::InvalidInput(
                "cluster process maps need Markov clusters (transition probabilities over observed states)"
                    .into(),
            )),
        })
        .collect()
}

/// Process graph of a fitted Markov model.
pub fn model_process_graph(m: &MarkovModel, cut: f64, minimum: f64) -> Result<ProcessGraph> {
    let colors = m.alphabet.colors().map(<[String]>::to_vec);
    build_process_graph(&m.transitions, &m.initial, cut, minimum, colors.as_deref())
}
