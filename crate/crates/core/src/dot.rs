//! Graphviz rendering of an explored chain.
//!
//! The initial state is drawn as an ellipse. States of bottom components are
//! rounded boxes grouped into one cluster per component; the rest are plain
//! boxes. Edges carry their probability and the joint action fired.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::AnalysisReport;
use crate::error::Result;
use crate::explorer::Dtmc;
use crate::io::write_atomic;

/// `x` rounded to six significant digits, trailing zeros dropped.
pub fn six_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn node_label(dtmc: &Dtmc, id: usize) -> String {
    if dtmc.is_sink(id) {
        return "⊥".into();
    }
    let state = &dtmc.states[id];
    match state.pure_action() {
        Some(a) => format!("s{id} d{} {a}", state.depth),
        None => format!("s{id} d{} mixed", state.depth),
    }
}

pub fn dot_string(dtmc: &Dtmc, analysis: &AnalysisReport) -> String {
    let mut cluster_of = vec![None; dtmc.num_nodes()];
    for (k, b) in analysis.bsccs.iter().enumerate() {
        for &m in &b.scc.members {
            cluster_of[m] = Some(k);
        }
    }
    let shape = |id: usize| {
        let mut attrs = if id == dtmc.initial_id {
            String::from("shape=ellipse")
        } else {
            String::from("shape=box")
        };
        if cluster_of[id].is_some() {
            attrs.push_str(", style=rounded");
        }
        attrs
    };

    let mut out = String::from("digraph dtmc {\n  rankdir=TB;\n");
    for id in (0..dtmc.num_nodes()).filter(|&id| cluster_of[id].is_none()) {
        let _ = writeln!(
            out,
            "  n{id} [label=\"{}\", {}];",
            node_label(dtmc, id),
            shape(id)
        );
    }
    for (k, b) in analysis.bsccs.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{k} {{");
        let _ = writeln!(
            out,
            "    label=\"{} p={}\";",
            b.classification.name(),
            six_significant(b.reach_probability)
        );
        for &m in &b.scc.members {
            let _ = writeln!(
                out,
                "    n{m} [label=\"{}\", {}];",
                node_label(dtmc, m),
                shape(m)
            );
        }
        out.push_str("  }\n");
    }
    for (from, edges) in dtmc.transitions.iter().enumerate() {
        for t in edges {
            let action = t
                .action
                .as_ref()
                .map(|a| format!(" {a}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "  n{from} -> n{} [label=\"{}{action}\"];",
                t.target,
                six_significant(t.probability)
            );
        }
    }
    out.push_str("}\n");
    out
}

pub fn export_dot(dtmc: &Dtmc, analysis: &AnalysisReport, path: &Path) -> Result<()> {
    write_atomic(path, dot_string(dtmc, analysis).as_bytes())
}
