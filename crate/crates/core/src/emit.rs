//! Deterministic serializers: DOT for graphs and condensations, a JSON
//! analysis document, adjacency-matrix CSV, and simulation CSV.
//!
//! Identical inputs always produce identical bytes: nodes are emitted in
//! index order, edges sorted by `(source, target)`, JSON keys sorted, and
//! numbers printed with the shortest decimal form that round-trips.

use serde::{Deserialize, Serialize};

use crate::analysis::{DependencyGraph, SparsityPattern};
use crate::graph::{topological_order, CondensationDag, DirectedGraph, SccPartition};
use crate::solver::SimulationResult;

/// Rendering direction for DOT output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankDir {
    LeftRight,
    TopBottom,
}

impl RankDir {
    fn dot_value(self) -> &'static str {
        match self {
            RankDir::LeftRight => "LR",
            RankDir::TopBottom => "TB",
        }
    }
}

/// Visual conventions for DOT output: loop-free variables are green nodes,
/// contracted cycles are red metanodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DotStyle {
    /// DOT graph identifier.
    pub graph_name: String,
    /// Render metanode internals as cluster subgraphs instead of single
    /// contracted nodes.
    pub expand_sccs: bool,
    /// Fill for acyclic nodes (6-digit hex).
    pub trivial_fill: String,
    /// Fill for cyclic metanodes (6-digit hex).
    pub nontrivial_fill: String,
    pub rankdir: RankDir,
}

impl Default for DotStyle {
    fn default() -> Self {
        DotStyle {
            graph_name: "G".into(),
            expand_sccs: false,
            trivial_fill: "#90ee90".into(),
            nontrivial_fill: "#f08080".into(),
            rankdir: RankDir::LeftRight,
        }
    }
}

impl DotStyle {
    pub fn named(name: &str) -> DotStyle {
        DotStyle {
            graph_name: name.into(),
            ..DotStyle::default()
        }
    }

    /// Both fills must be `#` followed by six hex digits.
    pub fn validate(&self) -> Result<(), String> {
        for color in [&self.trivial_fill, &self.nontrivial_fill] {
            let ok = color.len() == 7
                && color.starts_with('#')
                && color[1..].bytes().all(|b| b.is_ascii_hexdigit());
            if !ok {
                return Err(format!("'{color}' is not a 6-digit hex color"));
            }
        }
        Ok(())
    }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Emits a plain dependency digraph as DOT text.
pub fn emit_dot_graph(g: &DirectedGraph, style: &DotStyle) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", dot_quote(&style.graph_name)));
    out.push_str(&format!("  rankdir={};\n", style.rankdir.dot_value()));
    out.push_str("  node [style=filled];\n");
    for i in 0..g.n() {
        out.push_str(&format!(
            "  {} [fillcolor={}];\n",
            dot_quote(g.label(i)),
            dot_quote(&style.trivial_fill)
        ));
    }
    for (u, v) in g.edges() {
        out.push_str(&format!(
            "  {} -> {};\n",
            dot_quote(g.label(u)),
            dot_quote(g.label(v))
        ));
    }
    out.push_str("}\n");
    out
}

// Identifier used for a metanode in DOT output: singletons borrow their
// member's label, contracted cycles get a synthetic SCC_k id.
fn metanode_id(d: &CondensationDag, comp: usize) -> String {
    let meta = &d.metanodes[comp];
    if meta.nontrivial {
        format!("SCC_{comp}")
    } else {
        d.source.label(meta.members[0]).to_string()
    }
}

/// Emits a condensation DAG as DOT text.
///
/// Collapsed mode (default) draws one node per metanode; cyclic metanodes
/// are filled with the nontrivial color and carry a member tooltip.
/// Expanded mode draws cyclic metanodes as cluster subgraphs containing the
/// member nodes and intra-SCC edges, with the original node-level edges
/// between components.
pub fn emit_dot_condensation(d: &CondensationDag, style: &DotStyle) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", dot_quote(&style.graph_name)));
    out.push_str(&format!("  rankdir={};\n", style.rankdir.dot_value()));
    out.push_str("  node [style=filled];\n");

    if style.expand_sccs {
        for (ci, meta) in d.metanodes.iter().enumerate() {
            if meta.nontrivial {
                out.push_str(&format!("  subgraph cluster_{ci} {{\n"));
                out.push_str(&format!("    label={};\n", dot_quote(&format!("SCC_{ci}"))));
                out.push_str(&format!("    color={};\n", dot_quote(&style.nontrivial_fill)));
                for &v in &meta.members {
                    out.push_str(&format!(
                        "    {} [fillcolor={}];\n",
                        dot_quote(d.source.label(v)),
                        dot_quote(&style.nontrivial_fill)
                    ));
                }
                for (u, v) in d.source.edges() {
                    if meta.members.contains(&u) && meta.members.contains(&v) {
                        out.push_str(&format!(
                            "    {} -> {};\n",
                            dot_quote(d.source.label(u)),
                            dot_quote(d.source.label(v))
                        ));
                    }
                }
                out.push_str("  }\n");
            } else {
                out.push_str(&format!(
                    "  {} [fillcolor={}];\n",
                    dot_quote(d.source.label(meta.members[0])),
                    dot_quote(&style.trivial_fill)
                ));
            }
        }
        for (u, v) in d.source.edges() {
            if d.partition.component_of[u] != d.partition.component_of[v] {
                out.push_str(&format!(
                    "  {} -> {};\n",
                    dot_quote(d.source.label(u)),
                    dot_quote(d.source.label(v))
                ));
            }
        }
    } else {
        for (ci, meta) in d.metanodes.iter().enumerate() {
            if meta.nontrivial {
                let members: Vec<&str> =
                    meta.members.iter().map(|&v| d.source.label(v)).collect();
                out.push_str(&format!(
                    "  {} [shape=box, label={}, fillcolor={}, tooltip={}];\n",
                    dot_quote(&format!("SCC_{ci}")),
                    dot_quote(&format!("SCC_{ci} ({} vars)", meta.members.len())),
                    dot_quote(&style.nontrivial_fill),
                    dot_quote(&members.join(", "))
                ));
            } else {
                out.push_str(&format!(
                    "  {} [fillcolor={}];\n",
                    dot_quote(d.source.label(meta.members[0])),
                    dot_quote(&style.trivial_fill)
                ));
            }
        }
        for &(a, b) in &d.edges {
            out.push_str(&format!(
                "  {} -> {};\n",
                dot_quote(&metanode_id(d, a)),
                dot_quote(&metanode_id(d, b))
            ));
        }
    }
    out.push_str("}\n");
    out
}

// JSON document schema. Field names are alphabetical at every level so the
// serialized keys come out sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonNode {
    pub index: usize,
    pub label: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonEdge {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonScc {
    pub members: Vec<usize>,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonCondensation {
    pub edges: Vec<JsonEdge>,
}

/// The full analysis document emitted by [`emit_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonDocument {
    pub condensation: JsonCondensation,
    pub edges: Vec<JsonEdge>,
    pub nodes: Vec<JsonNode>,
    pub sccs: Vec<JsonScc>,
    pub topological_order: Vec<usize>,
}

/// Builds the analysis document for a dependency graph with its SCC
/// partition and condensation.
pub fn json_document(
    dep: &DependencyGraph,
    partition: &SccPartition,
    dag: &CondensationDag,
) -> JsonDocument {
    let nodes = (0..dep.graph.n())
        .map(|i| JsonNode {
            index: i,
            label: dep.graph.label(i).to_string(),
            role: if dep.is_endogenous(i) {
                "endogenous".into()
            } else {
                "exogenous".into()
            },
        })
        .collect();
    let edges = dep
        .graph
        .edges()
        .into_iter()
        .map(|(source, target)| JsonEdge { source, target })
        .collect();
    let sccs = partition
        .components
        .iter()
        .zip(&partition.nontrivial)
        .map(|(members, &nontrivial)| JsonScc {
            members: members.clone(),
            nontrivial,
        })
        .collect();
    let condensation = JsonCondensation {
        edges: dag
            .edges
            .iter()
            .map(|&(source, target)| JsonEdge { source, target })
            .collect(),
    };
    let topological_order = topological_order(dag).unwrap_or_default();
    JsonDocument {
        condensation,
        edges,
        nodes,
        sccs,
        topological_order,
    }
}

/// Serializes the analysis document as pretty-printed JSON with sorted keys.
pub fn emit_json(
    dep: &DependencyGraph,
    partition: &SccPartition,
    dag: &CondensationDag,
) -> String {
    let doc = json_document(dep, partition, dag);
    serde_json::to_string_pretty(&doc).expect("document serializes")
}

/// Emits the structural sparsity pattern as a 0/1 matrix in CSV form with a
/// label header row and column.
pub fn emit_adjacency_csv(p: &SparsityPattern, labels: &[String]) -> String {
    let mut out = String::new();
    out.push(',');
    out.push_str(&labels.join(","));
    out.push('\n');
    for (i, label) in labels.iter().enumerate().take(p.n) {
        out.push_str(label);
        for j in 0..p.n {
            out.push(',');
            out.push(if p.contains(i, j) { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Emits simulation output as CSV: one row per period, a `period` column,
/// then every variable in declaration order. Values print in shortest
/// round-trip decimal form, so re-parsing reproduces them bit-exactly.
pub fn emit_simulation_csv(r: &SimulationResult) -> String {
    let mut out = String::new();
    out.push_str("period");
    for v in &r.variables {
        out.push(',');
        out.push_str(v);
    }
    out.push('\n');
    for record in &r.records {
        out.push_str(&record.period.to_string());
        for v in &record.values {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_dependency_graph, structural_jacobian};
    use crate::graph::{condense, tarjan_scc};
    use crate::model::parse_model;
    use crate::solver::{simulate, SolverOptions};

    fn chain_graph() -> DirectedGraph {
        let mut g = DirectedGraph::new(vec!["A".into(), "B".into()]);
        g.add_edge(0, 1).unwrap();
        g
    }

    #[test]
    fn dot_graph_contains_nodes_and_edges() {
        let text = emit_dot_graph(&chain_graph(), &DotStyle::default());
        assert!(text.contains("\"A\" -> \"B\";"));
        assert!(text.contains("\"A\" [fillcolor=\"#90ee90\"];"));
        assert!(text.starts_with("digraph \"G\" {"));
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn condensation_marks_nontrivial_metanodes_red() {
        let m = parse_model("var A, B, C\nA = B\nB = A\nC = A").unwrap();
        let dep = build_dependency_graph(&m);
        let p = tarjan_scc(&dep.graph);
        let dag = condense(&dep.graph, &p).unwrap();
        let text = emit_dot_condensation(&dag, &DotStyle::default());
        assert!(text.contains("\"SCC_0\" [shape=box, label=\"SCC_0 (2 vars)\", fillcolor=\"#f08080\", tooltip=\"A, B\"];"));
        assert!(text.contains("\"C\" [fillcolor=\"#90ee90\"];"));
        assert!(text.contains("\"SCC_0\" -> \"C\";"));
    }

    #[test]
    fn expanded_condensation_uses_clusters() {
        let m = parse_model("var A, B, C\nA = B\nB = A\nC = A").unwrap();
        let dep = build_dependency_graph(&m);
        let p = tarjan_scc(&dep.graph);
        let dag = condense(&dep.graph, &p).unwrap();
        let style = DotStyle {
            expand_sccs: true,
            ..DotStyle::default()
        };
        let text = emit_dot_condensation(&dag, &style);
        assert!(text.contains("subgraph cluster_0 {"));
        assert!(text.contains("    \"A\" -> \"B\";"));
        assert!(text.contains("    \"B\" -> \"A\";"));
        assert!(text.contains("  \"A\" -> \"C\";"));
    }

    #[test]
    fn json_document_roundtrips_and_is_deterministic() {
        let m = parse_model("var Y, C\nexo G = 20\nY = C + G\nC = 0.5 * Y").unwrap();
        let dep = build_dependency_graph(&m);
        let p = tarjan_scc(&dep.graph);
        let dag = condense(&dep.graph, &p).unwrap();
        let text = emit_json(&dep, &p, &dag);
        assert_eq!(text, emit_json(&dep, &p, &dag));
        let parsed: JsonDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, json_document(&dep, &p, &dag));
        assert_eq!(parsed.nodes[2].role, "exogenous");
    }

    #[test]
    fn empty_model_emits_empty_arrays() {
        let m = parse_model("").unwrap();
        let dep = build_dependency_graph(&m);
        let p = tarjan_scc(&dep.graph);
        let dag = condense(&dep.graph, &p).unwrap();
        let doc = json_document(&dep, &p, &dag);
        assert!(doc.nodes.is_empty());
        assert!(doc.edges.is_empty());
        assert!(doc.sccs.is_empty());
        assert!(doc.topological_order.is_empty());
    }

    #[test]
    fn adjacency_csv_layout() {
        let m = parse_model("var Y\nexo C = 1\nexo G = 2\nY = C + G").unwrap();
        let p = structural_jacobian(&m);
        let text = emit_adjacency_csv(&p, &m.var_labels());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ",Y,C,G");
        assert_eq!(lines[1], "Y,0,1,1");
        assert_eq!(lines[2], "C,0,0,0");
        assert_eq!(lines[3], "G,0,0,0");
    }

    #[test]
    fn adjacency_csv_reparses_to_the_same_pattern() {
        let m = parse_model("var Y, T\nexo G = 1\nY = T + G\nT = 0.2 * Y").unwrap();
        let p = structural_jacobian(&m);
        let text = emit_adjacency_csv(&p, &m.var_labels());
        let mut rows = vec![Vec::new(); p.n];
        for (i, line) in text.lines().skip(1).enumerate() {
            for (j, cell) in line.split(',').skip(1).enumerate() {
                if cell == "1" {
                    rows[i].push(j);
                }
            }
        }
        assert_eq!(rows, p.rows);
    }

    #[test]
    fn empty_pattern_is_header_only() {
        let p = SparsityPattern { n: 0, rows: vec![] };
        assert_eq!(emit_adjacency_csv(&p, &[]), ",\n");
    }

    #[test]
    fn simulation_csv_reparses_bit_exactly() {
        let m = parse_model(
            "var H, Y\nexo G = 20\ninit H = 0\nY = G + 0.3 * H[-1]\nH = H[-1] + Y / 3",
        )
        .unwrap();
        let opts = SolverOptions {
            periods: 3,
            ..SolverOptions::default()
        };
        let r = simulate(&m, &opts).unwrap();
        let text = emit_simulation_csv(&r);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "period,H,Y,G");
        for (record, line) in r.records.iter().zip(lines.iter().skip(1)) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[0].parse::<usize>().unwrap(), record.period);
            for (v, cell) in record.values.iter().zip(cells.iter().skip(1)) {
                let parsed: f64 = cell.parse().unwrap();
                assert_eq!(parsed.to_bits(), v.to_bits(), "cell {cell}");
            }
        }
    }

    #[test]
    fn style_colors_are_validated() {
        let mut style = DotStyle::default();
        assert!(style.validate().is_ok());
        style.trivial_fill = "green".into();
        assert!(style.validate().is_err());
        style.trivial_fill = "#12345g".into();
        assert!(style.validate().is_err());
    }
}
