//! Directed-graph core: SCC partition (Tarjan), condensation into the unique
//! metanode DAG, topological ordering, an exact acyclicity test, reachability,
//! and a brute-force elementary-cycle enumerator used as a test oracle.
//!
//! Everything here is deterministic: components are canonically sorted by
//! smallest member index, adjacency lists are kept sorted, and orderings
//! break ties by index.

use std::collections::BTreeSet;

/// Largest graph [`enumerate_cycles`] will accept; enumeration is
/// exponential and exists as a test oracle only.
pub const CYCLE_ENUMERATION_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("node index {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("partition inconsistent with graph: {0}")]
    PartitionMismatch(String),
    #[error("cycle detected in a condensation graph; this is a bug")]
    CondensationCycle,
    #[error("graph has {n} nodes, above the cycle-enumeration guard of {limit}")]
    TooLargeToEnumerate { n: usize, limit: usize },
}

/// A directed graph over indexed, labelled nodes. Self-loops are permitted;
/// duplicate edges are not (adding one is a no-op).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    labels: Vec<String>,
    successors: Vec<Vec<usize>>,
}

impl DirectedGraph {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        DirectedGraph {
            labels,
            successors: vec![Vec::new(); n],
        }
    }

    /// A graph with placeholder labels `v0..v{n-1}`, for tests and
    /// synthetic inputs.
    pub fn unlabeled(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("v{i}")).collect())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Inserts the edge `from -> to`, keeping adjacency sorted. Returns
    /// `false` if the edge was already present.
    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<bool, GraphError> {
        let n = self.n();
        for node in [from, to] {
            if node >= n {
                return Err(GraphError::NodeOutOfRange { node, n });
            }
        }
        match self.successors[from].binary_search(&to) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.successors[from].insert(pos, to);
                Ok(true)
            }
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.successors
            .get(from)
            .map(|s| s.binary_search(&to).is_ok())
            .unwrap_or(false)
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.successors[node]
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(|s| s.len()).sum()
    }

    /// All edges as `(source, target)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, succ) in self.successors.iter().enumerate() {
            for &v in succ {
                out.push((u, v));
            }
        }
        out
    }

    /// The same graph with every edge reversed.
    pub fn reversed(&self) -> DirectedGraph {
        let mut rev = DirectedGraph::new(self.labels.clone());
        for (u, v) in self.edges() {
            let _ = rev.add_edge(v, u);
        }
        rev
    }
}

/// The unique partition of a graph into strongly connected components.
///
/// Components are canonically ordered by smallest member index and each
/// member list is sorted, so equal graphs always yield equal partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SccPartition {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    /// True for components containing a cycle: size >= 2, or a singleton
    /// with a self-loop.
    pub nontrivial: Vec<bool>,
}

impl SccPartition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn nontrivial_count(&self) -> usize {
        self.nontrivial.iter().filter(|&&f| f).count()
    }
}

struct TarjanState<'g> {
    graph: &'g DirectedGraph,
    index: usize,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    order: Vec<Option<usize>>,
    low: Vec<usize>,
    components: Vec<Vec<usize>>,
}

fn strongconnect(v: usize, st: &mut TarjanState) {
    st.order[v] = Some(st.index);
    st.low[v] = st.index;
    st.index += 1;
    st.stack.push(v);
    st.on_stack[v] = true;

    for &w in st.graph.successors(v) {
        if st.order[w].is_none() {
            strongconnect(w, st);
            st.low[v] = st.low[v].min(st.low[w]);
        } else if st.on_stack[w] {
            st.low[v] = st.low[v].min(st.order[w].unwrap());
        }
    }

    if st.low[v] == st.order[v].unwrap() {
        let mut component = Vec::new();
        loop {
            let w = st.stack.pop().expect("tarjan stack underflow");
            st.on_stack[w] = false;
            component.push(w);
            if w == v {
                break;
            }
        }
        st.components.push(component);
    }
}

/// Tarjan's strongly-connected-components algorithm.
///
/// The algorithm emits components in reverse topological completion order;
/// the result is then re-sorted by smallest member index so the partition is
/// canonical regardless of traversal order.
pub fn tarjan_scc(g: &DirectedGraph) -> SccPartition {
    let n = g.n();
    let mut st = TarjanState {
        graph: g,
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        order: vec![None; n],
        low: vec![0; n],
        components: Vec::new(),
    };
    for v in 0..n {
        if st.order[v].is_none() {
            strongconnect(v, &mut st);
        }
    }

    let mut components = st.components;
    for c in &mut components {
        c.sort_unstable();
    }
    components.sort_unstable_by_key(|c| c[0]);

    let mut component_of = vec![usize::MAX; n];
    for (ci, c) in components.iter().enumerate() {
        for &v in c {
            component_of[v] = ci;
        }
    }
    let nontrivial = components
        .iter()
        .map(|c| c.len() >= 2 || g.has_edge(c[0], c[0]))
        .collect();

    SccPartition {
        components,
        component_of,
        nontrivial,
    }
}

/// One contracted SCC in a condensation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaNode {
    pub members: Vec<usize>,
    pub nontrivial: bool,
}

/// The condensation DAG: one metanode per SCC, meta-edges between distinct
/// components. Carries its source graph and partition so downstream
/// consumers (ordering, emitters) need nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensationDag {
    pub metanodes: Vec<MetaNode>,
    /// Deduplicated meta-edges `(component, component)`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub partition: SccPartition,
    pub source: DirectedGraph,
}

impl CondensationDag {
    pub fn meta_successors(&self, component: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(a, _)| *a == component)
            .map(|(_, b)| *b)
    }
}

/// Contracts each strongly connected component of `g` to a metanode.
///
/// The partition is checked for structural consistency with the graph, and
/// the construction verifies the result is acyclic; a cyclic result means
/// `p` was not the true SCC partition of `g`.
pub fn condense(g: &DirectedGraph, p: &SccPartition) -> Result<CondensationDag, GraphError> {
    let n = g.n();
    if p.component_of.len() != n {
        return Err(GraphError::PartitionMismatch(format!(
            "partition covers {} nodes, graph has {n}",
            p.component_of.len()
        )));
    }
    let mut seen = vec![false; n];
    for (ci, c) in p.components.iter().enumerate() {
        if c.is_empty() {
            return Err(GraphError::PartitionMismatch(format!(
                "component {ci} is empty"
            )));
        }
        for &v in c {
            if v >= n {
                return Err(GraphError::PartitionMismatch(format!(
                    "component {ci} contains out-of-range node {v}"
                )));
            }
            if seen[v] {
                return Err(GraphError::PartitionMismatch(format!(
                    "node {v} appears in two components"
                )));
            }
            seen[v] = true;
            if p.component_of[v] != ci {
                return Err(GraphError::PartitionMismatch(format!(
                    "component_of[{v}] disagrees with membership"
                )));
            }
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(GraphError::PartitionMismatch(
            "partition does not cover every node".into(),
        ));
    }

    let mut meta_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (u, v) in g.edges() {
        let (cu, cv) = (p.component_of[u], p.component_of[v]);
        if cu != cv {
            meta_edges.insert((cu, cv));
        }
    }
    let metanodes = p
        .components
        .iter()
        .zip(&p.nontrivial)
        .map(|(members, &nontrivial)| MetaNode {
            members: members.clone(),
            nontrivial,
        })
        .collect();
    let dag = CondensationDag {
        metanodes,
        edges: meta_edges.into_iter().collect(),
        partition: p.clone(),
        source: g.clone(),
    };

    // A cyclic meta-graph means the partition merged or split true SCCs.
    if kahn_order(dag.metanodes.len(), &dag.edges).is_none() {
        return Err(GraphError::PartitionMismatch(
            "condensation of the given partition is cyclic".into(),
        ));
    }
    Ok(dag)
}

// Kahn's algorithm over an edge list; ties resolved by smallest index.
// Returns None when a cycle prevents completion.
fn kahn_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    for &(_, b) in edges {
        indegree[b] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&next) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for &(a, b) in edges {
            if a == next {
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    ready.insert(b);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Topological order of the condensation's metanodes. Every meta-edge points
/// forward in the returned list; ties are broken by smallest member node
/// index. A cycle here would contradict the condensation construction, so it
/// is reported as an internal error.
pub fn topological_order(d: &CondensationDag) -> Result<Vec<usize>, GraphError> {
    // Metanodes are already sorted by smallest member, so index order is
    // exactly the smallest-member tie-break.
    kahn_order(d.metanodes.len(), &d.edges).ok_or(GraphError::CondensationCycle)
}

/// Exact acyclicity test via boolean-matrix nilpotency.
///
/// A directed graph is acyclic iff its adjacency matrix `A` satisfies
/// `A^k = 0` for some `k <= n`, which repeated boolean squaring decides
/// without floating-point eigenvalues. Self-loops make the diagonal nonzero
/// and are therefore detected like any other cycle.
pub fn is_acyclic_nilpotency(g: &DirectedGraph) -> bool {
    let n = g.n();
    if n == 0 {
        return true;
    }
    let words = n.div_ceil(64);
    // rows[i] holds the bitset of successors of i.
    let mut rows = vec![vec![0u64; words]; n];
    for (u, v) in g.edges() {
        rows[u][v / 64] |= 1 << (v % 64);
    }

    let is_zero = |rows: &Vec<Vec<u64>>| rows.iter().all(|r| r.iter().all(|&w| w == 0));
    let mut power = rows;
    let mut k = 1usize;
    // Square until the represented power reaches at least n.
    loop {
        if is_zero(&power) {
            return true;
        }
        if k >= n {
            return false;
        }
        let mut next = vec![vec![0u64; words]; n];
        for i in 0..n {
            for j in 0..n {
                if power[i][j / 64] >> (j % 64) & 1 == 1 {
                    for w in 0..words {
                        next[i][w] |= power[j][w];
                    }
                }
            }
        }
        power = next;
        k *= 2;
    }
}

/// Every elementary cycle, each reported once, rotated to start at its
/// smallest node index. Guarded by `max_nodes` because enumeration is
/// exponential; the conventional guard is [`CYCLE_ENUMERATION_LIMIT`].
pub fn enumerate_cycles(
    g: &DirectedGraph,
    max_nodes: usize,
) -> Result<Vec<Vec<usize>>, GraphError> {
    let n = g.n();
    if n > max_nodes {
        return Err(GraphError::TooLargeToEnumerate { n, limit: max_nodes });
    }
    let mut cycles = Vec::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; n];

    // Anchor each cycle at its smallest node: DFS from `start` visiting
    // only nodes > start, closing when an edge returns to start.
    fn dfs(
        v: usize,
        start: usize,
        g: &DirectedGraph,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        cycles: &mut Vec<Vec<usize>>,
    ) {
        path.push(v);
        on_path[v] = true;
        for &w in g.successors(v) {
            if w == start {
                cycles.push(path.clone());
            } else if w > start && !on_path[w] {
                dfs(w, start, g, path, on_path, cycles);
            }
        }
        on_path[v] = false;
        path.pop();
    }

    for start in 0..n {
        dfs(start, start, g, &mut path, &mut on_path, &mut cycles);
    }
    cycles.sort();
    Ok(cycles)
}

fn reachable_from(g: &DirectedGraph, node: usize) -> Result<BTreeSet<usize>, GraphError> {
    if node >= g.n() {
        return Err(GraphError::NodeOutOfRange { node, n: g.n() });
    }
    let mut seen = BTreeSet::new();
    let mut queue: Vec<usize> = g.successors(node).to_vec();
    while let Some(v) = queue.pop() {
        if seen.insert(v) {
            queue.extend_from_slice(g.successors(v));
        }
    }
    Ok(seen)
}

/// All nodes reachable from `node` by directed paths of length >= 1 — the
/// downstream impact set of a variable. A node reaches itself only through
/// a cycle.
pub fn descendants(g: &DirectedGraph, node: usize) -> Result<BTreeSet<usize>, GraphError> {
    reachable_from(g, node)
}

/// Mirror of [`descendants`] on the edge-reversed graph: everything that can
/// influence `node`.
pub fn ancestors(g: &DirectedGraph, node: usize) -> Result<BTreeSet<usize>, GraphError> {
    reachable_from(&g.reversed(), node)
}
