//! Shared test support: a minimal DOT grammar checker, seeded random
//! digraphs, an independent topological-sort oracle, and a dense linear
//! solver used as the solver oracle.

#![allow(dead_code)]

use rand::Rng;
use sfcdag::graph::DirectedGraph;

// ---------------------------------------------------------------------------
// Minimal DOT grammar checker
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum DotTok {
    Id(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Eq,
    Arrow,
}

fn dot_tokenize(text: &str) -> Result<Vec<DotTok>, String> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] as char {
            c if c.is_whitespace() => i += 1,
            '{' => {
                toks.push(DotTok::LBrace);
                i += 1;
            }
            '}' => {
                toks.push(DotTok::RBrace);
                i += 1;
            }
            '[' => {
                toks.push(DotTok::LBracket);
                i += 1;
            }
            ']' => {
                toks.push(DotTok::RBracket);
                i += 1;
            }
            ';' => {
                toks.push(DotTok::Semi);
                i += 1;
            }
            ',' => {
                toks.push(DotTok::Comma);
                i += 1;
            }
            '=' => {
                toks.push(DotTok::Eq);
                i += 1;
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push(DotTok::Arrow);
                    i += 2;
                } else {
                    return Err(format!("stray '-' at byte {i}"));
                }
            }
            '"' => {
                let mut j = i + 1;
                let mut out = String::new();
                loop {
                    match bytes.get(j) {
                        Some(b'\\') => {
                            match bytes.get(j + 1) {
                                Some(&c) => out.push(c as char),
                                None => return Err("dangling escape in string".into()),
                            }
                            j += 2;
                        }
                        Some(b'"') => break,
                        Some(&c) => {
                            out.push(c as char);
                            j += 1;
                        }
                        None => return Err("unterminated string".into()),
                    }
                }
                toks.push(DotTok::Id(out));
                i = j + 1;
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '#' || c == '.' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' || c == '#' || c == '.' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                toks.push(DotTok::Id(text[start..i].to_string()));
            }
            other => return Err(format!("unexpected character '{other}'")),
        }
    }
    Ok(toks)
}

struct DotParser {
    toks: Vec<DotTok>,
    pos: usize,
}

impl DotParser {
    fn peek(&self) -> Option<&DotTok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<DotTok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: DotTok) -> Result<(), String> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(format!("expected {want:?}, found {other:?}")),
        }
    }

    fn expect_id(&mut self) -> Result<String, String> {
        match self.next() {
            Some(DotTok::Id(s)) => Ok(s),
            other => Err(format!("expected identifier, found {other:?}")),
        }
    }

    fn attr_list(&mut self) -> Result<(), String> {
        self.expect(DotTok::LBracket)?;
        if self.peek() != Some(&DotTok::RBracket) {
            loop {
                self.expect_id()?;
                self.expect(DotTok::Eq)?;
                self.expect_id()?;
                match self.peek() {
                    Some(DotTok::Comma) => {
                        self.next();
                    }
                    _ => break,
                }
            }
        }
        self.expect(DotTok::RBracket)
    }

    fn statements(&mut self) -> Result<(), String> {
        loop {
            match self.peek() {
                Some(DotTok::RBrace) | None => return Ok(()),
                _ => {}
            }
            let id = self.expect_id()?;
            if id == "subgraph" {
                self.expect_id()?;
                self.expect(DotTok::LBrace)?;
                self.statements()?;
                self.expect(DotTok::RBrace)?;
                continue;
            }
            match self.peek() {
                // rankdir=LR;
                Some(DotTok::Eq) => {
                    self.next();
                    self.expect_id()?;
                    self.expect(DotTok::Semi)?;
                }
                // node [..]; or A [..];
                Some(DotTok::LBracket) => {
                    self.attr_list()?;
                    self.expect(DotTok::Semi)?;
                }
                // A -> B [..];
                Some(DotTok::Arrow) => {
                    self.next();
                    self.expect_id()?;
                    if self.peek() == Some(&DotTok::LBracket) {
                        self.attr_list()?;
                    }
                    self.expect(DotTok::Semi)?;
                }
                // bare node;
                Some(DotTok::Semi) => {
                    self.next();
                }
                other => return Err(format!("unexpected token {other:?} after '{id}'")),
            }
        }
    }
}

/// Validates DOT text against a minimal digraph grammar; returns an error
/// describing the first violation.
pub fn check_dot(text: &str) -> Result<(), String> {
    let toks = dot_tokenize(text)?;
    let mut p = DotParser { toks, pos: 0 };
    let kw = p.expect_id()?;
    if kw != "digraph" {
        return Err(format!("expected 'digraph', found '{kw}'"));
    }
    if p.peek() != Some(&DotTok::LBrace) {
        p.expect_id()?;
    }
    p.expect(DotTok::LBrace)?;
    p.statements()?;
    p.expect(DotTok::RBrace)?;
    match p.next() {
        None => Ok(()),
        Some(t) => Err(format!("trailing token {t:?}")),
    }
}

// ---------------------------------------------------------------------------
// Random digraphs and independent graph oracles
// ---------------------------------------------------------------------------

/// A digraph on `n` nodes where each ordered pair (self-loops included)
/// carries an edge with probability `p`.
pub fn random_digraph(rng: &mut impl Rng, n: usize, p: f64) -> DirectedGraph {
    let mut g = DirectedGraph::unlabeled(n);
    for u in 0..n {
        for v in 0..n {
            if rng.random_bool(p) {
                g.add_edge(u, v).unwrap();
            }
        }
    }
    g
}

/// Relabels nodes: node `i` of `g` becomes node `perm[i]`.
pub fn permute_digraph(g: &DirectedGraph, perm: &[usize]) -> DirectedGraph {
    let mut labels = vec![String::new(); g.n()];
    for i in 0..g.n() {
        labels[perm[i]] = g.label(i).to_string();
    }
    let mut out = DirectedGraph::new(labels);
    for (u, v) in g.edges() {
        out.add_edge(perm[u], perm[v]).unwrap();
    }
    out
}

/// Kahn's algorithm on the node graph itself, written independently of the
/// library: does a topological order of the nodes exist?
pub fn node_topological_order_exists(g: &DirectedGraph) -> bool {
    let n = g.n();
    let mut indegree = vec![0usize; n];
    for (_, v) in g.edges() {
        indegree[v] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut removed = 0;
    while let Some(u) = queue.pop() {
        removed += 1;
        for &v in g.successors(u) {
            // A self-loop keeps its node's indegree pinned above zero, so
            // the node never enqueues and the sort cannot complete.
            if u == v {
                continue;
            }
            indegree[v] -= 1;
            if indegree[v] == 0 {
                queue.push(v);
            }
        }
    }
    removed == n
}

// ---------------------------------------------------------------------------
// Dense linear solve (oracle for the iterative solvers)
// ---------------------------------------------------------------------------

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .expect("finite matrix")
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}
