//! Structural dependency analysis: the binary sparsity pattern of the model
//! Jacobian and the dependency digraph it induces.
//!
//! Causality is syntactic: variable `j` causes variable `i` iff `j` occurs
//! with lag 0 in the equation for `i`. Lagged references are predetermined
//! and parameters are constants, so neither creates an edge. The pointwise
//! numeric Jacobian is available as a diagnostic that cross-checks the
//! structural pattern at a chosen evaluation point.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::graph::DirectedGraph;
use crate::model::eval::{eval_expr, EvalError, ValueSource};
use crate::model::{Expr, Model};
use crate::solver::LagState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no value for variable '{0}' at the probe point")]
    MissingPointValue(String),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("evaluating equation for '{equation}': {source}")]
    Evaluation {
        equation: String,
        #[source]
        source: EvalError,
    },
}

/// The structural Jacobian sparsity pattern: `rows[i]` holds the sorted set
/// of variable indices `j` on which variable `i` directly depends. Rows of
/// exogenous variables are empty — they have no equations.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    pub n: usize,
    pub rows: Vec<Vec<usize>>,
}

impl SparsityPattern {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.rows
            .get(row)
            .map(|r| r.binary_search(&col).is_ok())
            .unwrap_or(false)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
}

/// The dependency digraph over model variables: node indices follow
/// declaration order (endogenous first, then exogenous), and the edge
/// `j -> i` means "j causes i".
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    pub graph: DirectedGraph,
    pub endogenous_count: usize,
}

impl DependencyGraph {
    pub fn is_endogenous(&self, node: usize) -> bool {
        node < self.endogenous_count
    }
}

/// A disagreement between the structural pattern and the numeric Jacobian at
/// a probe point: either a structural entry whose derivative vanishes there,
/// or a numerically live derivative with no structural entry.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianDiscrepancy {
    pub dependent: String,
    pub cause: String,
    pub structural: bool,
    pub numeric_magnitude: f64,
}

fn lag0_occurrences(m: &Model, expr: &Expr) -> Vec<usize> {
    let mut cols: BTreeSet<usize> = BTreeSet::new();
    expr.visit_vars(&mut |name, lag| {
        if lag == 0 {
            if let Some(idx) = m.var_index(name) {
                cols.insert(idx);
            }
        }
    });
    cols.into_iter().collect()
}

/// Computes the structural Jacobian sparsity pattern of a model.
///
/// Entry `(i, j)` is set iff variable `j` appears with lag 0 on the
/// right-hand side of the equation for endogenous variable `i`. No
/// simplification is applied first, so `YD - YD` still produces an entry;
/// [`numeric_jacobian_check`] surfaces such cancellations.
pub fn structural_jacobian(m: &Model) -> SparsityPattern {
    let n = m.n_vars();
    let mut rows = vec![Vec::new(); n];
    for (i, var) in m.endogenous.iter().enumerate() {
        if let Some(eq) = m.equation_for(var) {
            rows[i] = lag0_occurrences(m, &eq.rhs);
        }
    }
    SparsityPattern { n, rows }
}

/// Materializes the sparsity pattern as a digraph: edge `j -> i` per pattern
/// entry `(i, j)`.
pub fn build_dependency_graph(m: &Model) -> DependencyGraph {
    let pattern = structural_jacobian(m);
    let mut graph = DirectedGraph::new(m.var_labels());
    for (i, row) in pattern.rows.iter().enumerate() {
        for &j in row {
            let _ = graph.add_edge(j, i);
        }
    }
    DependencyGraph {
        graph,
        endogenous_count: m.endogenous.len(),
    }
}

struct ProbeSource<'a> {
    point: &'a BTreeMap<String, f64>,
    shift: Option<(&'a str, f64)>,
    lags: &'a LagState,
    params: &'a BTreeMap<String, f64>,
}

impl ValueSource for ProbeSource<'_> {
    fn current(&self, name: &str) -> Option<f64> {
        let base = self.point.get(name).copied()?;
        match self.shift {
            Some((shifted, delta)) if shifted == name => Some(base + delta),
            _ => Some(base),
        }
    }

    fn lagged(&self, name: &str, lag: u32) -> Option<f64> {
        self.lags.get(name, lag)
    }

    fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

/// Cross-validates the structural pattern against central finite differences
/// of every equation at `point`.
///
/// For each equation `i` and variable `j` the derivative is estimated as
/// `(f_i(point + eps e_j) - f_i(point - eps e_j)) / (2 eps)`; a discrepancy
/// is reported when a structural entry has `|derivative| < tolerance` or a
/// non-entry has `|derivative| >= tolerance`. The evaluation point is caller
/// supplied because the derivative of a nonlinear model depends on it.
pub fn numeric_jacobian_check(
    m: &Model,
    point: &BTreeMap<String, f64>,
    lags: &LagState,
    epsilon: f64,
    tolerance: f64,
) -> Result<Vec<JacobianDiscrepancy>, AnalysisError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(AnalysisError::BadEpsilon(epsilon));
    }
    let labels = m.var_labels();
    for name in &labels {
        if !point.contains_key(name) {
            return Err(AnalysisError::MissingPointValue(name.clone()));
        }
    }
    let params: BTreeMap<String, f64> = m
        .parameters
        .iter()
        .map(|p| (p.name.clone(), p.value))
        .collect();
    let pattern = structural_jacobian(m);

    let mut discrepancies = Vec::new();
    for (i, var) in m.endogenous.iter().enumerate() {
        let eq = match m.equation_for(var) {
            Some(eq) => eq,
            None => continue,
        };
        for (j, cause) in labels.iter().enumerate() {
            let probe = |delta: f64| -> Result<f64, AnalysisError> {
                let src = ProbeSource {
                    point,
                    shift: Some((cause.as_str(), delta)),
                    lags,
                    params: &params,
                };
                let v = eval_expr(&eq.rhs, &src).map_err(|source| AnalysisError::Evaluation {
                    equation: var.clone(),
                    source,
                })?;
                if !v.is_finite() {
                    return Err(AnalysisError::Evaluation {
                        equation: var.clone(),
                        source: EvalError::NonFinite,
                    });
                }
                Ok(v)
            };
            let derivative = (probe(epsilon)? - probe(-epsilon)?) / (2.0 * epsilon);
            let structural = pattern.contains(i, j);
            let live = derivative.abs() >= tolerance;
            if structural != live {
                discrepancies.push(JacobianDiscrepancy {
                    dependent: var.clone(),
                    cause: cause.clone(),
                    structural,
                    numeric_magnitude: derivative.abs(),
                });
            }
        }
    }
    Ok(discrepancies)
}
