//! Dependency analysis and block-ordered simulation for stock-flow-consistent
//! macroeconomic models.
//!
//! The pipeline: parse an equation system ([`model`]), extract its structural
//! Jacobian sparsity pattern and dependency digraph ([`analysis`]), partition
//! the digraph into strongly connected components and condense it into the
//! unique DAG of metanodes ([`graph`]), then simulate period by period in
//! block topological order — direct evaluation for acyclic variables,
//! Gauss–Seidel iteration inside each cyclic block ([`solver`]). Everything
//! serializes deterministically to DOT, JSON, and CSV ([`emit`]).

pub mod analysis;
pub mod emit;
pub mod graph;
pub mod model;
pub mod solver;

pub use analysis::{
    build_dependency_graph, numeric_jacobian_check, structural_jacobian, DependencyGraph,
    JacobianDiscrepancy, SparsityPattern,
};
pub use graph::{
    ancestors, condense, descendants, enumerate_cycles, is_acyclic_nilpotency, tarjan_scc,
    topological_order, CondensationDag, DirectedGraph, SccPartition,
};
pub use model::{parse_model, render_model, validate_model, Model, ValidationReport};
pub use solver::{
    naive_solve_period, run_checks, simulate, solve_period, LagState, SimulationResult,
    SolverOptions,
};
