//! Period-by-period simulation driven by the condensation topological order.
//!
//! Each period, metanodes are processed in topological order: a trivial
//! metanode is a single direct evaluation of its equation, while a cyclic
//! metanode is solved by damped Gauss–Seidel sweeps over its member
//! equations in declaration order. Values of already-solved blocks are
//! frozen inputs, which is exactly the semantics the acyclic condensation
//! licenses. A whole-system Gauss–Seidel baseline with no ordering is kept
//! alongside as an oracle and for evaluation-count comparisons.

use std::collections::BTreeMap;

use crate::analysis::build_dependency_graph;
use crate::graph::{condense, tarjan_scc, topological_order};
use crate::model::eval::{apply_binary, apply_call, eval_expr, EvalError, ValueSource};
use crate::model::{validate_model, BinOp, Expr, Func, Model};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("model is invalid: {0}")]
    InvalidModel(String),
    #[error("missing initial for lagged {variable}")]
    MissingInitial { variable: String },
    #[error("no value supplied for exogenous variable '{variable}'")]
    MissingExogenous { variable: String },
    #[error("no value supplied for variable '{variable}'")]
    MissingValue { variable: String },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(
        "{}block {{{}}} did not converge after {iterations} iterations (last residual {last_residual:e}); consider lowering damping",
        period_prefix(.period), members.join(", ")
    )]
    NonConvergence {
        period: Option<usize>,
        members: Vec<String>,
        iterations: u32,
        last_residual: f64,
    },
    #[error("{}equation for '{equation}': {source}", period_prefix(.period))]
    Evaluation {
        period: Option<usize>,
        equation: String,
        #[source]
        source: EvalError,
    },
    #[error("{}check expression {check_index}: {source}", period_prefix(.period))]
    CheckEvaluation {
        period: Option<usize>,
        check_index: usize,
        #[source]
        source: EvalError,
    },
}

fn period_prefix(period: &Option<usize>) -> String {
    match period {
        Some(t) => format!("period {t}: "),
        None => String::new(),
    }
}

impl SolverError {
    fn at_period(mut self, t: usize) -> SolverError {
        match &mut self {
            SolverError::NonConvergence { period, .. }
            | SolverError::Evaluation { period, .. }
            | SolverError::CheckEvaluation { period, .. } => *period = Some(t),
            _ => {}
        }
        self
    }
}

/// Convergence and iteration controls for the block and naive solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative convergence threshold on `|dx| / (1 + |x|)`.
    pub tolerance: f64,
    /// Iteration cap per block (and for the naive whole-system sweep).
    pub max_iterations: u32,
    /// Update damping in `(0, 1]`; 1.0 is a plain Gauss–Seidel sweep.
    pub damping: f64,
    /// Number of periods to simulate.
    pub periods: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
            damping: 1.0,
            periods: 1,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SolverError> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(SolverError::InvalidOptions(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::InvalidOptions(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidOptions(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.periods == 0 {
            return Err(SolverError::InvalidOptions(
                "periods must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Predetermined values: `(variable, k)` holds the value `k` periods before
/// the period currently being solved.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LagState {
    entries: BTreeMap<(String, u32), f64>,
    max_lag: BTreeMap<String, u32>,
}

impl LagState {
    pub fn empty() -> LagState {
        LagState::default()
    }

    /// Seeds the state from the model's `init` declarations: every lagged
    /// reference gets its variable's initial for all pre-simulation periods.
    /// A lagged variable without an initial is a hard error; silent zeros
    /// mask transcription mistakes.
    pub fn from_initials(m: &Model) -> Result<LagState, SolverError> {
        let mut state = LagState::empty();
        for (name, lag) in m.lag_references() {
            let value = *m
                .initials
                .get(&name)
                .ok_or_else(|| SolverError::MissingInitial {
                    variable: name.clone(),
                })?;
            state.note_max(&name, lag);
            for k in 1..=lag {
                state.entries.entry((name.clone(), k)).or_insert(value);
            }
        }
        Ok(state)
    }

    fn note_max(&mut self, name: &str, lag: u32) {
        let entry = self.max_lag.entry(name.to_string()).or_insert(lag);
        *entry = (*entry).max(lag);
    }

    pub fn get(&self, name: &str, lag: u32) -> Option<f64> {
        self.entries.get(&(name.to_string(), lag)).copied()
    }

    pub fn insert(&mut self, name: &str, lag: u32, value: f64) {
        self.note_max(name, lag);
        self.entries.insert((name.to_string(), lag), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, f64)> + '_ {
        self.entries.iter().map(|((n, k), v)| (n.as_str(), *k, *v))
    }

    /// Rolls the state one period forward: lag-1 slots take the given
    /// solution, deeper slots shift by one.
    pub fn advance(&mut self, solution: &BTreeMap<String, f64>) -> Result<(), SolverError> {
        for (name, &max_lag) in &self.max_lag {
            for k in (2..=max_lag).rev() {
                let prev = self.entries[&(name.clone(), k - 1)];
                self.entries.insert((name.clone(), k), prev);
            }
            let new = *solution
                .get(name)
                .ok_or_else(|| SolverError::MissingValue {
                    variable: name.clone(),
                })?;
            self.entries.insert((name.clone(), 1), new);
        }
        Ok(())
    }
}

/// Solver activity for one block in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnostic {
    pub members: Vec<String>,
    pub cyclic: bool,
    /// Gauss–Seidel sweeps performed; 0 for a direct evaluation.
    pub iterations: u32,
    /// Final max relative change; 0 for a direct evaluation.
    pub residual: f64,
    /// Equation evaluations charged to this block.
    pub evaluations: u64,
}

/// A solved period: values aligned with the variable order plus per-block
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSolution {
    pub values: BTreeMap<String, f64>,
    pub blocks: Vec<BlockDiagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: usize,
    /// Values aligned with [`SimulationResult::variables`].
    pub values: Vec<f64>,
    pub blocks: Vec<BlockDiagnostic>,
    /// One residual `lhs - rhs` per model check expression.
    pub check_residuals: Vec<f64>,
}

/// Full simulation output: per-period values for every variable plus solver
/// and check diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// All variables in declaration order, endogenous first.
    pub variables: Vec<String>,
    pub endogenous_count: usize,
    /// Absolute number of the first simulated period (1 for a fresh run).
    pub first_period: usize,
    pub records: Vec<PeriodRecord>,
    /// Lag state as of `first_period`, kept so checks can be re-evaluated.
    pub initial_lags: LagState,
    /// Lag state after the last period; feed to [`simulate_from`] to
    /// continue the run.
    pub final_lags: LagState,
}

impl SimulationResult {
    pub fn value(&self, period: usize, name: &str) -> Option<f64> {
        let idx = self.variables.iter().position(|v| v == name)?;
        let record = self
            .records
            .get(period.checked_sub(self.first_period)?)?;
        record.values.get(idx).copied()
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let record = self.records.last()?;
        let idx = self.variables.iter().position(|v| v == name)?;
        record.values.get(idx).copied()
    }

    pub fn total_evaluations(&self) -> u64 {
        self.records
            .iter()
            .flat_map(|r| r.blocks.iter())
            .map(|b| b.evaluations)
            .sum()
    }
}

/// Outcome of one check expression in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub period: usize,
    pub check_index: usize,
    pub residual: f64,
    pub passed: bool,
}

// ---------------------------------------------------------------------------
// Compiled equations and the block schedule
// ---------------------------------------------------------------------------

// Index-resolved expression: variable slots instead of names, parameters
// folded to constants. Keeps the per-sweep inner loop off string lookups
// while routing arithmetic through the same apply_* helpers as the AST
// walker, so both paths agree bit-for-bit.
#[derive(Debug, Clone)]
enum CExpr {
    Const(f64),
    Var(usize),
    Lag(usize, u32),
    Neg(Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Call(Func, Vec<CExpr>),
}

#[derive(Debug, Clone)]
enum Block {
    /// Exogenous singleton; its value is assigned, not solved.
    Exogenous,
    /// Acyclic endogenous variable: one direct evaluation.
    Direct(usize),
    /// Cyclic metanode: members in declaration order.
    Cyclic(Vec<usize>),
}

struct Schedule {
    labels: Vec<String>,
    endogenous_count: usize,
    blocks: Vec<Block>,
    /// Compiled right-hand side per endogenous index.
    compiled: Vec<CExpr>,
}

fn compile(m: &Model, expr: &Expr) -> Result<CExpr, SolverError> {
    Ok(match expr {
        Expr::Const(c) => CExpr::Const(*c),
        Expr::Var { name, lag } => {
            let idx = m
                .var_index(name)
                .ok_or_else(|| SolverError::InvalidModel(format!("undeclared identifier '{name}'")))?;
            if *lag == 0 {
                CExpr::Var(idx)
            } else {
                CExpr::Lag(idx, *lag)
            }
        }
        Expr::Param(name) => CExpr::Const(m.param_value(name).ok_or_else(|| {
            SolverError::InvalidModel(format!("undeclared parameter '{name}'"))
        })?),
        Expr::Neg(inner) => CExpr::Neg(Box::new(compile(m, inner)?)),
        Expr::Binary { op, lhs, rhs } => CExpr::Binary(
            *op,
            Box::new(compile(m, lhs)?),
            Box::new(compile(m, rhs)?),
        ),
        Expr::Call { func, args } => {
            let compiled: Result<Vec<CExpr>, SolverError> =
                args.iter().map(|a| compile(m, a)).collect();
            CExpr::Call(*func, compiled?)
        }
    })
}

impl Schedule {
    fn build(m: &Model) -> Result<Schedule, SolverError> {
        let report = validate_model(m);
        if !report.is_clean() {
            return Err(SolverError::InvalidModel(
                report.errors[0].message.clone(),
            ));
        }

        let dep = build_dependency_graph(m);
        let partition = tarjan_scc(&dep.graph);
        let dag = condense(&dep.graph, &partition)
            .map_err(|e| SolverError::InvalidModel(e.to_string()))?;
        let order = topological_order(&dag)
            .map_err(|e| SolverError::InvalidModel(e.to_string()))?;

        let endo = m.endogenous.len();
        let mut blocks = Vec::with_capacity(order.len());
        for comp in order {
            let meta = &dag.metanodes[comp];
            if meta.nontrivial {
                blocks.push(Block::Cyclic(meta.members.clone()));
            } else {
                let node = meta.members[0];
                if node < endo {
                    blocks.push(Block::Direct(node));
                } else {
                    blocks.push(Block::Exogenous);
                }
            }
        }

        let mut compiled = Vec::with_capacity(endo);
        for var in &m.endogenous {
            let eq = m.equation_for(var).ok_or_else(|| {
                SolverError::InvalidModel(format!("endogenous variable '{var}' has no equation"))
            })?;
            compiled.push(compile(m, &eq.rhs)?);
        }

        Ok(Schedule {
            labels: m.var_labels(),
            endogenous_count: endo,
            blocks,
            compiled,
        })
    }

    fn eval(
        &self,
        expr: &CExpr,
        values: &[f64],
        lags: &BTreeMap<(usize, u32), f64>,
    ) -> Result<f64, EvalError> {
        match expr {
            CExpr::Const(c) => Ok(*c),
            CExpr::Var(idx) => Ok(values[*idx]),
            CExpr::Lag(idx, k) => {
                lags.get(&(*idx, *k))
                    .copied()
                    .ok_or_else(|| EvalError::MissingLag {
                        name: self.labels[*idx].clone(),
                        lag: *k,
                    })
            }
            CExpr::Neg(inner) => Ok(-self.eval(inner, values, lags)?),
            CExpr::Binary(op, lhs, rhs) => {
                let a = self.eval(lhs, values, lags)?;
                let b = self.eval(rhs, values, lags)?;
                apply_binary(*op, a, b)
            }
            CExpr::Call(func, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, values, lags)?);
                }
                apply_call(*func, &vals)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Period solving
// ---------------------------------------------------------------------------

struct PeriodContext<'a> {
    m: &'a Model,
    schedule: &'a Schedule,
    lag_slots: BTreeMap<(usize, u32), f64>,
    values: Vec<f64>,
}

impl<'a> PeriodContext<'a> {
    fn prepare(
        m: &'a Model,
        schedule: &'a Schedule,
        lags: &LagState,
        exo_values: &BTreeMap<String, f64>,
    ) -> Result<Self, SolverError> {
        let mut lag_slots = BTreeMap::new();
        for (name, k, v) in lags.iter() {
            if let Some(idx) = m.var_index(name) {
                lag_slots.insert((idx, k), v);
            }
        }

        // Starting guesses derive only from lag state and initials, so a
        // continued run reproduces a full run bit-for-bit.
        let n = m.n_vars();
        let mut values = vec![0.0; n];
        for (i, var) in m.endogenous.iter().enumerate() {
            values[i] = lags
                .get(var, 1)
                .or_else(|| m.initials.get(var).copied())
                .unwrap_or(0.0);
        }
        for (j, exo) in m.exogenous.iter().enumerate() {
            let v = *exo_values
                .get(&exo.name)
                .ok_or_else(|| SolverError::MissingExogenous {
                    variable: exo.name.clone(),
                })?;
            values[m.endogenous.len() + j] = v;
        }

        Ok(PeriodContext {
            m,
            schedule,
            lag_slots,
            values,
        })
    }

    fn eval_equation(&self, endo_idx: usize) -> Result<f64, SolverError> {
        self.schedule
            .eval(&self.schedule.compiled[endo_idx], &self.values, &self.lag_slots)
            .map_err(|source| SolverError::Evaluation {
                period: None,
                equation: self.m.endogenous[endo_idx].clone(),
                source,
            })
    }

    /// Damped Gauss–Seidel over `members` until the max relative change per
    /// sweep drops to `tolerance`. Divergence to non-finite values aborts
    /// early as non-convergence.
    fn sweep_block(
        &mut self,
        members: &[usize],
        opts: &SolverOptions,
    ) -> Result<BlockDiagnostic, SolverError> {
        let names: Vec<String> = members
            .iter()
            .map(|&i| self.m.endogenous[i].clone())
            .collect();
        let mut evaluations = 0u64;
        let mut last_residual = f64::INFINITY;
        for sweep in 1..=opts.max_iterations {
            let mut max_delta = 0.0f64;
            for &i in members {
                let old = self.values[i];
                let new = self.eval_equation(i)?;
                evaluations += 1;
                let updated = old + opts.damping * (new - old);
                if !updated.is_finite() {
                    return Err(SolverError::NonConvergence {
                        period: None,
                        members: names,
                        iterations: sweep,
                        last_residual: f64::INFINITY,
                    });
                }
                self.values[i] = updated;
                let delta = (updated - old).abs() / (1.0 + updated.abs());
                max_delta = max_delta.max(delta);
            }
            last_residual = max_delta;
            if max_delta <= opts.tolerance {
                return Ok(BlockDiagnostic {
                    members: names,
                    cyclic: true,
                    iterations: sweep,
                    residual: max_delta,
                    evaluations,
                });
            }
        }
        Err(SolverError::NonConvergence {
            period: None,
            members: names,
            iterations: opts.max_iterations,
            last_residual,
        })
    }

    fn solve_blocks(&mut self, opts: &SolverOptions) -> Result<Vec<BlockDiagnostic>, SolverError> {
        let blocks: Vec<Block> = self.schedule.blocks.clone();
        let mut diagnostics = Vec::new();
        for block in &blocks {
            match block {
                Block::Exogenous => {} // assigned during preparation
                Block::Direct(i) => {
                    let v = self.eval_equation(*i)?;
                    if !v.is_finite() {
                        return Err(SolverError::Evaluation {
                            period: None,
                            equation: self.m.endogenous[*i].clone(),
                            source: EvalError::NonFinite,
                        });
                    }
                    self.values[*i] = v;
                    diagnostics.push(BlockDiagnostic {
                        members: vec![self.m.endogenous[*i].clone()],
                        cyclic: false,
                        iterations: 0,
                        residual: 0.0,
                        evaluations: 1,
                    });
                }
                Block::Cyclic(members) => {
                    diagnostics.push(self.sweep_block(members, opts)?);
                }
            }
        }
        Ok(diagnostics)
    }

    /// One unordered Gauss–Seidel sweep cycle over every equation.
    fn solve_naive(&mut self, opts: &SolverOptions) -> Result<Vec<BlockDiagnostic>, SolverError> {
        let members: Vec<usize> = (0..self.schedule.endogenous_count).collect();
        let diag = self.sweep_block(&members, opts)?;
        Ok(vec![diag])
    }

    fn value_map(&self) -> BTreeMap<String, f64> {
        self.schedule
            .labels
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }
}

fn exo_map_for_period(m: &Model, period: usize) -> BTreeMap<String, f64> {
    m.exogenous
        .iter()
        .map(|e| (e.name.clone(), e.value_at(period)))
        .collect()
}

/// Solves a single period in block topological order and returns the full
/// value map (endogenous and exogenous).
pub fn solve_period(
    m: &Model,
    lags: &LagState,
    exo_values: &BTreeMap<String, f64>,
    opts: &SolverOptions,
) -> Result<BTreeMap<String, f64>, SolverError> {
    Ok(solve_period_detailed(m, lags, exo_values, opts)?.values)
}

/// [`solve_period`] plus per-block diagnostics.
pub fn solve_period_detailed(
    m: &Model,
    lags: &LagState,
    exo_values: &BTreeMap<String, f64>,
    opts: &SolverOptions,
) -> Result<PeriodSolution, SolverError> {
    opts.validate()?;
    let schedule = Schedule::build(m)?;
    let mut ctx = PeriodContext::prepare(m, &schedule, lags, exo_values)?;
    let blocks = ctx.solve_blocks(opts)?;
    Ok(PeriodSolution {
        values: ctx.value_map(),
        blocks,
    })
}

/// Whole-system Gauss–Seidel baseline: sweeps every equation in declaration
/// order with no blocking or ordering, same convergence rule as the block
/// method. Exists as an oracle and as the comparison point for the ordering
/// benefit.
pub fn naive_solve_period(
    m: &Model,
    lags: &LagState,
    exo_values: &BTreeMap<String, f64>,
    opts: &SolverOptions,
) -> Result<BTreeMap<String, f64>, SolverError> {
    Ok(naive_solve_period_detailed(m, lags, exo_values, opts)?.values)
}

/// [`naive_solve_period`] plus the single whole-system block diagnostic.
pub fn naive_solve_period_detailed(
    m: &Model,
    lags: &LagState,
    exo_values: &BTreeMap<String, f64>,
    opts: &SolverOptions,
) -> Result<PeriodSolution, SolverError> {
    opts.validate()?;
    let schedule = Schedule::build(m)?;
    let mut ctx = PeriodContext::prepare(m, &schedule, lags, exo_values)?;
    let blocks = ctx.solve_naive(opts)?;
    Ok(PeriodSolution {
        values: ctx.value_map(),
        blocks,
    })
}

struct CheckSource<'a> {
    values: &'a BTreeMap<String, f64>,
    lags: &'a LagState,
    m: &'a Model,
}

impl ValueSource for CheckSource<'_> {
    fn current(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn lagged(&self, name: &str, lag: u32) -> Option<f64> {
        self.lags.get(name, lag)
    }

    fn param(&self, name: &str) -> Option<f64> {
        self.m.param_value(name)
    }
}

fn eval_checks(
    m: &Model,
    values: &BTreeMap<String, f64>,
    lags: &LagState,
) -> Result<Vec<f64>, SolverError> {
    let src = CheckSource { values, lags, m };
    m.checks
        .iter()
        .enumerate()
        .map(|(idx, check)| {
            let lhs = eval_expr(&check.lhs, &src);
            let rhs = eval_expr(&check.rhs, &src);
            match (lhs, rhs) {
                (Ok(a), Ok(b)) => Ok(a - b),
                (Err(e), _) | (_, Err(e)) => Err(SolverError::CheckEvaluation {
                    period: None,
                    check_index: idx,
                    source: e,
                }),
            }
        })
        .collect()
}

/// Simulates `opts.periods` periods starting from the model's initials.
pub fn simulate(m: &Model, opts: &SolverOptions) -> Result<SimulationResult, SolverError> {
    let lags = LagState::from_initials(m)?;
    simulate_from(m, lags, 1, opts)
}

/// Simulates `opts.periods` periods continuing from an explicit lag state;
/// `first_period` numbers the first solved period and indexes exogenous
/// series (so a continued run reads the same series values a full run
/// would).
pub fn simulate_from(
    m: &Model,
    lags: LagState,
    first_period: usize,
    opts: &SolverOptions,
) -> Result<SimulationResult, SolverError> {
    opts.validate()?;
    let schedule = Schedule::build(m)?;
    let initial_lags = lags.clone();
    let mut state = lags;
    let mut records = Vec::with_capacity(opts.periods);
    for t in first_period..first_period + opts.periods {
        let exo_values = exo_map_for_period(m, t);
        let mut ctx = PeriodContext::prepare(m, &schedule, &state, &exo_values)?;
        let blocks = ctx.solve_blocks(opts).map_err(|e| e.at_period(t))?;
        let values_map = ctx.value_map();
        let check_residuals =
            eval_checks(m, &values_map, &state).map_err(|e| e.at_period(t))?;
        state.advance(&values_map)?;
        records.push(PeriodRecord {
            period: t,
            values: ctx.values,
            blocks,
            check_residuals,
        });
    }
    Ok(SimulationResult {
        variables: m.var_labels(),
        endogenous_count: m.endogenous.len(),
        first_period,
        records,
        initial_lags,
        final_lags: state,
    })
}

struct RecordSource<'a> {
    m: &'a Model,
    r: &'a SimulationResult,
    period: usize,
}

impl ValueSource for RecordSource<'_> {
    fn current(&self, name: &str) -> Option<f64> {
        self.r.value(self.period, name)
    }

    fn lagged(&self, name: &str, lag: u32) -> Option<f64> {
        let target = self.period.checked_sub(lag as usize)?;
        if target >= self.r.first_period {
            self.r.value(target, name)
        } else {
            // Before the simulated window: the stored entry lag state,
            // shifted to this period's frame.
            let offset = (self.r.first_period - target) as u32;
            self.r.initial_lags.get(name, offset)
        }
    }

    fn param(&self, name: &str) -> Option<f64> {
        self.m.param_value(name)
    }
}

/// Re-evaluates every check expression against a simulation result.
///
/// A check passes when `|lhs - rhs| <= tol * (1 + |lhs|)`.
pub fn run_checks(
    m: &Model,
    r: &SimulationResult,
    tol: f64,
) -> Result<Vec<CheckOutcome>, SolverError> {
    let mut outcomes = Vec::with_capacity(m.checks.len() * r.records.len());
    for record in &r.records {
        let src = RecordSource {
            m,
            r,
            period: record.period,
        };
        for (idx, check) in m.checks.iter().enumerate() {
            let lhs = eval_expr(&check.lhs, &src).map_err(|e| SolverError::CheckEvaluation {
                period: Some(record.period),
                check_index: idx,
                source: e,
            })?;
            let rhs = eval_expr(&check.rhs, &src).map_err(|e| SolverError::CheckEvaluation {
                period: Some(record.period),
                check_index: idx,
                source: e,
            })?;
            let residual = lhs - rhs;
            outcomes.push(CheckOutcome {
                period: record.period,
                check_index: idx,
                residual,
                passed: residual.abs() <= tol * (1.0 + lhs.abs()),
            });
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn no_exo() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn constant_model_is_one_direct_evaluation() {
        let m = parse_model("var X\nX = 5").unwrap();
        let sol = solve_period_detailed(&m, &LagState::empty(), &no_exo(), &SolverOptions::default())
            .unwrap();
        assert_eq!(sol.values["X"], 5.0);
        assert_eq!(sol.blocks.len(), 1);
        assert_eq!(sol.blocks[0].iterations, 0);
        assert_eq!(sol.blocks[0].evaluations, 1);
        assert!(!sol.blocks[0].cyclic);
    }

    #[test]
    fn divergent_block_reports_nonconvergence() {
        let m = parse_model("var X\nX = 2 * X + 1").unwrap();
        let err = solve_period(&m, &LagState::empty(), &no_exo(), &SolverOptions::default())
            .unwrap_err();
        match err {
            SolverError::NonConvergence { members, .. } => {
                assert_eq!(members, vec!["X"]);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        // The naive baseline diverges identically.
        let err2 = naive_solve_period(&m, &LagState::empty(), &no_exo(), &SolverOptions::default())
            .unwrap_err();
        assert!(matches!(err2, SolverError::NonConvergence { .. }));
    }

    #[test]
    fn contractive_self_loop_converges() {
        let m = parse_model("var X\nX = 0.5 * X + 1").unwrap();
        let sol = solve_period(&m, &LagState::empty(), &no_exo(), &SolverOptions::default())
            .unwrap();
        assert!((sol["X"] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn naive_needs_a_detection_sweep_on_acyclic_models() {
        let m = parse_model("var A, B, C\nA = 1\nB = A + 1\nC = B + 1").unwrap();
        let opts = SolverOptions::default();
        let block = solve_period_detailed(&m, &LagState::empty(), &no_exo(), &opts).unwrap();
        let naive = naive_solve_period_detailed(&m, &LagState::empty(), &no_exo(), &opts).unwrap();
        assert_eq!(block.values, naive.values);
        let block_evals: u64 = block.blocks.iter().map(|b| b.evaluations).sum();
        let naive_evals: u64 = naive.blocks.iter().map(|b| b.evaluations).sum();
        assert_eq!(block_evals, 3, "one evaluation per equation");
        assert!(naive.blocks[0].iterations >= 2);
        assert!(naive_evals >= 2 * block_evals);
    }

    #[test]
    fn missing_initial_is_a_hard_error() {
        let m = parse_model("var H\nH = H[-1] + 1").unwrap();
        let err = simulate(&m, &SolverOptions::default()).unwrap_err();
        assert_eq!(
            err,
            SolverError::MissingInitial {
                variable: "H".into()
            }
        );
    }

    #[test]
    fn missing_exogenous_value_is_an_error() {
        let m = parse_model("var Y\nexo G = 20\nY = G").unwrap();
        let err = solve_period(&m, &LagState::empty(), &no_exo(), &SolverOptions::default())
            .unwrap_err();
        assert_eq!(
            err,
            SolverError::MissingExogenous {
                variable: "G".into()
            }
        );
    }

    #[test]
    fn division_by_zero_names_the_equation_and_period() {
        let m = parse_model("var Y, Z\nexo x = [1, 0]\nY = 1 / x\nZ = Y").unwrap();
        let opts = SolverOptions {
            periods: 2,
            ..SolverOptions::default()
        };
        let err = simulate(&m, &opts).unwrap_err();
        match err {
            SolverError::Evaluation {
                period, equation, source, ..
            } => {
                assert_eq!(period, Some(2));
                assert_eq!(equation, "Y");
                assert_eq!(source, EvalError::DivisionByZero);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_period_simulation_matches_solve_period() {
        let src = "var H, Y\nexo G = 20\ninit H = 7\nY = G + H[-1]\nH = H[-1] + 1";
        let m = parse_model(src).unwrap();
        let opts = SolverOptions::default();
        let sim = simulate(&m, &opts).unwrap();
        let lags = LagState::from_initials(&m).unwrap();
        let exo = exo_map_for_period(&m, 1);
        let direct = solve_period(&m, &lags, &exo, &opts).unwrap();
        assert_eq!(sim.records.len(), 1);
        assert_eq!(sim.value(1, "Y").unwrap(), direct["Y"]);
        assert_eq!(sim.value(1, "H").unwrap(), direct["H"]);
    }

    #[test]
    fn lag_rollover_matches_uninterrupted_run() {
        let src = "var H, Y\nexo G = [10, 20, 30, 40, 50]\ninit H = 0\nY = G + 0.5 * H[-1]\nH = H[-1] + 0.1 * Y";
        let m = parse_model(src).unwrap();
        let opts = SolverOptions {
            periods: 6,
            ..SolverOptions::default()
        };
        let full = simulate(&m, &opts).unwrap();

        let first_half = SolverOptions {
            periods: 3,
            ..SolverOptions::default()
        };
        let part1 = simulate(&m, &first_half).unwrap();
        let second_half = SolverOptions {
            periods: 3,
            ..SolverOptions::default()
        };
        let part2 = simulate_from(&m, part1.final_lags.clone(), 4, &second_half).unwrap();

        for t in 1..=3 {
            assert_eq!(full.value(t, "H"), part1.value(t, "H"));
            assert_eq!(full.value(t, "Y"), part1.value(t, "Y"));
        }
        for t in 4..=6 {
            assert_eq!(full.value(t, "H"), part2.value(t, "H"), "period {t}");
            assert_eq!(full.value(t, "Y"), part2.value(t, "Y"), "period {t}");
        }
    }

    #[test]
    fn deep_lags_resolve_against_initials_then_history() {
        let src = "var X\ninit X = 100\nX = X[-2] + 1";
        let m = parse_model(src).unwrap();
        let opts = SolverOptions {
            periods: 4,
            ..SolverOptions::default()
        };
        let sim = simulate(&m, &opts).unwrap();
        // Periods: X1 = X[-2]@t1 = 100+1, X2 = 100+1, X3 = X1+1, X4 = X2+1.
        assert_eq!(sim.value(1, "X").unwrap(), 101.0);
        assert_eq!(sim.value(2, "X").unwrap(), 101.0);
        assert_eq!(sim.value(3, "X").unwrap(), 102.0);
        assert_eq!(sim.value(4, "X").unwrap(), 102.0);
    }

    #[test]
    fn checks_pass_when_identity_holds_and_fail_when_broken() {
        let good = parse_model(
            "var H, YD\nexo G = 5\ninit H = 0\nYD = G\nH = H[-1] + YD\ncheck H == H[-1] + YD",
        )
        .unwrap();
        let opts = SolverOptions {
            periods: 3,
            ..SolverOptions::default()
        };
        let r = simulate(&good, &opts).unwrap();
        let outcomes = run_checks(&good, &r, 1e-10).unwrap();
        assert_eq!(outcomes.len(), 3);
        assert!(outcomes.iter().all(|o| o.passed && o.residual == 0.0));
        // Stored residuals agree with the re-evaluation.
        for (record, outcome) in r.records.iter().zip(&outcomes) {
            assert_eq!(record.check_residuals[0], outcome.residual);
        }

        let broken = parse_model(
            "var H, YD\nexo G = 5\ninit H = 0\nYD = G\nH = H[-1] + 0.9 * YD\ncheck H == H[-1] + YD",
        )
        .unwrap();
        let r = simulate(&broken, &opts).unwrap();
        let outcomes = run_checks(&broken, &r, 1e-10).unwrap();
        assert!(outcomes.iter().all(|o| !o.passed));
    }

    #[test]
    fn model_without_checks_yields_no_outcomes() {
        let m = parse_model("var X\nX = 1").unwrap();
        let r = simulate(&m, &SolverOptions::default()).unwrap();
        assert!(run_checks(&m, &r, 1e-10).unwrap().is_empty());
    }

    #[test]
    fn options_are_validated() {
        let m = parse_model("var X\nX = 1").unwrap();
        let mut opts = SolverOptions::default();
        opts.damping = 0.0;
        assert!(matches!(
            simulate(&m, &opts),
            Err(SolverError::InvalidOptions(_))
        ));
        opts.damping = 1.0;
        opts.tolerance = -1.0;
        assert!(matches!(
            simulate(&m, &opts),
            Err(SolverError::InvalidOptions(_))
        ));
    }

    #[test]
    fn exogenous_series_repeat_their_last_value() {
        let m = parse_model("var Y\nexo G = [1, 2]\nY = G").unwrap();
        let opts = SolverOptions {
            periods: 4,
            ..SolverOptions::default()
        };
        let r = simulate(&m, &opts).unwrap();
        let ys: Vec<f64> = (1..=4).map(|t| r.value(t, "Y").unwrap()).collect();
        assert_eq!(ys, vec![1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn damping_still_reaches_the_fixed_point() {
        let m = parse_model("var X\nX = 0.9 * X + 1").unwrap();
        let opts = SolverOptions {
            damping: 0.5,
            ..SolverOptions::default()
        };
        let sol = solve_period(&m, &LagState::empty(), &no_exo(), &opts).unwrap();
        assert!((sol["X"] - 10.0).abs() < 1e-7);
    }
}
