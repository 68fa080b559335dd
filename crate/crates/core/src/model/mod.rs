//! Model frontend: the `.sfc` equation DSL, its AST, validation, and
//! canonical rendering.
//!
//! A model is a system of simultaneous equations `x = f(x)` over declared
//! endogenous variables, driven by exogenous series and scalar parameters.
//! Lagged references `X[-k]` denote the value of `X` from `k` periods ago
//! and are predetermined within a period.

mod lexer;
mod parser;
mod render;

pub mod eval;

pub use parser::{parse_model, ParseError, ParseFailure};
pub use render::render_model;

use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Words with grammatical meaning; they cannot be used as identifiers.
pub const RESERVED_WORDS: &[&str] = &[
    "model", "var", "exo", "param", "init", "check", "exp", "log", "min", "max",
];

/// Default model name when the source has no `model NAME` line.
pub const DEFAULT_MODEL_NAME: &str = "model";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Built-in functions callable in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Exp | Func::Log => 1,
            Func::Min | Func::Max => 2,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }
}

/// Expression tree. `Var` with `lag == 0` is a current-period reference;
/// `lag == k` means the value `k` periods ago.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var { name: String, lag: u32 },
    Param(String),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call { func: Func, args: Vec<Expr> },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var {
            name: name.to_string(),
            lag: 0,
        }
    }

    pub fn lagged(name: &str, lag: u32) -> Expr {
        Expr::Var {
            name: name.to_string(),
            lag,
        }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Calls `f` on every variable reference in the tree.
    pub fn visit_vars(&self, f: &mut impl FnMut(&str, u32)) {
        match self {
            Expr::Const(_) | Expr::Param(_) => {}
            Expr::Var { name, lag } => f(name, *lag),
            Expr::Neg(inner) => inner.visit_vars(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_vars(f);
                rhs.visit_vars(f);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    a.visit_vars(f);
                }
            }
        }
    }

    /// Calls `f` on every parameter reference in the tree.
    pub fn visit_params(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Const(_) | Expr::Var { .. } => {}
            Expr::Param(name) => f(name),
            Expr::Neg(inner) => inner.visit_params(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_params(f);
                rhs.visit_params(f);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    a.visit_params(f);
                }
            }
        }
    }
}

/// One behavioural or accounting equation: `lhs = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub lhs: String,
    pub rhs: Expr,
}

/// Post-solve assertion `lhs == rhs`; the solver reports the residual
/// `lhs − rhs` per period.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckExpr {
    pub lhs: Expr,
    pub rhs: Expr,
}

/// An exogenous variable with its value series. A scalar declaration is a
/// one-element series; simulations past the end repeat the last value.
#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    pub name: String,
    pub values: Vec<f64>,
}

impl Exogenous {
    /// Value at 1-based period `t`; the last entry holds beyond the series.
    pub fn value_at(&self, period: usize) -> f64 {
        let idx = period.saturating_sub(1).min(self.values.len() - 1);
        self.values[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

/// A parsed, immutable model. Variable indices everywhere downstream are
/// declaration order: endogenous first, then exogenous.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub endogenous: Vec<String>,
    pub exogenous: Vec<Exogenous>,
    pub parameters: Vec<Parameter>,
    pub equations: Vec<Equation>,
    pub initials: BTreeMap<String, f64>,
    pub checks: Vec<CheckExpr>,
}

impl Model {
    pub fn n_vars(&self) -> usize {
        self.endogenous.len() + self.exogenous.len()
    }

    /// Index of a variable: endogenous in declaration order, then exogenous.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.endogenous.iter().position(|v| v == name) {
            return Some(i);
        }
        self.exogenous
            .iter()
            .position(|e| e.name == name)
            .map(|i| self.endogenous.len() + i)
    }

    pub fn var_name(&self, index: usize) -> Option<&str> {
        if index < self.endogenous.len() {
            return Some(&self.endogenous[index]);
        }
        self.exogenous
            .get(index - self.endogenous.len())
            .map(|e| e.name.as_str())
    }

    pub fn is_endogenous_index(&self, index: usize) -> bool {
        index < self.endogenous.len()
    }

    /// Labels for graph nodes, in variable-index order.
    pub fn var_labels(&self) -> Vec<String> {
        self.endogenous
            .iter()
            .cloned()
            .chain(self.exogenous.iter().map(|e| e.name.clone()))
            .collect()
    }

    pub fn equation_for(&self, name: &str) -> Option<&Equation> {
        self.equations.iter().find(|eq| eq.lhs == name)
    }

    pub fn param_value(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.value)
    }

    /// Every `(variable, lag)` pair with `lag >= 1` referenced by any
    /// equation or check expression.
    pub fn lag_references(&self) -> BTreeSet<(String, u32)> {
        let mut refs = BTreeSet::new();
        let mut collect = |expr: &Expr| {
            expr.visit_vars(&mut |name, lag| {
                if lag >= 1 {
                    refs.insert((name.to_string(), lag));
                }
            });
        };
        for eq in &self.equations {
            collect(&eq.rhs);
        }
        for check in &self.checks {
            collect(&check.lhs);
            collect(&check.rhs);
        }
        refs
    }
}

/// Machine-readable diagnostic codes for [`validate_model`] and the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticCode {
    Syntax,
    DuplicateDeclaration,
    DuplicateEquation,
    UndeclaredIdentifier,
    MissingEquation,
    EquationForNonEndogenous,
    MissingInitial,
    LaggedParameter,
    BadArity,
    ReservedWord,
    UnusedParameter,
    UnreferencedVariable,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::Syntax => "syntax",
            DiagnosticCode::DuplicateDeclaration => "duplicate-declaration",
            DiagnosticCode::DuplicateEquation => "duplicate-equation",
            DiagnosticCode::UndeclaredIdentifier => "undeclared-identifier",
            DiagnosticCode::MissingEquation => "missing-equation",
            DiagnosticCode::EquationForNonEndogenous => "equation-for-non-endogenous",
            DiagnosticCode::MissingInitial => "missing-initial",
            DiagnosticCode::LaggedParameter => "lagged-parameter",
            DiagnosticCode::BadArity => "bad-arity",
            DiagnosticCode::ReservedWord => "reserved-word",
            DiagnosticCode::UnusedParameter => "unused-parameter",
            DiagnosticCode::UnreferencedVariable => "unreferenced-variable",
        }
    }
}

impl std::fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1-based line/column source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceLoc {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    pub loc: Option<SourceLoc>,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.loc {
            Some(loc) => write!(f, "{loc}: {} [{}]", self.message, self.code),
            None => write!(f, "{} [{}]", self.message, self.code),
        }
    }
}

/// Result of [`validate_model`]: empty `errors` means all Model invariants
/// hold. Violations are data, not failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks every Model invariant and collects warnings. Works on models built
/// programmatically as well as parsed ones, so everything the parser already
/// rejects is re-checked here (without source locations).
pub fn validate_model(m: &Model) -> ValidationReport {
    let mut errors: Vec<Diagnostic> = Vec::new();
    let mut warnings: Vec<Diagnostic> = Vec::new();
    let mut error = |code: DiagnosticCode, message: String| {
        errors.push(Diagnostic {
            code,
            message,
            loc: None,
        });
    };

    // Disjoint identifier sets, no duplicates within a set.
    let mut seen: BTreeMap<&str, &'static str> = BTreeMap::new();
    let declared: Vec<(&str, &'static str)> = m
        .endogenous
        .iter()
        .map(|v| (v.as_str(), "endogenous"))
        .chain(m.exogenous.iter().map(|e| (e.name.as_str(), "exogenous")))
        .chain(m.parameters.iter().map(|p| (p.name.as_str(), "parameter")))
        .collect();
    for (name, role) in &declared {
        if let Some(prev) = seen.insert(name, role) {
            error(
                DiagnosticCode::DuplicateDeclaration,
                format!("'{name}' declared as both {prev} and {role}"),
            );
        }
    }

    // Exactly one equation per endogenous variable, and only for them.
    for var in &m.endogenous {
        match m.equations.iter().filter(|eq| &eq.lhs == var).count() {
            0 => error(
                DiagnosticCode::MissingEquation,
                format!("endogenous variable '{var}' has no equation"),
            ),
            1 => {}
            _ => error(
                DiagnosticCode::DuplicateEquation,
                format!("duplicate equation for '{var}'"),
            ),
        }
    }
    for eq in &m.equations {
        if !m.endogenous.contains(&eq.lhs) {
            error(
                DiagnosticCode::EquationForNonEndogenous,
                format!("equation for '{}', which is not endogenous", eq.lhs),
            );
        }
    }

    // Every referenced identifier is declared; parameters are never lagged.
    let is_var = |name: &str| {
        m.endogenous.iter().any(|v| v == name) || m.exogenous.iter().any(|e| e.name == name)
    };
    let is_param = |name: &str| m.parameters.iter().any(|p| p.name == name);
    {
        let check_expr = |expr: &Expr, errors: &mut Vec<Diagnostic>| {
            expr.visit_vars(&mut |name, lag| {
                if !is_var(name) {
                    if is_param(name) {
                        // Parser emits Param nodes for parameters, but a
                        // programmatic model may hold a Var node instead.
                        if lag >= 1 {
                            errors.push(Diagnostic {
                                code: DiagnosticCode::LaggedParameter,
                                message: format!("parameter '{name}' referenced with lag"),
                                loc: None,
                            });
                        }
                    } else {
                        errors.push(Diagnostic {
                            code: DiagnosticCode::UndeclaredIdentifier,
                            message: format!("undeclared identifier '{name}'"),
                            loc: None,
                        });
                    }
                }
            });
            expr.visit_params(&mut |name| {
                if !is_param(name) {
                    errors.push(Diagnostic {
                        code: DiagnosticCode::UndeclaredIdentifier,
                        message: format!("undeclared identifier '{name}'"),
                        loc: None,
                    });
                }
            });
        };
        for eq in &m.equations {
            check_expr(&eq.rhs, &mut errors);
        }
        for check in &m.checks {
            check_expr(&check.lhs, &mut errors);
            check_expr(&check.rhs, &mut errors);
        }
    }

    // Every lagged variable has an initial value; silent zeros are not
    // allowed because they mask transcription mistakes in large models.
    let lagged_names: BTreeSet<String> =
        m.lag_references().into_iter().map(|(name, _)| name).collect();
    for name in lagged_names {
        if is_var(&name) && !m.initials.contains_key(&name) {
            errors.push(Diagnostic {
                code: DiagnosticCode::MissingInitial,
                message: format!("missing initial for lagged {name}"),
                loc: None,
            });
        }
    }

    // Warnings: unused parameters, endogenous variables nothing else reads.
    let mut used_params: BTreeSet<String> = BTreeSet::new();
    let mut referenced: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut record = |expr: &Expr, origin: usize, used_params: &mut BTreeSet<String>| {
        expr.visit_params(&mut |name| {
            used_params.insert(name.to_string());
        });
        expr.visit_vars(&mut |name, _| {
            referenced.entry(name.to_string()).or_default().insert(origin);
        });
    };
    for (i, eq) in m.equations.iter().enumerate() {
        record(&eq.rhs, i, &mut used_params);
    }
    for (j, check) in m.checks.iter().enumerate() {
        // Checks count as readers too; a usize origin disjoint from
        // equation indices keeps the self-reference test below simple.
        record(&check.lhs, m.equations.len() + j, &mut used_params);
        record(&check.rhs, m.equations.len() + j, &mut used_params);
    }
    for p in &m.parameters {
        if !used_params.contains(&p.name) {
            warnings.push(Diagnostic {
                code: DiagnosticCode::UnusedParameter,
                message: format!("unused parameter '{}'", p.name),
                loc: None,
            });
        }
    }
    for var in &m.endogenous {
        let own_eq = m.equations.iter().position(|eq| &eq.lhs == var);
        let read_elsewhere = referenced
            .get(var)
            .map(|origins| origins.iter().any(|o| Some(*o) != own_eq))
            .unwrap_or(false);
        if !read_elsewhere {
            warnings.push(Diagnostic {
                code: DiagnosticCode::UnreferencedVariable,
                message: format!("endogenous variable '{var}' is not referenced by any other equation or check"),
                loc: None,
            });
        }
    }

    ValidationReport { errors, warnings }
}
