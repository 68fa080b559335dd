//! Expression evaluation over a pluggable value source.
//!
//! Both the block solver's compiled path and the AST walker here funnel all
//! arithmetic through the shared `apply_binary` / `apply_call` helpers, so
//! the two paths produce bit-identical results for the same inputs.

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {arg}")]
    LogOfNonPositive { arg: f64 },
    #[error("invalid power {base} ^ {exponent}")]
    InvalidPower { base: f64, exponent: f64 },
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
    #[error("unknown identifier '{name}'")]
    UnknownIdentifier { name: String },
    #[error("no value for '{name}' at lag {lag}")]
    MissingLag { name: String, lag: u32 },
}

/// Where identifier values come from during evaluation.
pub trait ValueSource {
    /// Current-period value of a variable.
    fn current(&self, name: &str) -> Option<f64>;
    /// Value of a variable `lag >= 1` periods ago.
    fn lagged(&self, name: &str, lag: u32) -> Option<f64>;
    /// Parameter value.
    fn param(&self, name: &str) -> Option<f64>;
}

pub(crate) fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(EvalError::DivisionByZero)
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => {
            let v = a.powf(b);
            if v.is_nan() {
                Err(EvalError::InvalidPower { base: a, exponent: b })
            } else {
                Ok(v)
            }
        }
    }
}

pub(crate) fn apply_call(func: Func, args: &[f64]) -> Result<f64, EvalError> {
    match func {
        Func::Exp => Ok(args[0].exp()),
        Func::Log => {
            if args[0] <= 0.0 {
                Err(EvalError::LogOfNonPositive { arg: args[0] })
            } else {
                Ok(args[0].ln())
            }
        }
        Func::Min => Ok(args[0].min(args[1])),
        Func::Max => Ok(args[0].max(args[1])),
    }
}

/// Evaluates an expression tree against a [`ValueSource`].
pub fn eval_expr(expr: &Expr, src: &impl ValueSource) -> Result<f64, EvalError> {
    match expr {
        Expr::Const(c) => Ok(*c),
        Expr::Var { name, lag } => {
            if *lag == 0 {
                src.current(name).ok_or_else(|| EvalError::UnknownIdentifier {
                    name: name.clone(),
                })
            } else {
                src.lagged(name, *lag).ok_or_else(|| EvalError::MissingLag {
                    name: name.clone(),
                    lag: *lag,
                })
            }
        }
        Expr::Param(name) => src.param(name).ok_or_else(|| EvalError::UnknownIdentifier {
            name: name.clone(),
        }),
        Expr::Neg(inner) => Ok(-eval_expr(inner, src)?),
        Expr::Binary { op, lhs, rhs } => {
            let a = eval_expr(lhs, src)?;
            let b = eval_expr(rhs, src)?;
            apply_binary(*op, a, b)
        }
        Expr::Call { func, args } => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_expr(a, src)?);
            }
            apply_call(*func, &vals)
        }
    }
}

/// A [`ValueSource`] backed by plain maps; handy for tests and diagnostics.
pub struct MapSource<'a> {
    pub current: &'a std::collections::BTreeMap<String, f64>,
    pub lags: &'a std::collections::BTreeMap<(String, u32), f64>,
    pub params: &'a std::collections::BTreeMap<String, f64>,
}

impl ValueSource for MapSource<'_> {
    fn current(&self, name: &str) -> Option<f64> {
        self.current.get(name).copied()
    }

    fn lagged(&self, name: &str, lag: u32) -> Option<f64> {
        self.lags.get(&(name.to_string(), lag)).copied()
    }

    fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}
