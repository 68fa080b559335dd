//! Canonical text form of a model: `parse_model(render_model(m))` is a
//! structural identity for every valid model.

use std::fmt::Write;

use super::{BinOp, Expr, Model, DEFAULT_MODEL_NAME};

// Binding strength used for minimal parenthesization. Negative constants
// print with their sign, so they bind like a unary minus.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op: BinOp::Add | BinOp::Sub, .. } => 1,
        Expr::Binary { op: BinOp::Mul | BinOp::Div, .. } => 2,
        Expr::Neg(_) => 3,
        Expr::Const(c) if *c < 0.0 => 3,
        Expr::Binary { op: BinOp::Pow, .. } => 4,
        _ => 5,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let prec = precedence(e);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Const(c) => {
            let _ = write!(out, "{c}");
        }
        Expr::Var { name, lag } => {
            out.push_str(name);
            if *lag > 0 {
                let _ = write!(out, "[-{lag}]");
            }
        }
        Expr::Param(name) => out.push_str(name),
        Expr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, 3);
        }
        Expr::Binary { op, lhs, rhs } => match op {
            BinOp::Pow => {
                // Right-associative; anything weaker than an atom on the
                // left needs parens, as does a signed exponent.
                write_expr(out, lhs, 5);
                out.push_str(" ^ ");
                write_expr(out, rhs, 4);
            }
            _ => {
                let p = precedence(e);
                write_expr(out, lhs, p);
                let _ = write!(out, " {} ", op.symbol());
                write_expr(out, rhs, p + 1);
            }
        },
        Expr::Call { func, args } => {
            out.push_str(func.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

/// Renders one expression with canonical spacing.
pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

/// Emits the canonical `.sfc` text for a model: name line (when not the
/// default), endogenous declarations, exogenous values, parameters, initials
/// (sorted by name), equations, checks.
pub fn render_model(m: &Model) -> String {
    let mut out = String::new();
    if m.name != DEFAULT_MODEL_NAME {
        let _ = writeln!(out, "model {}", m.name);
    }
    if !m.endogenous.is_empty() {
        let _ = writeln!(out, "var {}", m.endogenous.join(", "));
    }
    for exo in &m.exogenous {
        if exo.values.len() == 1 {
            let _ = writeln!(out, "exo {} = {}", exo.name, exo.values[0]);
        } else {
            let vals: Vec<String> = exo.values.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "exo {} = [{}]", exo.name, vals.join(", "));
        }
    }
    for p in &m.parameters {
        let _ = writeln!(out, "param {} = {}", p.name, p.value);
    }
    for (name, value) in &m.initials {
        let _ = writeln!(out, "init {name} = {value}");
    }
    for eq in &m.equations {
        let _ = writeln!(out, "{} = {}", eq.lhs, render_expr(&eq.rhs));
    }
    for check in &m.checks {
        let _ = writeln!(
            out,
            "check {} == {}",
            render_expr(&check.lhs),
            render_expr(&check.rhs)
        );
    }
    out
}
