//! Recursive-descent parser for the `.sfc` model format.
//!
//! Parsing is two-phase. Phase one reads every line into raw items whose
//! identifier references still carry source locations. Phase two resolves
//! identifiers against the declaration tables, so declarations may appear
//! anywhere in the file. The returned [`Model`] is location-free, which
//! keeps `parse(render(m)) == m` a structural identity.

use std::collections::BTreeMap;

use super::lexer::{tokenize_line, Spanned, Tok};
use super::{
    BinOp, CheckExpr, DiagnosticCode, Equation, Exogenous, Expr, Func, Model, Parameter,
    SourceLoc, DEFAULT_MODEL_NAME, RESERVED_WORDS,
};

/// One parse problem with its source position.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{loc}: {message} [{code}]")]
pub struct ParseError {
    pub loc: SourceLoc,
    pub code: DiagnosticCode,
    pub message: String,
}

/// All problems found in one parse. Parsing keeps going after an error so a
/// single run reports every bad line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseFailure {
    pub errors: Vec<ParseError>,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

// Raw expression: identifiers not yet classified as variable or parameter.
#[derive(Debug, Clone)]
enum RawExpr {
    Const(f64),
    Ref { name: String, lag: u32, loc: SourceLoc },
    Neg(Box<RawExpr>),
    Binary {
        op: BinOp,
        lhs: Box<RawExpr>,
        rhs: Box<RawExpr>,
    },
    Call {
        func: Func,
        args: Vec<RawExpr>,
    },
}

#[derive(Debug)]
enum RawItem {
    ModelName {
        name: String,
        loc: SourceLoc,
    },
    Var {
        name: String,
        loc: SourceLoc,
    },
    Exo {
        name: String,
        values: Vec<f64>,
        loc: SourceLoc,
    },
    Param {
        name: String,
        value: f64,
        loc: SourceLoc,
    },
    Init {
        name: String,
        value: f64,
        loc: SourceLoc,
    },
    Equation {
        lhs: String,
        rhs: RawExpr,
        loc: SourceLoc,
    },
    Check {
        lhs: RawExpr,
        rhs: RawExpr,
    },
}

/// Parses `.sfc` source text into a [`Model`].
///
/// Deterministic: the same text always yields the same model. Declaration
/// order in the text defines the variable indices used by every downstream
/// matrix and graph.
pub fn parse_model(source_text: &str) -> Result<Model, ParseFailure> {
    let mut errors: Vec<ParseError> = Vec::new();
    let mut items: Vec<RawItem> = Vec::new();

    for (idx, line) in source_text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = match tokenize_line(line, line_no) {
            Ok(t) => t,
            Err((loc, message)) => {
                errors.push(ParseError {
                    loc,
                    code: DiagnosticCode::Syntax,
                    message,
                });
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        match parse_line(&toks, line_no) {
            Ok(mut line_items) => items.append(&mut line_items),
            Err(e) => errors.push(e),
        }
    }

    let model = assemble(items, &mut errors);
    if errors.is_empty() {
        Ok(model)
    } else {
        Err(ParseFailure { errors })
    }
}

fn is_reserved(name: &str) -> bool {
    RESERVED_WORDS.contains(&name)
}

// ---------------------------------------------------------------------------
// Line parsing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn loc(&self) -> SourceLoc {
        self.toks
            .get(self.pos)
            .map(|s| s.loc)
            .unwrap_or(SourceLoc {
                line: self.line,
                col: self.toks.last().map(|s| s.loc.col + 1).unwrap_or(1),
            })
    }

    fn next(&mut self) -> Option<&'a Spanned> {
        let s = self.toks.get(self.pos);
        if s.is_some() {
            self.pos += 1;
        }
        s
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            loc: self.loc(),
            code: DiagnosticCode::Syntax,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<SourceLoc, ParseError> {
        match self.next() {
            Some(s) if &s.tok == want => Ok(s.loc),
            Some(s) => Err(ParseError {
                loc: s.loc,
                code: DiagnosticCode::Syntax,
                message: format!("expected {what}, found {}", s.tok.describe()),
            }),
            None => Err(self.error(format!("expected {what}, found end of line"))),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, SourceLoc), ParseError> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Ident(name),
                loc,
            }) => {
                if is_reserved(name) {
                    Err(ParseError {
                        loc: *loc,
                        code: DiagnosticCode::ReservedWord,
                        message: format!("'{name}' is a reserved word"),
                    })
                } else {
                    Ok((name.clone(), *loc))
                }
            }
            Some(s) => Err(ParseError {
                loc: s.loc,
                code: DiagnosticCode::Syntax,
                message: format!("expected {what}, found {}", s.tok.describe()),
            }),
            None => Err(self.error(format!("expected {what}, found end of line"))),
        }
    }

    /// A number with optional leading sign, for declaration values.
    fn expect_signed_number(&mut self) -> Result<f64, ParseError> {
        let negative = matches!(self.peek(), Some(Tok::Minus));
        if negative {
            self.next();
        }
        match self.next() {
            Some(Spanned {
                tok: Tok::Number(n),
                ..
            }) => Ok(if negative { -n } else { *n }),
            Some(s) => Err(ParseError {
                loc: s.loc,
                code: DiagnosticCode::Syntax,
                message: format!("expected number, found {}", s.tok.describe()),
            }),
            None => Err(self.error("expected number, found end of line")),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(s) => Err(ParseError {
                loc: s.loc,
                code: DiagnosticCode::Syntax,
                message: format!("unexpected {} after complete statement", s.tok.describe()),
            }),
        }
    }
}

fn parse_line(toks: &[Spanned], line: usize) -> Result<Vec<RawItem>, ParseError> {
    let mut cur = Cursor { toks, pos: 0, line };
    let first = &toks[0];
    if let Tok::Ident(word) = &first.tok {
        match word.as_str() {
            "model" => {
                cur.next();
                let (name, loc) = cur.expect_ident("model name")?;
                cur.end()?;
                return Ok(vec![RawItem::ModelName { name, loc }]);
            }
            "var" => {
                cur.next();
                let mut out = Vec::new();
                loop {
                    let (name, loc) = cur.expect_ident("variable name")?;
                    out.push(RawItem::Var { name, loc });
                    match cur.peek() {
                        Some(Tok::Comma) => {
                            cur.next();
                        }
                        None => break,
                        Some(_) => return Err(cur.error("expected ',' or end of line")),
                    }
                }
                return Ok(out);
            }
            "exo" => {
                cur.next();
                let (name, loc) = cur.expect_ident("exogenous variable name")?;
                cur.expect(&Tok::Assign, "'='")?;
                let values = if matches!(cur.peek(), Some(Tok::LBracket)) {
                    cur.next();
                    let mut vals = vec![cur.expect_signed_number()?];
                    while matches!(cur.peek(), Some(Tok::Comma)) {
                        cur.next();
                        vals.push(cur.expect_signed_number()?);
                    }
                    cur.expect(&Tok::RBracket, "']'")?;
                    vals
                } else {
                    vec![cur.expect_signed_number()?]
                };
                cur.end()?;
                return Ok(vec![RawItem::Exo { name, values, loc }]);
            }
            "param" => {
                cur.next();
                let (name, loc) = cur.expect_ident("parameter name")?;
                cur.expect(&Tok::Assign, "'='")?;
                let value = cur.expect_signed_number()?;
                cur.end()?;
                return Ok(vec![RawItem::Param { name, value, loc }]);
            }
            "init" => {
                cur.next();
                let (name, loc) = cur.expect_ident("variable name")?;
                cur.expect(&Tok::Assign, "'='")?;
                let value = cur.expect_signed_number()?;
                cur.end()?;
                return Ok(vec![RawItem::Init { name, value, loc }]);
            }
            "check" => {
                cur.next();
                let lhs = parse_expr(&mut cur)?;
                cur.expect(&Tok::EqEq, "'=='")?;
                let rhs = parse_expr(&mut cur)?;
                cur.end()?;
                return Ok(vec![RawItem::Check { lhs, rhs }]);
            }
            _ => {}
        }
    }

    // Equation: IDENT '=' expr
    let (lhs, loc) = cur.expect_ident("declaration keyword or equation left-hand side")?;
    cur.expect(&Tok::Assign, "'='")?;
    let rhs = parse_expr(&mut cur)?;
    cur.end()?;
    Ok(vec![RawItem::Equation { lhs, rhs, loc }])
}

// ---------------------------------------------------------------------------
// Expression grammar (precedence: ^  >  unary -  >  * /  >  + -)
// ---------------------------------------------------------------------------

fn parse_expr(cur: &mut Cursor) -> Result<RawExpr, ParseError> {
    let mut lhs = parse_term(cur)?;
    loop {
        let op = match cur.peek() {
            Some(Tok::Plus) => BinOp::Add,
            Some(Tok::Minus) => BinOp::Sub,
            _ => break,
        };
        cur.next();
        let rhs = parse_term(cur)?;
        lhs = RawExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        };
    }
    Ok(lhs)
}

fn parse_term(cur: &mut Cursor) -> Result<RawExpr, ParseError> {
    let mut lhs = parse_unary(cur)?;
    loop {
        let op = match cur.peek() {
            Some(Tok::Star) => BinOp::Mul,
            Some(Tok::Slash) => BinOp::Div,
            _ => break,
        };
        cur.next();
        let rhs = parse_unary(cur)?;
        lhs = RawExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        };
    }
    Ok(lhs)
}

fn parse_unary(cur: &mut Cursor) -> Result<RawExpr, ParseError> {
    if matches!(cur.peek(), Some(Tok::Minus)) {
        cur.next();
        let inner = parse_unary(cur)?;
        // Fold a sign applied to a literal into the constant so the
        // canonical renderer round-trips negative numbers exactly.
        return Ok(match inner {
            RawExpr::Const(c) => RawExpr::Const(-c),
            other => RawExpr::Neg(Box::new(other)),
        });
    }
    parse_power(cur)
}

fn parse_power(cur: &mut Cursor) -> Result<RawExpr, ParseError> {
    let base = parse_atom(cur)?;
    if matches!(cur.peek(), Some(Tok::Caret)) {
        cur.next();
        // Right-associative; the exponent may carry a unary minus.
        let exponent = parse_unary(cur)?;
        return Ok(RawExpr::Binary {
            op: BinOp::Pow,
            lhs: Box::new(base),
            rhs: Box::new(exponent),
        });
    }
    Ok(base)
}

fn parse_atom(cur: &mut Cursor) -> Result<RawExpr, ParseError> {
    match cur.next() {
        Some(Spanned {
            tok: Tok::Number(n),
            ..
        }) => Ok(RawExpr::Const(*n)),
        Some(Spanned {
            tok: Tok::LParen, ..
        }) => {
            let inner = parse_expr(cur)?;
            cur.expect(&Tok::RParen, "')'")?;
            Ok(inner)
        }
        Some(Spanned {
            tok: Tok::Ident(name),
            loc,
        }) => {
            if let Some(func) = Func::from_name(name) {
                let call_loc = *loc;
                cur.expect(&Tok::LParen, &format!("'(' after '{name}'"))?;
                let mut args = vec![parse_expr(cur)?];
                while matches!(cur.peek(), Some(Tok::Comma)) {
                    cur.next();
                    args.push(parse_expr(cur)?);
                }
                cur.expect(&Tok::RParen, "')'")?;
                if args.len() != func.arity() {
                    return Err(ParseError {
                        loc: call_loc,
                        code: DiagnosticCode::BadArity,
                        message: format!(
                            "{} takes {} argument{}, found {}",
                            func.name(),
                            func.arity(),
                            if func.arity() == 1 { "" } else { "s" },
                            args.len()
                        ),
                    });
                }
                return Ok(RawExpr::Call { func, args });
            }
            if is_reserved(name) {
                return Err(ParseError {
                    loc: *loc,
                    code: DiagnosticCode::ReservedWord,
                    message: format!("'{name}' is a reserved word"),
                });
            }
            let mut lag = 0u32;
            if matches!(cur.peek(), Some(Tok::LBracket)) {
                cur.next();
                cur.expect(&Tok::Minus, "'-' (lag syntax is X[-k])")?;
                let k = match cur.next() {
                    Some(Spanned {
                        tok: Tok::Number(n),
                        loc,
                    }) => {
                        if n.fract() != 0.0 || *n < 1.0 || *n > u32::MAX as f64 {
                            return Err(ParseError {
                                loc: *loc,
                                code: DiagnosticCode::Syntax,
                                message: format!("lag must be a positive integer, found {n}"),
                            });
                        }
                        *n as u32
                    }
                    _ => {
                        return Err(cur.error("expected lag count after '[-'"));
                    }
                };
                cur.expect(&Tok::RBracket, "']'")?;
                lag = k;
            }
            Ok(RawExpr::Ref {
                name: name.clone(),
                lag,
                loc: *loc,
            })
        }
        Some(s) => Err(ParseError {
            loc: s.loc,
            code: DiagnosticCode::Syntax,
            message: format!("expected expression, found {}", s.tok.describe()),
        }),
        None => Err(cur.error("expected expression, found end of line")),
    }
}

// ---------------------------------------------------------------------------
// Assembly and resolution
// ---------------------------------------------------------------------------

fn assemble(items: Vec<RawItem>, errors: &mut Vec<ParseError>) -> Model {
    let mut name = DEFAULT_MODEL_NAME.to_string();
    let mut saw_name = false;
    let mut endogenous: Vec<String> = Vec::new();
    let mut exogenous: Vec<Exogenous> = Vec::new();
    let mut parameters: Vec<Parameter> = Vec::new();
    let mut initials: BTreeMap<String, f64> = BTreeMap::new();
    let mut raw_equations: Vec<(String, RawExpr, SourceLoc)> = Vec::new();
    let mut raw_checks: Vec<(RawExpr, RawExpr)> = Vec::new();
    let mut declared: BTreeMap<String, SourceLoc> = BTreeMap::new();
    let mut inits_pending: Vec<(String, f64, SourceLoc)> = Vec::new();

    for item in items {
        match item {
            RawItem::ModelName { name: n, loc } => {
                if saw_name {
                    errors.push(ParseError {
                        loc,
                        code: DiagnosticCode::DuplicateDeclaration,
                        message: "duplicate 'model' line".into(),
                    });
                } else {
                    name = n;
                    saw_name = true;
                }
            }
            RawItem::Var { name, loc } => {
                if declared.insert(name.clone(), loc).is_some() {
                    errors.push(ParseError {
                        loc,
                        code: DiagnosticCode::DuplicateDeclaration,
                        message: format!("duplicate declaration of '{name}'"),
                    });
                } else {
                    endogenous.push(name);
                }
            }
            RawItem::Exo { name, values, loc } => {
                if declared.insert(name.clone(), loc).is_some() {
                    errors.push(ParseError {
                        loc,
                        code: DiagnosticCode::DuplicateDeclaration,
                        message: format!("duplicate declaration of '{name}'"),
                    });
                } else {
                    exogenous.push(Exogenous { name, values });
                }
            }
            RawItem::Param { name, value, loc } => {
                if declared.insert(name.clone(), loc).is_some() {
                    errors.push(ParseError {
                        loc,
                        code: DiagnosticCode::DuplicateDeclaration,
                        message: format!("duplicate declaration of '{name}'"),
                    });
                } else {
                    parameters.push(Parameter { name, value });
                }
            }
            RawItem::Init { name, value, loc } => {
                inits_pending.push((name, value, loc));
            }
            RawItem::Equation { lhs, rhs, loc } => {
                raw_equations.push((lhs, rhs, loc));
            }
            RawItem::Check { lhs, rhs } => {
                raw_checks.push((lhs, rhs));
            }
        }
    }

    let is_var = |n: &str| {
        endogenous.iter().any(|v| v == n) || exogenous.iter().any(|e| e.name == n)
    };
    let is_param = |n: &str| parameters.iter().any(|p| p.name == n);

    for (init_name, value, loc) in inits_pending {
        if is_param(&init_name) {
            errors.push(ParseError {
                loc,
                code: DiagnosticCode::Syntax,
                message: format!("init for parameter '{init_name}' (parameters have no lags)"),
            });
        } else if !is_var(&init_name) {
            errors.push(ParseError {
                loc,
                code: DiagnosticCode::UndeclaredIdentifier,
                message: format!("init for undeclared identifier '{init_name}'"),
            });
        } else if initials.insert(init_name.clone(), value).is_some() {
            errors.push(ParseError {
                loc,
                code: DiagnosticCode::DuplicateDeclaration,
                message: format!("duplicate init for '{init_name}'"),
            });
        }
    }

    // Equations: left-hand sides must be endogenous and unique.
    let mut equations: Vec<Equation> = Vec::new();
    for (lhs, raw, loc) in raw_equations {
        if endogenous.iter().any(|v| v == &lhs) {
            if equations.iter().any(|eq| eq.lhs == lhs) {
                errors.push(ParseError {
                    loc,
                    code: DiagnosticCode::DuplicateEquation,
                    message: format!("duplicate equation for '{lhs}'"),
                });
                continue;
            }
        } else if is_param(&lhs) || exogenous.iter().any(|e| e.name == lhs) {
            errors.push(ParseError {
                loc,
                code: DiagnosticCode::EquationForNonEndogenous,
                message: format!("equation for '{lhs}', which is not endogenous"),
            });
            continue;
        } else {
            errors.push(ParseError {
                loc,
                code: DiagnosticCode::UndeclaredIdentifier,
                message: format!("equation for undeclared identifier '{lhs}'"),
            });
            continue;
        }
        if let Some(rhs) = resolve(&raw, &is_var, &is_param, errors) {
            equations.push(Equation { lhs, rhs });
        }
    }

    for var in &endogenous {
        if !equations.iter().any(|eq| &eq.lhs == var) {
            let loc = declared.get(var).copied().unwrap_or(SourceLoc { line: 0, col: 0 });
            errors.push(ParseError {
                loc,
                code: DiagnosticCode::MissingEquation,
                message: format!("endogenous variable '{var}' has no equation"),
            });
        }
    }

    let mut checks: Vec<CheckExpr> = Vec::new();
    for (raw_lhs, raw_rhs) in raw_checks {
        let lhs = resolve(&raw_lhs, &is_var, &is_param, errors);
        let rhs = resolve(&raw_rhs, &is_var, &is_param, errors);
        if let (Some(lhs), Some(rhs)) = (lhs, rhs) {
            checks.push(CheckExpr { lhs, rhs });
        }
    }

    Model {
        name,
        endogenous,
        exogenous,
        parameters,
        equations,
        initials,
        checks,
    }
}

/// Classifies every raw reference as variable or parameter. Returns `None`
/// when anything in the subtree failed to resolve (errors are pushed).
fn resolve(
    raw: &RawExpr,
    is_var: &impl Fn(&str) -> bool,
    is_param: &impl Fn(&str) -> bool,
    errors: &mut Vec<ParseError>,
) -> Option<Expr> {
    match raw {
        RawExpr::Const(c) => Some(Expr::Const(*c)),
        RawExpr::Ref { name, lag, loc } => {
            if is_var(name) {
                Some(Expr::Var {
                    name: name.clone(),
                    lag: *lag,
                })
            } else if is_param(name) {
                if *lag > 0 {
                    errors.push(ParseError {
                        loc: *loc,
                        code: DiagnosticCode::LaggedParameter,
                        message: format!("parameter '{name}' referenced with lag"),
                    });
                    None
                } else {
                    Some(Expr::Param(name.clone()))
                }
            } else {
                errors.push(ParseError {
                    loc: *loc,
                    code: DiagnosticCode::UndeclaredIdentifier,
                    message: format!("undeclared identifier '{name}'"),
                });
                None
            }
        }
        RawExpr::Neg(inner) => {
            let inner = resolve(inner, is_var, is_param, errors)?;
            Some(Expr::Neg(Box::new(inner)))
        }
        RawExpr::Binary { op, lhs, rhs } => {
            let lhs = resolve(lhs, is_var, is_param, errors);
            let rhs = resolve(rhs, is_var, is_param, errors);
            Some(Expr::Binary {
                op: *op,
                lhs: Box::new(lhs?),
                rhs: Box::new(rhs?),
            })
        }
        RawExpr::Call { func, args } => {
            let resolved: Vec<Option<Expr>> = args
                .iter()
                .map(|a| resolve(a, is_var, is_param, errors))
                .collect();
            let mut out = Vec::with_capacity(resolved.len());
            for r in resolved {
                out.push(r?);
            }
            Some(Expr::Call { func: *func, args: out })
        }
    }
}
