//! Line tokenizer for the `.sfc` format. The format is line-oriented, so
//! each line is tokenized independently; `#` starts a comment.

use super::SourceLoc;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Assign,
    EqEq,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Number(n) => format!("number '{n}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Assign => "'='".into(),
            Tok::EqEq => "'=='".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Spanned {
    pub tok: Tok,
    pub loc: SourceLoc,
}

/// Tokenizes one line. `line_no` is 1-based; columns are 1-based byte
/// offsets, which match display columns for the ASCII subset the grammar
/// uses.
pub(super) fn tokenize_line(line: &str, line_no: usize) -> Result<Vec<Spanned>, (SourceLoc, String)> {
    let bytes = line.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let loc = SourceLoc {
            line: line_no,
            col: i + 1,
        };
        match c {
            '#' => break,
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '+' => {
                toks.push(Spanned { tok: Tok::Plus, loc });
                i += 1;
            }
            '-' => {
                toks.push(Spanned { tok: Tok::Minus, loc });
                i += 1;
            }
            '*' => {
                toks.push(Spanned { tok: Tok::Star, loc });
                i += 1;
            }
            '/' => {
                toks.push(Spanned { tok: Tok::Slash, loc });
                i += 1;
            }
            '^' => {
                toks.push(Spanned { tok: Tok::Caret, loc });
                i += 1;
            }
            '(' => {
                toks.push(Spanned { tok: Tok::LParen, loc });
                i += 1;
            }
            ')' => {
                toks.push(Spanned { tok: Tok::RParen, loc });
                i += 1;
            }
            '[' => {
                toks.push(Spanned { tok: Tok::LBracket, loc });
                i += 1;
            }
            ']' => {
                toks.push(Spanned { tok: Tok::RBracket, loc });
                i += 1;
            }
            ',' => {
                toks.push(Spanned { tok: Tok::Comma, loc });
                i += 1;
            }
            '=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push(Spanned { tok: Tok::EqEq, loc });
                    i += 2;
                } else {
                    toks.push(Spanned { tok: Tok::Assign, loc });
                    i += 1;
                }
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(Spanned {
                    tok: Tok::Ident(line[start..i].to_string()),
                    loc,
                });
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err((loc, "digit expected after decimal point".into()));
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &line[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| (loc, format!("invalid number literal '{text}'")))?;
                toks.push(Spanned {
                    tok: Tok::Number(value),
                    loc,
                });
            }
            other => {
                return Err((loc, format!("unexpected character '{other}'")));
            }
        }
    }
    Ok(toks)
}
