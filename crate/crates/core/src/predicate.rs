//! Predicates over completed traces: LTL on finite traces, the parser for
//! the textual formula syntax, and outcome labeling.
//!
//! Atoms are activity labels compared by exact string equality. Semantics
//! are the standard finite-trace ones with strong next: `X` at the last
//! position is false, `G` over an empty suffix is true, `F` over an empty
//! suffix is false.

use std::fmt;

use crate::error::{Error, Result};
use crate::event_model::Trace;

/// An LTL formula over finite traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LtlFormula {
    /// Holds at a position iff the event's activity equals the label.
    Atom(String),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Implies(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Eventually(Box<LtlFormula>),
    Globally(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
}

/// Outcome of evaluating the classification predicate on a completed trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    Compliant,
    NonCompliant,
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeLabel::Compliant => write!(f, "compliant"),
            OutcomeLabel::NonCompliant => write!(f, "non_compliant"),
        }
    }
}

/// A classification function over completed traces. [`LtlFormula`] is the
/// built-in implementation; arbitrary predicates can be plugged in.
pub trait TraceLabeler: Sync {
    fn label(&self, trace: &Trace) -> OutcomeLabel;
    /// Human-readable description stored alongside trained models.
    fn describe(&self) -> String;
}

impl TraceLabeler for LtlFormula {
    fn label(&self, trace: &Trace) -> OutcomeLabel {
        label_trace(self, trace)
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

/// Compliant iff the formula is satisfied at the first position.
pub fn label_trace(formula: &LtlFormula, trace: &Trace) -> OutcomeLabel {
    if evaluate(formula, trace) {
        OutcomeLabel::Compliant
    } else {
        OutcomeLabel::NonCompliant
    }
}

/// Satisfaction of `formula` on the completed trace, evaluated at position
/// one. Runs in O(|formula| * |trace|): each subformula's truth value is
/// computed once per position, children first.
pub fn evaluate(formula: &LtlFormula, trace: &Trace) -> bool {
    let activities: Vec<&str> = trace.events.iter().map(|e| e.activity.as_str()).collect();
    evaluate_activities(formula, &activities)
}

pub(crate) fn evaluate_activities(formula: &LtlFormula, activities: &[&str]) -> bool {
    // positions 0..n plus the empty suffix at n
    table(formula, activities)[0]
}

/// Truth values of `formula` at every position 0..=n (n = past the end).
fn table(formula: &LtlFormula, activities: &[&str]) -> Vec<bool> {
    let n = activities.len();
    match formula {
        LtlFormula::Atom(label) => (0..=n).map(|i| i < n && activities[i] == label).collect(),
        LtlFormula::Not(inner) => table(inner, activities).into_iter().map(|v| !v).collect(),
        LtlFormula::And(a, b) => zip_with(table(a, activities), table(b, activities), |x, y| x && y),
        LtlFormula::Or(a, b) => zip_with(table(a, activities), table(b, activities), |x, y| x || y),
        LtlFormula::Implies(a, b) => {
            zip_with(table(a, activities), table(b, activities), |x, y| !x || y)
        }
        LtlFormula::Next(inner) => {
            let t = table(inner, activities);
            (0..=n).map(|i| i + 1 < n && t[i + 1]).collect()
        }
        LtlFormula::Eventually(inner) => {
            let t = table(inner, activities);
            let mut out = vec![false; n + 1];
            for i in (0..n).rev() {
                out[i] = t[i] || out[i + 1];
            }
            out
        }
        LtlFormula::Globally(inner) => {
            let t = table(inner, activities);
            let mut out = vec![true; n + 1];
            for i in (0..n).rev() {
                out[i] = t[i] && out[i + 1];
            }
            out
        }
        LtlFormula::Until(lhs, rhs) => {
            let tl = table(lhs, activities);
            let tr = table(rhs, activities);
            let mut out = vec![false; n + 1];
            for i in (0..n).rev() {
                out[i] = tr[i] || (tl[i] && out[i + 1]);
            }
            out
        }
    }
}

fn zip_with(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

// --- textual syntax ---------------------------------------------------------
//
// atom       := quoted string
// unary      := ! | X | F | G          (highest precedence)
// binary     := U, then &&, then ||, then ->   (loosest)
// parentheses group; U and -> associate to the right, && and || to the left.

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl LtlFormula {
    fn precedence(&self) -> u8 {
        match self {
            LtlFormula::Implies(..) => 1,
            LtlFormula::Or(..) => 2,
            LtlFormula::And(..) => 3,
            LtlFormula::Until(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < outer;
        if parens {
            write!(f, "(")?;
        }
        match self {
            LtlFormula::Atom(label) => {
                write!(f, "\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))?
            }
            LtlFormula::Not(inner) => {
                write!(f, "!")?;
                inner.fmt_prec(f, 5)?;
            }
            LtlFormula::Next(inner) => {
                write!(f, "X")?;
                inner.fmt_prec(f, 5)?;
            }
            LtlFormula::Eventually(inner) => {
                write!(f, "F")?;
                inner.fmt_prec(f, 5)?;
            }
            LtlFormula::Globally(inner) => {
                write!(f, "G")?;
                inner.fmt_prec(f, 5)?;
            }
            LtlFormula::Until(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, " U ")?;
                b.fmt_prec(f, 4)?;
            }
            LtlFormula::And(a, b) => {
                a.fmt_prec(f, 3)?;
                write!(f, " && ")?;
                b.fmt_prec(f, 4)?;
            }
            LtlFormula::Or(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " || ")?;
                b.fmt_prec(f, 3)?;
            }
            LtlFormula::Implies(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " -> ")?;
                b.fmt_prec(f, 1)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Parses the textual formula syntax. Errors carry the byte offset of the
/// offending token.
pub fn parse_formula(text: &str) -> Result<LtlFormula> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let formula = parser.implies()?;
    match parser.peek() {
        None => Ok(formula),
        Some(tok) => Err(syntax(tok.offset, format!("unexpected {}", tok.kind))),
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::parse(format!("offset {offset}"), message.into())
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Atom(String),
    Not,
    Next,
    Eventually,
    Globally,
    Until,
    AndAnd,
    OrOr,
    Arrow,
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Atom(s) => write!(f, "atom {s:?}"),
            TokenKind::Not => write!(f, "'!'"),
            TokenKind::Next => write!(f, "'X'"),
            TokenKind::Eventually => write!(f, "'F'"),
            TokenKind::Globally => write!(f, "'G'"),
            TokenKind::Until => write!(f, "'U'"),
            TokenKind::AndAnd => write!(f, "'&&'"),
            TokenKind::OrOr => write!(f, "'||'"),
            TokenKind::Arrow => write!(f, "'->'"),
            TokenKind::LParen => write!(f, "'('"),
            TokenKind::RParen => write!(f, "')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let offset = i;
        let kind = match bytes[i] {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'!' => {
                i += 1;
                TokenKind::Not
            }
            b'X' => {
                i += 1;
                TokenKind::Next
            }
            b'F' => {
                i += 1;
                TokenKind::Eventually
            }
            b'G' => {
                i += 1;
                TokenKind::Globally
            }
            b'U' => {
                i += 1;
                TokenKind::Until
            }
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 2;
                    TokenKind::AndAnd
                } else {
                    return Err(syntax(offset, "expected '&&'"));
                }
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 2;
                    TokenKind::OrOr
                } else {
                    return Err(syntax(offset, "expected '||'"));
                }
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    i += 2;
                    TokenKind::Arrow
                } else {
                    return Err(syntax(offset, "expected '->'"));
                }
            }
            b'"' => {
                i += 1;
                let mut label = String::new();
                loop {
                    match bytes.get(i) {
                        None => return Err(syntax(offset, "unterminated quoted atom")),
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(b'\\') => match bytes.get(i + 1) {
                            Some(c @ (b'"' | b'\\')) => {
                                label.push(*c as char);
                                i += 2;
                            }
                            _ => return Err(syntax(i, "invalid escape in atom")),
                        },
                        Some(_) => {
                            // copy the full UTF-8 character
                            let ch = text[i..].chars().next().expect("in-bounds char");
                            label.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                TokenKind::Atom(label)
            }
            other => return Err(syntax(offset, format!("unexpected character {:?}", other as char))),
        };
        tokens.push(Token { kind, offset });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implies(&mut self) -> Result<LtlFormula> {
        let lhs = self.or()?;
        if self.eat(&TokenKind::Arrow) {
            let rhs = self.implies()?;
            Ok(LtlFormula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<LtlFormula> {
        let mut lhs = self.and()?;
        while self.eat(&TokenKind::OrOr) {
            let rhs = self.and()?;
            lhs = LtlFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<LtlFormula> {
        let mut lhs = self.until()?;
        while self.eat(&TokenKind::AndAnd) {
            let rhs = self.until()?;
            lhs = LtlFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<LtlFormula> {
        let lhs = self.unary()?;
        if self.eat(&TokenKind::Until) {
            let rhs = self.until()?;
            Ok(LtlFormula::Until(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<LtlFormula> {
        let Some(token) = self.peek().cloned() else {
            return Err(syntax(
                self.tokens.last().map(|t| t.offset + 1).unwrap_or(0),
                "unexpected end of formula",
            ));
        };
        match token.kind {
            TokenKind::Not => {
                self.pos += 1;
                Ok(LtlFormula::Not(Box::new(self.unary()?)))
            }
            TokenKind::Next => {
                self.pos += 1;
                Ok(LtlFormula::Next(Box::new(self.unary()?)))
            }
            TokenKind::Eventually => {
                self.pos += 1;
                Ok(LtlFormula::Eventually(Box::new(self.unary()?)))
            }
            TokenKind::Globally => {
                self.pos += 1;
                Ok(LtlFormula::Globally(Box::new(self.unary()?)))
            }
            TokenKind::Atom(label) => {
                self.pos += 1;
                Ok(LtlFormula::Atom(label))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.implies()?;
                if self.eat(&TokenKind::RParen) {
                    Ok(inner)
                } else {
                    Err(syntax(
                        self.peek().map(|t| t.offset).unwrap_or(token.offset),
                        "expected ')'",
                    ))
                }
            }
            other => Err(syntax(token.offset, format!("unexpected {other}"))),
        }
    }
}

#[cfg(test)]
mod tests;
