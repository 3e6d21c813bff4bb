//! Text formats: graph documents, constraint files, reports, DOT and SADF export.

pub mod constraints;
pub mod dot;
pub mod format;
pub mod report;
pub mod sadf;

use std::fmt;

pub use constraints::parse_constraints;
pub use dot::to_dot;
pub use format::{parse_graph, serialize_model, serialize_unfolded};
pub use report::{write_report, Report, ReportFormat};
pub use sadf::export_sadf;

/// Error of the line-oriented parsers; line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A whitespace-separated word and its 1-based column.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub column: usize,
}

/// Splits `text` into numbered lines of tokens, dropping `#` comments and
/// blank lines.
pub(crate) fn tokenize(text: &str) -> impl Iterator<Item = (usize, Vec<Token<'_>>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (col, (byte, ch)) in content.char_indices().enumerate() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some((byte, col)),
                (true, Some((b, c))) => {
                    tokens.push(Token {
                        text: &content[b..byte],
                        column: c + 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some((b, c)) = start {
            tokens.push(Token {
                text: &content[b..],
                column: c + 1,
            });
        }
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

pub(crate) fn parse_number(line: usize, tok: Token<'_>) -> Result<f64, ParseError> {
    match tok.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError::new(
            line,
            tok.column,
            format!("expected a finite number, found {:?}", tok.text),
        )),
    }
}
