//! Textual ceremony language (`.cer` files): parser, serializer and an ASCII
//! message sequence chart renderer.
//!
//! ```text
//! ceremony "Flight Boarding I" {
//!   role P human "passenger";
//!   channel pa visual between P A;
//!   step 1: P -> A over pa: face, id, bp;
//!   do A: VALIDATE id check;
//!   do A: SET verdict set verdict if success(all_activities) then PASS else STOP;
//!   decision A at do 7 free;
//!   artifact P "bp" security_exclusive forgeable;
//! }
//! ```

mod lexer;
mod msc;
mod parser;
mod print;

use std::fmt;

pub use msc::{arrow_count, render_msc};
pub use parser::{parse, parse_named, parse_term};
pub use print::{serialize, term_source};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DslError {
    #[error("cannot serialize invalid ceremony: {0}")]
    InvalidCeremony(String),
}

/// Token texts of a source file with their line numbers. Used by tests that
/// perturb sources one token at a time.
pub fn token_lines(text: &str) -> Result<Vec<(usize, usize, usize)>, ParseError> {
    let toks = lexer::tokenize(text, "<input>")?;
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(text.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    let byte_of = |(line, col): (usize, usize)| {
        let start = offsets[line - 1];
        text[start..]
            .char_indices()
            .nth(col - 1)
            .map(|(b, _)| start + b)
            .unwrap_or(text.len())
    };
    Ok(toks
        .iter()
        .filter(|t| t.tok != lexer::Tok::Eof)
        .map(|t| {
            let from = byte_of(t.start);
            let last = byte_of(t.end);
            let to = last + text[last..].chars().next().map(char::len_utf8).unwrap_or(0);
            (t.start.0, from, to)
        })
        .collect())
}
