use std::fmt;

use super::{ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Eq,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    /// Position of the first character.
    pub start: (usize, usize),
    /// Position of the last character.
    pub end: (usize, usize),
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '&' | '-' | '.' | '\'')
}

pub(crate) fn tokenize(text: &str, file: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut last = (1usize, 1usize);
    let mut i = 0;

    let err = |line, column, message: String| ParseError {
        span: SourceSpan {
            file: file.to_string(),
            line,
            column,
        },
        message,
        expected: Vec::new(),
    };

    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let single = |t: Tok| Token {
            tok: t,
            start,
            end: start,
        };
        match c {
            '\n' => {
                last = (line, col);
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    last = (line, col);
                    i += 1;
                    col += 1;
                }
                continue;
            }
            '{' => out.push(single(Tok::LBrace)),
            '}' => out.push(single(Tok::RBrace)),
            '(' => out.push(single(Tok::LParen)),
            ')' => out.push(single(Tok::RParen)),
            ';' => out.push(single(Tok::Semi)),
            ':' => out.push(single(Tok::Colon)),
            ',' => out.push(single(Tok::Comma)),
            '=' => out.push(single(Tok::Eq)),
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token {
                    tok: Tok::Arrow,
                    start,
                    end: (line, col + 1),
                });
                i += 2;
                col += 2;
                last = (line, col - 1);
                continue;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(err(start.0, start.1, "unterminated string".into()))
                        }
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(e @ ('"' | '\\')) => s.push(*e),
                                _ => return Err(err(line, col, "invalid escape in string".into())),
                            }
                            i += 2;
                            col += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    start,
                    end: (line, col),
                });
            }
            c if is_ident_char(c) => {
                let mut s = String::new();
                while i < chars.len() && is_ident_char(chars[i]) {
                    if chars[i] == '-' && chars.get(i + 1) == Some(&'>') {
                        break;
                    }
                    s.push(chars[i]);
                    i += 1;
                    col += 1;
                }
                last = (line, col - 1);
                out.push(Token {
                    tok: Tok::Ident(s),
                    start,
                    end: last,
                });
                continue;
            }
            other => return Err(err(line, col, format!("unexpected character {other:?}"))),
        }
        last = (line, col);
        i += 1;
        col += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        start: last,
        end: last,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrow_splits_identifiers() {
        let toks = tokenize("P->A e-id", "t").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("P".into()),
                Tok::Arrow,
                Tok::Ident("A".into()),
                Tok::Ident("e-id".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("# comment\n  role", "t").unwrap();
        assert_eq!(toks[0].start, (2, 3));
        assert_eq!(toks[0].end, (2, 6));
    }

    #[test]
    fn eof_sits_on_last_character_line() {
        let toks = tokenize("a;\n\n", "t").unwrap();
        assert_eq!(toks.last().unwrap().start.0, 2);
    }
}
