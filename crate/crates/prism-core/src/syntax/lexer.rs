//! Tokenizer. `--` starts a line comment except for the `----context` block
//! header, which only counts at column 1.

use crate::decimal::DecimalError;
use crate::diag::{Diag, ErrorCode, Result, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Context,
    Extends,
    External,
    Type,
}

impl Keyword {
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Context => "context",
            Keyword::Extends => "extends",
            Keyword::External => "external",
            Keyword::Type => "type",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Pipe,
    Comma,
    Colon,
    /// `:=`
    Define,
    Dash,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Keyword(Keyword),
    /// `----context` at the start of a line.
    Header,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

const HEADER: &str = "----context";

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s.as_bytes())
    }

    fn skip_line(&mut self) {
        while let Some(b) = self.peek() {
            if b == b'\n' {
                break;
            }
            self.bump();
        }
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

pub fn tokenize(source: &str) -> Result<Vec<Token>> {
    let mut lx = Lexer::new(source);
    let mut out = Vec::new();

    while let Some(b) = lx.peek() {
        let span = lx.span();
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                lx.bump();
            }
            b'-' => {
                if lx.col == 1 && lx.starts_with(HEADER) {
                    let after = lx.peek_at(HEADER.len());
                    if !after.is_some_and(is_ident_continue) {
                        for _ in 0..HEADER.len() {
                            lx.bump();
                        }
                        out.push(Token {
                            kind: TokenKind::Header,
                            lexeme: HEADER.to_string(),
                            span,
                        });
                        continue;
                    }
                }
                if lx.peek_at(1) == Some(b'-') {
                    lx.skip_line();
                } else {
                    lx.bump();
                    out.push(Token {
                        kind: TokenKind::Dash,
                        lexeme: "-".to_string(),
                        span,
                    });
                }
            }
            b'|' => {
                lx.bump();
                out.push(Token {
                    kind: TokenKind::Pipe,
                    lexeme: "|".to_string(),
                    span,
                });
            }
            b',' => {
                lx.bump();
                out.push(Token {
                    kind: TokenKind::Comma,
                    lexeme: ",".to_string(),
                    span,
                });
            }
            b':' => {
                lx.bump();
                if lx.peek() == Some(b'=') {
                    lx.bump();
                    out.push(Token {
                        kind: TokenKind::Define,
                        lexeme: ":=".to_string(),
                        span,
                    });
                } else {
                    out.push(Token {
                        kind: TokenKind::Colon,
                        lexeme: ":".to_string(),
                        span,
                    });
                }
            }
            b'[' => {
                lx.bump();
                out.push(Token {
                    kind: TokenKind::LBracket,
                    lexeme: "[".to_string(),
                    span,
                });
            }
            b']' => {
                lx.bump();
                out.push(Token {
                    kind: TokenKind::RBracket,
                    lexeme: "]".to_string(),
                    span,
                });
            }
            b'(' => {
                lx.bump();
                out.push(Token {
                    kind: TokenKind::LParen,
                    lexeme: "(".to_string(),
                    span,
                });
            }
            b')' => {
                lx.bump();
                out.push(Token {
                    kind: TokenKind::RParen,
                    lexeme: ")".to_string(),
                    span,
                });
            }
            b'"' => {
                lx.bump();
                let mut text = String::from("\"");
                loop {
                    match lx.peek() {
                        None | Some(b'\n') => {
                            return Err(Diag::at(
                                ErrorCode::UnterminatedString,
                                span,
                                "unterminated string literal",
                            ));
                        }
                        Some(b'"') => {
                            lx.bump();
                            text.push('"');
                            break;
                        }
                        Some(b'\\') => {
                            lx.bump();
                            match lx.peek() {
                                Some(c @ (b'"' | b'\\' | b'n' | b't')) => {
                                    lx.bump();
                                    text.push('\\');
                                    text.push(c as char);
                                }
                                _ => {
                                    return Err(Diag::at(
                                        ErrorCode::UnterminatedString,
                                        span,
                                        "bad escape in string literal",
                                    ));
                                }
                            }
                        }
                        Some(_) => {
                            text.push(lx.bump().unwrap() as char);
                        }
                    }
                }
                out.push(Token {
                    kind: TokenKind::Str,
                    lexeme: text,
                    span,
                });
            }
            b'0'..=b'9' => {
                let mut lexeme = String::new();
                while lx.peek().is_some_and(|b| b.is_ascii_digit()) {
                    lexeme.push(lx.bump().unwrap() as char);
                }
                if lx.peek() == Some(b'.') && lx.peek_at(1).is_some_and(|b| b.is_ascii_digit()) {
                    lexeme.push(lx.bump().unwrap() as char);
                    while lx.peek().is_some_and(|b| b.is_ascii_digit()) {
                        lexeme.push(lx.bump().unwrap() as char);
                    }
                }
                if let Err(DecimalError::TooLarge) = lexeme.parse::<crate::decimal::Decimal>() {
                    return Err(Diag::at(
                        ErrorCode::NumberTooLarge,
                        span,
                        format!("number literal `{lexeme}` exceeds 30 digits"),
                    ));
                }
                out.push(Token {
                    kind: TokenKind::Number,
                    lexeme,
                    span,
                });
            }
            _ if is_ident_start(b) => {
                let mut lexeme = String::new();
                while lx.peek().is_some_and(is_ident_continue) {
                    lexeme.push(lx.bump().unwrap() as char);
                }
                let kind = match lexeme.as_str() {
                    "context" => TokenKind::Keyword(Keyword::Context),
                    "extends" => TokenKind::Keyword(Keyword::Extends),
                    "external" => TokenKind::Keyword(Keyword::External),
                    "type" => TokenKind::Keyword(Keyword::Type),
                    _ => TokenKind::Ident,
                };
                out.push(Token { kind, lexeme, span });
            }
            _ => {
                // Report the raw byte; input is expected to be ASCII-ish.
                return Err(Diag::at(
                    ErrorCode::IllegalCharacter,
                    span,
                    format!("illegal character `{}`", b as char),
                ));
            }
        }
    }
    Ok(out)
}
