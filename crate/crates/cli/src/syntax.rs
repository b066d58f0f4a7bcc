//! Surface syntax: named and de Bruijn terms.
//!
//! ```text
//! term := lam | app
//! lam  := ("\" | "λ") [name "."] term
//! app  := atom+ [lam]
//! atom := name | nat | "(" term ")"
//! ```
//!
//! Bare naturals are de Bruijn indices; they count every enclosing binder,
//! named or not. A λ without a name binds anonymously.

use std::fmt;

use lam_core::Term;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurfaceTerm {
    NamedVar(String),
    IndexVar(usize),
    Lam(Option<String>, Box<SurfaceTerm>),
    App(Box<SurfaceTerm>, Box<SurfaceTerm>),
}

/// A line/column position, both starting at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("parse error at {pos}: {message}")]
    Parse { pos: Pos, message: String },
    #[error("unbound name `{0}`")]
    Unbound(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Lambda,
    Dot,
    Open,
    Close,
    Name(String),
    Nat(usize),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Lambda => f.write_str("`λ`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Open => f.write_str("`(`"),
            Tok::Close => f.write_str("`)`"),
            Tok::Name(x) => write!(f, "name `{x}`"),
            Tok::Nat(n) => write!(f, "index `{n}`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() && c != 'λ' || c == '_'
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_ascii_digit() || c == '\''
}

fn tokenize(input: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let mut advance = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        };
        let tok = match c {
            c if c.is_whitespace() => {
                advance(&mut chars);
                continue;
            }
            '#' => {
                // comment to end of line
                while chars.peek().is_some_and(|&c| c != '\n') {
                    advance(&mut chars);
                }
                continue;
            }
            '\\' | 'λ' => Tok::Lambda,
            '.' => Tok::Dot,
            '(' => Tok::Open,
            ')' => Tok::Close,
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                    digits.push(d);
                    advance(&mut chars);
                }
                let n = digits.parse().map_err(|_| SyntaxError::Parse {
                    pos,
                    message: format!("index `{digits}` is too large"),
                })?;
                out.push((Tok::Nat(n), pos));
                continue;
            }
            c if is_name_start(c) => {
                let mut name = String::new();
                while let Some(&d) = chars.peek().filter(|&&d| is_name_char(d)) {
                    name.push(d);
                    advance(&mut chars);
                }
                out.push((Tok::Name(name), pos));
                continue;
            }
            c => {
                return Err(SyntaxError::Parse {
                    pos,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        advance(&mut chars);
        out.push((tok, pos));
    }
    out.push((Tok::End, Pos { line, column }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        tok
    }

    fn error<T>(&self, expected: &str) -> Result<T, SyntaxError> {
        let (tok, pos) = &self.toks[self.at];
        Err(SyntaxError::Parse {
            pos: *pos,
            message: format!("expected {expected}, found {tok}"),
        })
    }

    fn term(&mut self) -> Result<SurfaceTerm, SyntaxError> {
        if *self.peek() == Tok::Lambda {
            return self.lam();
        }
        let mut head = self.atom()?;
        loop {
            match self.peek() {
                Tok::Name(_) | Tok::Nat(_) | Tok::Open => {
                    let arg = self.atom()?;
                    head = SurfaceTerm::App(Box::new(head), Box::new(arg));
                }
                Tok::Lambda => {
                    let arg = self.lam()?;
                    return Ok(SurfaceTerm::App(Box::new(head), Box::new(arg)));
                }
                _ => return Ok(head),
            }
        }
    }

    fn lam(&mut self) -> Result<SurfaceTerm, SyntaxError> {
        self.bump();
        let binder = match (self.peek().clone(), self.peek2()) {
            (Tok::Name(x), Tok::Dot) => {
                self.bump();
                self.bump();
                Some(x)
            }
            _ => None,
        };
        let body = self.term()?;
        Ok(SurfaceTerm::Lam(binder, Box::new(body)))
    }

    fn atom(&mut self) -> Result<SurfaceTerm, SyntaxError> {
        match self.peek().clone() {
            Tok::Name(x) => {
                self.bump();
                Ok(SurfaceTerm::NamedVar(x))
            }
            Tok::Nat(n) => {
                self.bump();
                Ok(SurfaceTerm::IndexVar(n))
            }
            Tok::Open => {
                self.bump();
                let t = self.term()?;
                if *self.peek() != Tok::Close {
                    return self.error("`)`");
                }
                self.bump();
                Ok(t)
            }
            _ => self.error("a term"),
        }
    }
}

pub fn parse(input: &str) -> Result<SurfaceTerm, SyntaxError> {
    let mut p = Parser {
        toks: tokenize(input)?,
        at: 0,
    };
    let t = p.term()?;
    if *p.peek() != Tok::End {
        return p.error("end of input");
    }
    Ok(t)
}

/// Resolves names to indices. Inner binders shadow outer ones.
pub fn to_debruijn(t: &SurfaceTerm) -> Result<Term, SyntaxError> {
    fn go(t: &SurfaceTerm, scope: &mut Vec<Option<String>>) -> Result<Term, SyntaxError> {
        Ok(match t {
            SurfaceTerm::IndexVar(n) => Term::var(*n),
            SurfaceTerm::NamedVar(x) => {
                let n = scope
                    .iter()
                    .rev()
                    .position(|b| b.as_deref() == Some(x))
                    .ok_or_else(|| SyntaxError::Unbound(x.clone()))?;
                Term::var(n)
            }
            SurfaceTerm::Lam(binder, body) => {
                scope.push(binder.clone());
                let body = go(body, scope);
                scope.pop();
                Term::lam(body?)
            }
            SurfaceTerm::App(s, u) => Term::app(go(s, scope)?, go(u, scope)?),
        })
    }
    go(t, &mut Vec::new())
}

pub fn parse_term(input: &str) -> Result<Term, SyntaxError> {
    to_debruijn(&parse(input)?)
}
