//! Codes: flat command stores addressed by program addresses.
//!
//! A code shares the structure of programs: abstraction bodies are referred
//! to by address instead of being nested.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::programs::Pro;

pub type ProgramAddress = usize;

/// A flat command. In a [`ListCode`] the operand of `Lam` is stored relative
/// to the command's own address; [`CodeStore::fetch`] returns it absolute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Com {
    Ret,
    Var(usize),
    Lam(ProgramAddress),
    App,
}

/// Abstract code structure: command fetch and address increment.
pub trait CodeStore {
    fn fetch(&self, p: ProgramAddress) -> Option<Com>;

    fn next(&self, p: ProgramAddress) -> ProgramAddress;

    /// Upper bound on the nesting depth of any program stored in the code.
    fn depth_bound(&self) -> usize;
}

/// Codes realized as command lists; address `n` is the `n`th command.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ListCode {
    pub commands: Vec<Com>,
}

impl ListCode {
    pub fn new(commands: Vec<Com>) -> Self {
        ListCode { commands }
    }

    /// The code `ψ P`, which holds `P` at address 0.
    pub fn compile(p: &Pro) -> Self {
        ListCode::new(psi(p))
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

impl CodeStore for ListCode {
    fn fetch(&self, p: ProgramAddress) -> Option<Com> {
        match *self.commands.get(p)? {
            Com::Lam(k) => p.checked_add(k).map(Com::Lam),
            c => Some(c),
        }
    }

    fn next(&self, p: ProgramAddress) -> ProgramAddress {
        p + 1
    }

    // A path through an acyclic list code visits each address at most once.
    fn depth_bound(&self) -> usize {
        self.commands.len() + 1
    }
}

/// Flattens a program; the body of `lamb Q;P` is laid out after `P`.
pub fn psi(p: &Pro) -> Vec<Com> {
    let mut out = Vec::new();
    emit(p, &mut out);
    out
}

fn emit(p: &Pro, out: &mut Vec<Com>) {
    match p {
        Pro::Ret => out.push(Com::Ret),
        Pro::Var(n, rest) => {
            out.push(Com::Var(*n));
            emit(rest, out);
        }
        Pro::App(rest) => {
            out.push(Com::App);
            emit(rest, out);
        }
        Pro::Lam(body, rest) => {
            let at = out.len();
            out.push(Com::Lam(0));
            emit(rest, out);
            out[at] = Com::Lam(out.len() - at);
            emit(body, out);
        }
    }
}

/// Decides `p ≫_C P`.
pub fn represents_pro<C: CodeStore + ?Sized>(code: &C, p: ProgramAddress, prog: &Pro) -> bool {
    let Some(com) = code.fetch(p) else {
        return false;
    };
    match (com, prog) {
        (Com::Ret, Pro::Ret) => true,
        (Com::Var(n), Pro::Var(m, rest)) => n == *m && represents_pro(code, code.next(p), rest),
        (Com::App, Pro::App(rest)) => represents_pro(code, code.next(p), rest),
        (Com::Lam(q), Pro::Lam(body, rest)) => {
            represents_pro(code, q, body) && represents_pro(code, code.next(p), rest)
        }
        _ => false,
    }
}

/// Reconstructs the program stored at `p`, with nesting depth at most `fuel`.
pub fn read_program<C: CodeStore + ?Sized>(code: &C, p: ProgramAddress, fuel: usize) -> Option<Pro> {
    if fuel == 0 {
        return None;
    }
    Some(match code.fetch(p)? {
        Com::Ret => Pro::Ret,
        Com::Var(n) => Pro::var(n, read_program(code, code.next(p), fuel - 1)?),
        Com::App => Pro::app(read_program(code, code.next(p), fuel - 1)?),
        Com::Lam(q) => {
            let body = read_program(code, q, fuel - 1)?;
            Pro::lam(body, read_program(code, code.next(p), fuel - 1)?)
        }
    })
}

impl fmt::Display for Com {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Com::Ret => f.write_str("ret"),
            Com::Var(n) => write!(f, "var {n}"),
            Com::Lam(k) => write!(f, "lam {k}"),
            Com::App => f.write_str("app"),
        }
    }
}

/// One command per line; the line number is the address.
impl fmt::Display for ListCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.commands {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeParseError {
    pub line: usize,
    pub text: String,
}

impl fmt::Display for CodeParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: cannot parse command `{}`", self.line, self.text)
    }
}

impl std::error::Error for CodeParseError {}

impl FromStr for Com {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let mut words = s.split_whitespace();
        let com = match (words.next(), words.next()) {
            (Some("ret"), None) => Com::Ret,
            (Some("app"), None) => Com::App,
            (Some("var"), Some(n)) => Com::Var(n.parse().map_err(|_| ())?),
            (Some("lam"), Some(k)) => Com::Lam(k.parse().map_err(|_| ())?),
            _ => return Err(()),
        };
        if words.next().is_some() {
            return Err(());
        }
        Ok(com)
    }
}

impl FromStr for ListCode {
    type Err = CodeParseError;

    /// Parses the line format written by `Display`.
    fn from_str(s: &str) -> Result<Self, CodeParseError> {
        s.lines()
            .enumerate()
            .map(|(i, line)| {
                line.trim().parse().map_err(|()| CodeParseError {
                    line: i + 1,
                    text: line.to_string(),
                })
            })
            .collect::<Result<_, _>>()
            .map(ListCode::new)
    }
}
