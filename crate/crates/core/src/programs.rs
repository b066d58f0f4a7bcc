//! Programs: the tree-shaped command sequences every machine executes.

use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::stack::Stack;
use crate::terms::Term;

/// `ret | var n; P | lamb Q; P | app; P`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pro {
    Ret,
    Var(usize, Arc<Pro>),
    Lam(Arc<Pro>, Arc<Pro>),
    App(Arc<Pro>),
}

impl Pro {
    pub fn var(n: usize, rest: Pro) -> Pro {
        Pro::Var(n, Arc::new(rest))
    }

    pub fn lam(body: Pro, rest: Pro) -> Pro {
        Pro::Lam(Arc::new(body), Arc::new(rest))
    }

    pub fn app(rest: Pro) -> Pro {
        Pro::App(Arc::new(rest))
    }

    /// Number of commands, counting nested abstraction bodies.
    pub fn size(&self) -> usize {
        let mut count = 0;
        let mut cur = self;
        loop {
            count += 1;
            match cur {
                Pro::Ret => return count,
                Pro::Var(_, rest) | Pro::App(rest) => cur = rest,
                Pro::Lam(body, rest) => {
                    count += body.size();
                    cur = rest;
                }
            }
        }
    }

    /// `self[k := r]`; a matching variable command becomes `lamb r`.
    pub fn subst(&self, k: usize, r: &Pro) -> Pro {
        match self {
            Pro::Ret => Pro::Ret,
            Pro::Var(n, rest) if *n == k => Pro::lam(r.clone(), rest.subst(k, r)),
            Pro::Var(n, rest) => Pro::var(*n, rest.subst(k, r)),
            Pro::Lam(body, rest) => Pro::lam(body.subst(k + 1, r), rest.subst(k, r)),
            Pro::App(rest) => Pro::app(rest.subst(k, r)),
        }
    }

    pub fn is_bound(&self, k: usize) -> bool {
        match self {
            Pro::Ret => true,
            Pro::Var(n, rest) => *n < k && rest.is_bound(k),
            Pro::Lam(body, rest) => body.is_bound(k + 1) && rest.is_bound(k),
            Pro::App(rest) => rest.is_bound(k),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.is_bound(0)
    }
}

/// Compiles `s` in front of the continuation `cont`.
pub fn compile(s: &Term, cont: Pro) -> Pro {
    match s {
        Term::Var(n) => Pro::var(*n, cont),
        Term::Lam(body) => Pro::lam(compile(body, Pro::Ret), cont),
        Term::App(s, t) => compile(s, compile(t, Pro::app(cont))),
    }
}

pub fn compile_top(s: &Term) -> Pro {
    compile(s, Pro::Ret)
}

/// Runs `p` over the term stack `stack` (head = top of stack).
///
/// `None` when the program does not represent a term stack transformer on
/// this input.
pub fn decompile(p: &Pro, stack: Vec<Term>) -> Option<Vec<Term>> {
    decompile_all(std::slice::from_ref(p), stack)
}

/// Runs each program of `ps` in turn, first to last, over the term stack.
pub fn decompile_all(ps: &[Pro], stack: Vec<Term>) -> Option<Vec<Term>> {
    let mut d = ProDecompiler::default();
    let out = ps.iter().try_fold(Stack::from(stack), |acc, p| d.run(p, acc))?;
    Some(out.to_vec())
}

/// Decompiles programs over persistent term stacks, remembering abstraction
/// bodies by identity.
#[derive(Default)]
pub(crate) struct ProDecompiler {
    // body address -> (body, the abstraction it represents)
    bodies: FxHashMap<usize, (Arc<Pro>, Option<Term>)>,
}

impl ProDecompiler {
    pub(crate) fn run(&mut self, p: &Pro, stack: Stack<Term>) -> Option<Stack<Term>> {
        let mut base = stack;
        let mut work = Vec::new();
        self.run_on(p, &mut work, &mut base)?;
        Some(work.into_iter().fold(base, |acc, s| acc.push(s)))
    }

    /// Runs `p` on the term stack `base` with `work` stacked on top; `base`
    /// only shrinks when `work` runs out.
    pub(crate) fn run_on(&mut self, mut p: &Pro, work: &mut Vec<Term>, base: &mut Stack<Term>) -> Option<()> {
        let mut pop = |work: &mut Vec<Term>| {
            work.pop().or_else(|| {
                let (s, rest) = base.pop()?;
                let s = s.clone();
                *base = rest.clone();
                Some(s)
            })
        };
        loop {
            match p {
                Pro::Ret => return Some(()),
                Pro::Var(n, rest) => {
                    work.push(Term::Var(*n));
                    p = rest;
                }
                Pro::Lam(body, rest) => {
                    work.push(self.abstraction(body)?);
                    p = rest;
                }
                Pro::App(rest) => {
                    let t = pop(work)?;
                    let s = pop(work)?;
                    work.push(Term::app(s, t));
                    p = rest;
                }
            }
        }
    }

    /// The term `p` represents.
    pub(crate) fn single(&mut self, p: &Pro) -> Option<Term> {
        let out = self.run(p, Stack::new())?;
        match out.pop() {
            Some((s, rest)) if rest.is_empty() => Some(s.clone()),
            _ => None,
        }
    }

    /// `λs` for the `s` that `body` represents.
    pub(crate) fn abstraction(&mut self, body: &Arc<Pro>) -> Option<Term> {
        let key = Arc::as_ptr(body) as usize;
        if let Some((_, s)) = self.bodies.get(&key) {
            return s.clone();
        }
        let s = self.single(body).map(Term::lam);
        self.bodies.insert(key, (body.clone(), s.clone()));
        s
    }
}

/// The term `p` represents, i.e. `s` with `decompile(p, []) = [s]`.
pub fn decompile_top(p: &Pro) -> Option<Term> {
    ProDecompiler::default().single(p)
}

pub fn represents(p: &Pro, s: &Term) -> bool {
    decompile_top(p).as_ref() == Some(s)
}

impl fmt::Display for Pro {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut cur = self;
        loop {
            match cur {
                Pro::Ret => return f.write_str("ret"),
                Pro::Var(n, rest) => {
                    write!(f, "var {n}; ")?;
                    cur = rest;
                }
                Pro::Lam(body, rest) => {
                    write!(f, "lam [{body}]; ")?;
                    cur = rest;
                }
                Pro::App(rest) => {
                    f.write_str("app; ")?;
                    cur = rest;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: usize) -> Term {
        Term::var(n)
    }
    fn l(s: Term) -> Term {
        Term::lam(s)
    }
    fn a(s: Term, t: Term) -> Term {
        Term::app(s, t)
    }
    fn var0() -> Pro {
        Pro::var(0, Pro::Ret)
    }

    #[test]
    fn compile_examples() {
        assert_eq!(compile_top(&v(0)), var0());
        assert_eq!(compile_top(&l(v(0))), Pro::lam(var0(), Pro::Ret));
        assert_eq!(
            compile_top(&a(l(v(0)), l(v(0)))),
            Pro::lam(var0(), Pro::lam(var0(), Pro::app(Pro::Ret)))
        );
    }

    #[test]
    fn decompile_examples() {
        let s = a(l(v(0)), l(v(0)));
        assert_eq!(decompile(&compile_top(&s), vec![]), Some(vec![s]));
        let stack = vec![v(3), l(v(0))];
        assert_eq!(decompile(&Pro::Ret, stack.clone()), Some(stack));
        assert_eq!(decompile(&Pro::app(Pro::Ret), vec![v(1)]), None);
        // top of stack is the argument
        assert_eq!(
            decompile(&Pro::app(Pro::Ret), vec![v(1), v(2)]),
            Some(vec![a(v(2), v(1))])
        );
    }

    #[test]
    fn represents_examples() {
        let s = a(l(v(0)), l(v(0)));
        assert!(represents(&compile_top(&s), &s));
        assert!(!represents(&Pro::Ret, &v(0)));
        assert!(represents(&var0(), &v(0)));
        // two terms on the stack is not a single term
        assert_eq!(decompile_top(&Pro::var(0, var0())), None);
    }

    #[test]
    fn psubst_examples() {
        let q = Pro::lam(var0(), Pro::Ret);
        assert_eq!(var0().subst(0, &q), Pro::lam(q.clone(), Pro::Ret));
        assert_eq!(Pro::Ret.subst(4, &q), Pro::Ret);
        // lamb bodies substitute one level up
        let p = Pro::lam(Pro::var(1, Pro::Ret), Pro::var(0, Pro::Ret));
        assert_eq!(
            p.subst(0, &q),
            Pro::lam(Pro::lam(q.clone(), Pro::Ret), Pro::lam(q, Pro::Ret))
        );
    }

    #[test]
    fn pbound_examples() {
        assert!(Pro::Ret.is_bound(0));
        assert!(!Pro::var(1, Pro::Ret).is_bound(1));
        assert!(Pro::lam(var0(), Pro::Ret).is_closed());
        assert!(compile_top(&l(l(v(1)))).is_closed());
    }

    #[test]
    fn size_counts_nested_commands() {
        assert_eq!(Pro::Ret.size(), 1);
        assert_eq!(Pro::lam(var0(), Pro::Ret).size(), 4);
    }

    #[test]
    fn display() {
        assert_eq!(
            compile_top(&a(l(v(0)), l(v(0)))).to_string(),
            "lam [var 0; ret]; lam [var 0; ret]; app; ret"
        );
    }
}
