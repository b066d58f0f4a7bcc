//! The call-by-value calculus L: de Bruijn terms with simple substitution.
//!
//! β-reduction only fires on `(λs)(λt)`, never under a binder, and the left
//! side of an application is reduced before the right side.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::framework::{iterate, EvalResult, Label, Machine};

// Equality below is structural with a pointer shortcut, so it agrees with the
// derived hash.
#[allow(clippy::derived_hash_with_manual_eq)]
#[derive(Clone, Debug, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(usize),
    App(Arc<Term>, Arc<Term>),
    Lam(Arc<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermClass {
    Reducible,
    Abstraction,
    Stuck,
}

impl Term {
    pub fn var(n: usize) -> Term {
        Term::Var(n)
    }

    pub fn app(s: Term, t: Term) -> Term {
        Term::App(Arc::new(s), Arc::new(t))
    }

    pub fn lam(s: Term) -> Term {
        Term::Lam(Arc::new(s))
    }

    /// Left-associated application `s t1 t2 …`.
    pub fn apps(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    /// `(λ0 0)(λ0 0)`.
    pub fn omega() -> Term {
        let w = Term::lam(Term::app(Term::var(0), Term::var(0)));
        Term::app(w.clone(), w)
    }

    /// Number of constructors.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(s, t) => 1 + s.size() + t.size(),
            Term::Lam(s) => 1 + s.size(),
        }
    }

    pub fn is_lam(&self) -> bool {
        matches!(self, Term::Lam(_))
    }

    /// Simple substitution `self[k := u]`: no shifting, capturing on open terms.
    pub fn subst(&self, k: usize, u: &Term) -> Term {
        self.subst_shared(k, u).unwrap_or_else(|| self.clone())
    }

    // `None` when `k` does not occur, so untouched subterms stay shared.
    fn subst_shared(&self, k: usize, u: &Term) -> Option<Term> {
        match self {
            Term::Var(n) if *n == k => Some(u.clone()),
            Term::Var(_) => None,
            Term::App(s, t) => match (s.subst_shared(k, u), t.subst_shared(k, u)) {
                (None, None) => None,
                (s2, t2) => Some(Term::App(
                    s2.map_or_else(|| s.clone(), Arc::new),
                    t2.map_or_else(|| t.clone(), Arc::new),
                )),
            },
            Term::Lam(s) => s.subst_shared(k + 1, u).map(Term::lam),
        }
    }

    /// The unique successor under `≻`, if any.
    pub fn step(&self) -> Option<Term> {
        let Term::App(s, t) = self else {
            return None;
        };
        if let (Term::Lam(body), Term::Lam(_)) = (&**s, &**t) {
            return Some(body.subst(0, t));
        }
        if let Some(s2) = s.step() {
            return Some(Term::App(Arc::new(s2), t.clone()));
        }
        if s.is_lam() {
            return t.step().map(|t2| Term::App(s.clone(), Arc::new(t2)));
        }
        None
    }

    /// Every free variable is smaller than `k`.
    pub fn is_bound(&self, k: usize) -> bool {
        match self {
            Term::Var(n) => *n < k,
            Term::App(s, t) => s.is_bound(k) && t.is_bound(k),
            Term::Lam(s) => s.is_bound(k + 1),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.is_bound(0)
    }

    /// Smallest free index, counted relative to the outside of the term.
    pub fn min_free_index(&self) -> Option<usize> {
        fn go(s: &Term, depth: usize) -> Option<usize> {
            match s {
                Term::Var(n) => n.checked_sub(depth),
                Term::App(s, t) => match (go(s, depth), go(t, depth)) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                },
                Term::Lam(s) => go(s, depth + 1),
            }
        }
        go(self, 0)
    }

    pub fn is_stuck(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::App(s, t) => s.is_stuck() || (s.is_lam() && t.is_stuck()),
            Term::Lam(_) => false,
        }
    }

    pub fn classify(&self) -> TermClass {
        if self.step().is_some() {
            TermClass::Reducible
        } else if self.is_lam() {
            TermClass::Abstraction
        } else {
            TermClass::Stuck
        }
    }
}

/// L as a machine: every step is a β step.
#[derive(Clone, Copy, Debug, Default)]
pub struct Calculus;

impl Machine for Calculus {
    type State = Term;

    fn step(&self, s: &Term) -> Option<(Label, Term)> {
        s.step().map(|t| (Label::Beta, t))
    }

    fn tau_measure(&self, _: &Term) -> usize {
        0
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        fn same(a: &Arc<Term>, b: &Arc<Term>) -> bool {
            Arc::ptr_eq(a, b) || **a == **b
        }
        match (self, other) {
            (Term::Var(m), Term::Var(n)) => m == n,
            (Term::App(s1, t1), Term::App(s2, t2)) => same(s1, s2) && same(t1, t2),
            (Term::Lam(s1), Term::Lam(s2)) => same(s1, s2),
            _ => false,
        }
    }
}

/// Reduces `s` with at most `fuel` steps.
pub fn eval(s: Term, fuel: usize) -> EvalResult<Term> {
    iterate(s, fuel, Term::step)
}

/// De Bruijn notation: `λ` binds, application is juxtaposition.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(n) => write!(f, "{n}"),
            Term::Lam(s) => write!(f, "λ{s}"),
            Term::App(s, t) => {
                if s.is_lam() {
                    write!(f, "({s})")?;
                } else {
                    write!(f, "{s}")?;
                }
                if matches!(**t, Term::Var(_)) {
                    write!(f, " {t}")
                } else {
                    write!(f, " ({t})")
                }
            }
        }
    }
}
