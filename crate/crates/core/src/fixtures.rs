//! Deliberately broken refinements and machines, for checking that the
//! auditor rejects them.

use crate::framework::{Label, Machine, Refinement, SourceStep};
use crate::terms::Term;

/// Decompiles like the wrapped refinement but strips the outermost λ of
/// abstractions.
pub struct DropLambda<R>(pub R);

impl<R: Refinement<High = Term>> Refinement for DropLambda<R> {
    type Low = R::Low;
    type High = Term;

    fn decompile(&self, low: &R::Low) -> Option<Term> {
        self.0.decompile(low).map(|s| match s {
            Term::Lam(body) => (*body).clone(),
            s => s,
        })
    }

    fn source_step(&self, high: &Term) -> Option<SourceStep<Term>> {
        self.0.source_step(high)
    }
}

/// A state of [`SplitBeta`]: `pending` holds a β successor that the next
/// step will reveal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split<S> {
    pub state: S,
    pub pending: Option<S>,
}

impl<S> Split<S> {
    pub fn new(state: S) -> Self {
        Split { state, pending: None }
    }
}

/// Spends two β steps on every β step of the wrapped machine: the first one
/// stays put, the second one moves.
pub struct SplitBeta<M>(pub M);

impl<M: Machine> Machine for SplitBeta<M> {
    type State = Split<M::State>;

    fn step(&self, st: &Self::State) -> Option<(Label, Self::State)> {
        if let Some(next) = &st.pending {
            return Some((Label::Beta, Split::new(next.clone())));
        }
        match self.0.step(&st.state)? {
            (Label::Beta, next) => Some((
                Label::Beta,
                Split {
                    state: st.state.clone(),
                    pending: Some(next),
                },
            )),
            (Label::Tau, next) => Some((Label::Tau, Split::new(next))),
        }
    }

    fn tau_measure(&self, st: &Self::State) -> usize {
        self.0.tau_measure(&st.state)
    }
}

/// Reads a [`Split`] state through the wrapped refinement.
pub struct SplitView<R>(pub R);

impl<R: Refinement> Refinement for SplitView<R> {
    type Low = Split<R::Low>;
    type High = R::High;

    fn decompile(&self, low: &Self::Low) -> Option<R::High> {
        self.0.decompile(&low.state)
    }

    fn source_step(&self, high: &R::High) -> Option<SourceStep<R::High>> {
        self.0.source_step(high)
    }
}
