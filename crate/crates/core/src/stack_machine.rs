//! The naive stack machine: programs on a control stack and an argument
//! stack, with β-reduction performed by program substitution.
//!
//! ```text
//! ret::T, V              ⟶τ  T, V
//! (lamb Q;P)::T, V       ⟶τ  P::T, Q::V
//! (app;P)::T, R::Q::V    ⟶β  Q[0:=R]::P::T, V
//! ```
//!
//! There is no rule for `var`: only states representing closed terms run.

use std::cell::RefCell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::framework::{Label, Machine, Refinement, SourceStep};
use crate::programs::{compile_top, Pro, ProDecompiler};
use crate::stack::{Stack, SuffixMemo};
use crate::terms::Term;

/// Control stack and argument stack.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackState {
    pub tasks: Stack<Pro>,
    pub values: Stack<Pro>,
}

impl StackState {
    pub fn new(tasks: impl Into<Stack<Pro>>, values: impl Into<Stack<Pro>>) -> Self {
        StackState {
            tasks: tasks.into(),
            values: values.into(),
        }
    }

    /// `([γ s ret], [])`.
    pub fn init(s: &Term) -> Self {
        StackState::new(vec![compile_top(s)], Stack::new())
    }
}

pub fn sm_step(st: &StackState) -> Option<(Label, StackState)> {
    let (head, rest) = st.tasks.pop()?;
    match head {
        Pro::Ret => Some((Label::Tau, StackState::new(rest.clone(), st.values.clone()))),
        Pro::Lam(body, cont) => {
            let tasks = rest.push((**cont).clone());
            let values = st.values.push((**body).clone());
            Some((Label::Tau, StackState::new(tasks, values)))
        }
        Pro::App(cont) => {
            let (r, below) = st.values.pop()?;
            let (q, values) = below.pop()?;
            let tasks = rest.push((**cont).clone()).push(q.subst(0, r));
            Some((Label::Beta, StackState::new(tasks, values.clone())))
        }
        Pro::Var(..) => None,
    }
}

/// Programs on the argument stack are abstraction bodies: `P ↦ λs` for `P ≫ s`.
pub fn decompile_values(values: &Stack<Pro>) -> Option<Stack<Term>> {
    let mut d = ProDecompiler::default();
    values.iter().map(|p| d.single(p).map(Term::lam)).collect()
}

/// Executes the control stack, top program first, over the term stack.
pub fn decompile_tasks(tasks: &Stack<Pro>, terms: Stack<Term>) -> Option<Stack<Term>> {
    let mut d = ProDecompiler::default();
    tasks.iter().try_fold(terms, |acc, p| d.run(p, acc))
}

fn single(terms: Stack<Term>) -> Option<Term> {
    match terms.pop() {
        Some((s, rest)) if rest.is_empty() => Some(s.clone()),
        _ => None,
    }
}

/// The term a state refines, if any.
pub fn sm_decompile(st: &StackState) -> Option<Term> {
    single(decompile_tasks(&st.tasks, decompile_values(&st.values)?)?)
}

/// The three mutually exclusive shapes of a decompilable state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StackClass {
    Reducible,
    /// `([], [P])`: the refined term is `λs` with `P ≫ s`.
    FinalAbstraction(Pro),
    /// The control stack is headed by a variable command.
    StuckVar,
}

/// Classifies by the shape of the state alone.
///
/// `None` for shapes no decompilable state can have (such as `app` with fewer
/// than two values).
pub fn sm_classify(st: &StackState) -> Option<StackClass> {
    match st.tasks.top() {
        None => match st.values.pop() {
            Some((p, rest)) if rest.is_empty() => Some(StackClass::FinalAbstraction(p.clone())),
            _ => None,
        },
        Some(Pro::Var(..)) => Some(StackClass::StuckVar),
        Some(Pro::Ret | Pro::Lam(..)) => Some(StackClass::Reducible),
        Some(Pro::App(_)) if st.values.len() >= 2 => Some(StackClass::Reducible),
        Some(Pro::App(_)) => None,
    }
}

/// Command count of all programs on the control stack.
pub fn sm_tau_measure(st: &StackState) -> usize {
    st.tasks.iter().map(Pro::size).sum()
}

/// The stack machine. Keeps a table of control-stack measures, so it is
/// cheap to reuse one machine along a trace.
#[derive(Default)]
pub struct StackMachine {
    measures: RefCell<SuffixMemo<Pro, usize>>,
}

impl StackMachine {
    pub fn new() -> Self {
        StackMachine::default()
    }
}

impl Machine for StackMachine {
    type State = StackState;

    fn step(&self, state: &StackState) -> Option<(Label, StackState)> {
        sm_step(state)
    }

    fn tau_measure(&self, state: &StackState) -> usize {
        let mut memo = self.measures.borrow_mut();
        memo.fold(&state.tasks, 0, |p, below| Some(below + p.size()))
            .unwrap_or(0)
    }
}

/// Stack-machine states refine terms of L.
///
/// Decompilation results are shared between states that share stack tails.
#[derive(Default)]
pub struct StackToTerm {
    cache: RefCell<TermCache>,
}

#[derive(Default)]
struct TermCache {
    programs: ProDecompiler,
    values: SuffixMemo<Pro, Stack<Term>>,
}

impl TermCache {
    fn values(&mut self, values: &Stack<Pro>) -> Option<Stack<Term>> {
        let programs = &mut self.programs;
        self.values.fold(values, Stack::new(), |p, below| {
            Some(below.push(Term::lam(programs.single(p)?)))
        })
    }

    fn run_all<'a>(&mut self, tasks: impl Iterator<Item = &'a Pro>, terms: Stack<Term>) -> Option<Stack<Term>> {
        let (mut work, mut base) = (Vec::new(), terms);
        for p in tasks {
            self.programs.run_on(p, &mut work, &mut base)?;
        }
        Some(work.into_iter().fold(base, |acc, s| acc.push(s)))
    }
}

impl StackToTerm {
    pub fn new() -> Self {
        StackToTerm::default()
    }
}

impl Refinement for StackToTerm {
    type Low = StackState;
    type High = Term;

    fn decompile(&self, low: &StackState) -> Option<Term> {
        let mut cache = self.cache.borrow_mut();
        let terms = cache.values(&low.values)?;
        single(cache.run_all(low.tasks.iter(), terms)?)
    }

    fn source_step(&self, high: &Term) -> Option<SourceStep<Term>> {
        high.step().map(SourceStep::Plain)
    }

    // Both control stacks end in the same tasks, so the decompilations agree
    // when the differing top tasks leave the same term stack behind.
    fn unchanged(&self, before: &StackState, after: &StackState) -> bool {
        let (top_before, top_after, _) = before.tasks.split_common(&after.tasks);
        let mut cache = self.cache.borrow_mut();
        let (Some(v_before), Some(v_after)) = (cache.values(&before.values), cache.values(&after.values)) else {
            return false;
        };
        match (
            cache.run_all(top_before.into_iter(), v_before),
            cache.run_all(top_after.into_iter(), v_after),
        ) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for StackState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stack(f, "T", &self.tasks)?;
        f.write_str(" | ")?;
        write_stack(f, "V", &self.values)
    }
}

pub(crate) fn write_stack<'a, T: fmt::Display + 'a>(
    f: &mut fmt::Formatter<'_>,
    name: &str,
    items: impl IntoIterator<Item = &'a T>,
) -> fmt::Result {
    if !name.is_empty() {
        write!(f, "{name} = ")?;
    }
    f.write_str("[")?;
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    f.write_str("]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{evaluate, EvalResult, Refinement};

    fn var0() -> Pro {
        Pro::var(0, Pro::Ret)
    }
    fn id() -> Term {
        Term::lam(Term::var(0))
    }

    #[test]
    fn return_rule() {
        let st = StackState::new(vec![Pro::Ret], vec![]);
        assert_eq!(sm_step(&st), Some((Label::Tau, StackState::default())));
        assert_eq!(
            evaluate(&StackMachine::new(), st, 10),
            EvalResult::Normal {
                state: StackState::default(),
                steps: 1
            }
        );
    }

    #[test]
    fn application_rule() {
        let q = var0();
        let st = StackState::new(vec![Pro::app(Pro::Ret)], vec![q.clone(), q.clone()]);
        let expected = StackState::new(vec![Pro::lam(q, Pro::Ret), Pro::Ret], vec![]);
        assert_eq!(sm_step(&st), Some((Label::Beta, expected)));
    }

    #[test]
    fn no_rule_for_var_or_short_argument_stack() {
        assert_eq!(sm_step(&StackState::new(vec![var0()], vec![])), None);
        assert_eq!(sm_step(&StackState::new(vec![Pro::app(Pro::Ret)], vec![var0()])), None);
        assert_eq!(sm_step(&StackState::default()), None);
    }

    #[test]
    fn identity_applied_to_identity() {
        let s = Term::app(id(), id());
        let mut st = StackState::init(&s);
        let mut labels = Vec::new();
        while let Some((label, next)) = sm_step(&st) {
            labels.push(label);
            st = next;
        }
        use Label::*;
        assert_eq!(labels, vec![Tau, Tau, Beta, Tau, Tau, Tau]);
        assert_eq!(st, StackState::new(vec![], vec![var0()]));
        assert_eq!(sm_decompile(&st), Some(id()));
    }

    #[test]
    fn cached_refinement_agrees_with_plain_decompiler() {
        let s = Term::apps(
            Term::lam(Term::lam(Term::var(1))),
            [id(), Term::lam(Term::app(Term::var(0), Term::var(0)))],
        );
        let r = StackToTerm::new();
        let mut st = StackState::init(&s);
        while let Some((label, next)) = sm_step(&st) {
            assert_eq!(r.decompile(&next), sm_decompile(&next));
            if label == Label::Tau {
                assert!(r.unchanged(&st, &next));
            } else {
                assert!(!r.unchanged(&st, &next));
            }
            st = next;
        }
    }

    #[test]
    fn value_and_task_decompilers() {
        let stack = |v: Vec<Pro>| Stack::from(v);
        let terms = |v: Vec<Term>| Some(Stack::from(v));
        assert_eq!(decompile_values(&stack(vec![])), terms(vec![]));
        assert_eq!(decompile_values(&stack(vec![var0()])), terms(vec![id()]));
        assert_eq!(decompile_values(&stack(vec![Pro::Ret])), None);
        let a = Stack::from(vec![Term::var(7)]);
        assert_eq!(decompile_tasks(&Stack::new(), a.clone()), Some(a));
        let s = Term::app(id(), Term::var(2));
        assert_eq!(
            decompile_tasks(&stack(vec![compile_top(&s)]), Stack::new()),
            terms(vec![s])
        );
        let (s, t) = (Term::var(1), Term::var(2));
        assert_eq!(
            decompile_tasks(
                &stack(vec![Pro::app(Pro::Ret)]),
                Stack::from(vec![t.clone(), s.clone()])
            ),
            terms(vec![Term::app(s, t)])
        );
    }

    #[test]
    fn state_decompiler() {
        assert_eq!(sm_decompile(&StackState::new(vec![], vec![var0()])), Some(id()));
        assert_eq!(sm_decompile(&StackState::default()), None);
        let s = Term::app(id(), id());
        assert_eq!(sm_decompile(&StackState::init(&s)), Some(s));
    }

    #[test]
    fn classifier_cases() {
        let fin = StackState::new(vec![], vec![var0()]);
        assert_eq!(sm_classify(&fin), Some(StackClass::FinalAbstraction(var0())));
        assert_eq!(
            sm_classify(&StackState::new(vec![Pro::Ret], vec![])),
            Some(StackClass::Reducible)
        );
        let open = StackState::new(vec![Pro::var(1, Pro::Ret)], vec![]);
        assert_eq!(sm_classify(&open), Some(StackClass::StuckVar));
        let s = sm_decompile(&open).unwrap();
        assert_eq!(s, Term::var(1));
        assert!(s.is_stuck());
    }

    #[test]
    fn tau_measure_examples() {
        assert_eq!(sm_tau_measure(&StackState::new(vec![Pro::Ret], vec![])), 1);
        let st = StackState::new(vec![Pro::lam(var0(), Pro::Ret)], vec![]);
        assert_eq!(sm_tau_measure(&st), 4);
        let (label, next) = sm_step(&st).unwrap();
        assert_eq!(label, Label::Tau);
        assert_eq!(sm_tau_measure(&next), 1);
        assert_eq!(sm_tau_measure(&StackState::new(vec![], vec![var0(), var0()])), 0);
        let machine = StackMachine::new();
        assert_eq!(machine.tau_measure(&st), 4);
        assert_eq!(machine.tau_measure(&next), 1);
    }
}
