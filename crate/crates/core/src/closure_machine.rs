//! Closures and the closure machine.
//!
//! A closure `P/E` pairs a program with an environment that delays the
//! substitution of its free variables. Decompilation back to plain programs
//! is parallel substitution of the recursively decompiled environment.
//!
//! ```text
//! (ret/E)::T, V                 ⟶τ  T, V
//! (var n;P/E)::T, V             ⟶τ  (P/E)::T, e::V          if E[n] = e
//! (lamb Q;P/E)::T, V            ⟶τ  (P/E)::T, (Q/E)::V
//! (app;P/E)::T, e::(Q/F)::V     ⟶β  (Q/e::F)::(P/E)::T, V
//! ```

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::framework::{Label, Machine, Refinement, SourceStep};
use crate::programs::Pro;
use crate::stack::{Stack, SuffixMemo};
use crate::stack_machine::{sm_step, write_stack, StackState};

pub type Env = Arc<[Clo]>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clo {
    pub prog: Arc<Pro>,
    pub env: Env,
}

impl Clo {
    pub fn new(prog: impl Into<Arc<Pro>>, env: impl Into<Env>) -> Clo {
        Clo {
            prog: prog.into(),
            env: env.into(),
        }
    }

    /// `P/[]`.
    pub fn bare(prog: impl Into<Arc<Pro>>) -> Clo {
        Clo::new(prog, empty_env())
    }

    fn key(&self) -> (usize, usize) {
        (Arc::as_ptr(&self.prog) as usize, env_key(&self.env))
    }
}

fn env_key(env: &Env) -> usize {
    Arc::as_ptr(env) as *const Clo as usize
}

pub fn empty_env() -> Env {
    Arc::from(Vec::new())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CloState {
    pub tasks: Stack<Clo>,
    pub values: Stack<Clo>,
}

impl CloState {
    pub fn new(tasks: impl Into<Stack<Clo>>, values: impl Into<Stack<Clo>>) -> Self {
        CloState {
            tasks: tasks.into(),
            values: values.into(),
        }
    }

    /// `([P/[]], [])`.
    pub fn init(p: Pro) -> Self {
        CloState::new(vec![Clo::bare(p)], Stack::new())
    }
}

/// Parallel substitution `P[k := W]`.
pub fn par_subst(p: &Pro, k: usize, w: &[Pro]) -> Pro {
    subst_with(p, k, &mut |i| w.get(i).cloned())
}

fn subst_with(p: &Pro, k: usize, lookup: &mut dyn FnMut(usize) -> Option<Pro>) -> Pro {
    match p {
        Pro::Ret => Pro::Ret,
        Pro::Var(n, rest) => {
            let replacement = n.checked_sub(k).and_then(&mut *lookup);
            let rest = subst_with(rest, k, lookup);
            match replacement {
                Some(q) => Pro::lam(q, rest),
                None => Pro::var(*n, rest),
            }
        }
        Pro::Lam(body, rest) => {
            let body = subst_with(body, k + 1, lookup);
            Pro::lam(body, subst_with(rest, k, lookup))
        }
        Pro::App(rest) => Pro::app(subst_with(rest, k, lookup)),
    }
}

/// Memoizes closure decompilation; environments are shared. Keys are
/// pointers, so each entry keeps its closure alive.
#[derive(Default)]
struct Decompiler {
    memo: FxHashMap<(usize, usize), (Clo, Pro)>,
}

impl Decompiler {
    fn delta1(&mut self, e: &Clo) -> Pro {
        if let Some((_, p)) = self.memo.get(&e.key()) {
            return p.clone();
        }
        let p = self.delta(e, 1);
        self.memo.insert(e.key(), (e.clone(), p.clone()));
        p
    }

    fn delta(&mut self, e: &Clo, cutoff: usize) -> Pro {
        let env = e.env.clone();
        subst_with(&e.prog, cutoff, &mut |i| env.get(i).map(|c| self.delta1(c)))
    }
}

/// Decompiles a closure on the argument stack (free variable 0 is the argument).
pub fn delta1(e: &Clo) -> Pro {
    Decompiler::default().delta1(e)
}

/// Decompiles a closure on the control stack.
pub fn delta0(e: &Clo) -> Pro {
    Decompiler::default().delta(e, 0)
}

#[derive(Default)]
struct BoundChecker {
    good_envs: FxHashMap<usize, Env>,
}

impl BoundChecker {
    /// `E ▷ 1`.
    fn env_bound(&mut self, env: &Env) -> bool {
        if self.good_envs.contains_key(&env_key(env)) {
            return true;
        }
        let ok = env.iter().all(|e| self.clo_bound(e, 1));
        if ok {
            self.good_envs.insert(env_key(env), env.clone());
        }
        ok
    }

    /// `P/E ▷ 1` for `extra = 1`, `P/E ▷ 0` for `extra = 0`.
    fn clo_bound(&mut self, e: &Clo, extra: usize) -> bool {
        e.prog.is_bound(e.env.len() + extra) && self.env_bound(&e.env)
    }
}

/// `e ▷ 1`: value closures may mention variable 0 beyond their environment.
pub fn clo_bound(e: &Clo) -> bool {
    BoundChecker::default().clo_bound(e, 1)
}

/// `e ▷ 0`: task closures are fully closed by their environment.
pub fn clo_closed(e: &Clo) -> bool {
    BoundChecker::default().clo_bound(e, 0)
}

pub fn state_closed(st: &CloState) -> bool {
    let mut checker = BoundChecker::default();
    st.tasks.iter().all(|e| checker.clo_bound(e, 0)) && st.values.iter().all(|e| checker.clo_bound(e, 1))
}

pub fn cm_step(st: &CloState) -> Option<(Label, CloState)> {
    let (head, rest) = st.tasks.pop()?;
    let env = &head.env;
    match &*head.prog {
        Pro::Ret => Some((Label::Tau, CloState::new(rest.clone(), st.values.clone()))),
        Pro::Var(n, cont) => {
            let e = env.get(*n)?.clone();
            let tasks = rest.push(Clo::new(cont.clone(), env.clone()));
            Some((Label::Tau, CloState::new(tasks, st.values.push(e))))
        }
        Pro::Lam(body, cont) => {
            let tasks = rest.push(Clo::new(cont.clone(), env.clone()));
            let values = st.values.push(Clo::new(body.clone(), env.clone()));
            Some((Label::Tau, CloState::new(tasks, values)))
        }
        Pro::App(cont) => {
            let (e, below) = st.values.pop()?;
            let (fun, values) = below.pop()?;
            let env_called: Env = std::iter::once(e.clone()).chain(fun.env.iter().cloned()).collect();
            let called = Clo::new(fun.prog.clone(), env_called);
            let tasks = rest.push(Clo::new(cont.clone(), env.clone())).push(called);
            Some((Label::Beta, CloState::new(tasks, values.clone())))
        }
    }
}

/// `(δ₀@T, δ₁@V)` for closed states, `None` otherwise.
pub fn cm_decompile(st: &CloState) -> Option<StackState> {
    if !state_closed(st) {
        return None;
    }
    let mut d = Decompiler::default();
    let tasks: Stack<Pro> = st.tasks.iter().map(|e| d.delta(e, 0)).collect();
    let values: Stack<Pro> = st.values.iter().map(|e| d.delta1(e)).collect();
    Some(StackState::new(tasks, values))
}

/// Command count of the programs on the control stack; environments excluded.
pub fn cm_tau_measure(st: &CloState) -> usize {
    st.tasks.iter().map(|e| e.prog.size()).sum()
}

/// The closure machine, with a table of control-stack measures.
#[derive(Default)]
pub struct ClosureMachine {
    measures: RefCell<SuffixMemo<Clo, usize>>,
}

impl ClosureMachine {
    pub fn new() -> Self {
        ClosureMachine::default()
    }
}

impl Machine for ClosureMachine {
    type State = CloState;

    fn step(&self, state: &CloState) -> Option<(Label, CloState)> {
        cm_step(state)
    }

    fn tau_measure(&self, state: &CloState) -> usize {
        let mut memo = self.measures.borrow_mut();
        memo.fold(&state.tasks, 0, |e, below| Some(below + e.prog.size()))
            .unwrap_or(0)
    }
}

/// Closed closure-machine states refine stack-machine states.
#[derive(Default)]
pub struct ClosureToStack {
    cache: RefCell<CloCache>,
}

#[derive(Default)]
struct CloCache {
    decompiler: Decompiler,
    bounds: BoundChecker,
    tasks: SuffixMemo<Clo, Stack<Pro>>,
    values: SuffixMemo<Clo, Stack<Pro>>,
}

impl ClosureToStack {
    pub fn new() -> Self {
        ClosureToStack::default()
    }
}

impl Refinement for ClosureToStack {
    type Low = CloState;
    type High = StackState;

    fn decompile(&self, low: &CloState) -> Option<StackState> {
        let mut cache = self.cache.borrow_mut();
        let CloCache {
            decompiler,
            bounds,
            tasks,
            values,
        } = &mut *cache;
        let tasks = tasks.fold(&low.tasks, Stack::new(), |e, below| {
            bounds.clo_bound(e, 0).then(|| below.push(decompiler.delta(e, 0)))
        })?;
        let values = values.fold(&low.values, Stack::new(), |e, below| {
            bounds.clo_bound(e, 1).then(|| below.push(decompiler.delta1(e)))
        })?;
        Some(StackState { tasks, values })
    }

    fn source_step(&self, high: &StackState) -> Option<SourceStep<StackState>> {
        sm_step(high).map(|(label, next)| SourceStep::Labeled(label, next))
    }
}

impl fmt::Display for Clo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})/", self.prog)?;
        write_stack(f, "", self.env.iter())
    }
}

impl fmt::Display for CloState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stack(f, "T", &self.tasks)?;
        f.write_str(" | ")?;
        write_stack(f, "V", &self.values)
    }
}
