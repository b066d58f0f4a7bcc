//! The heap machine: closures are pairs of a program address and a heap
//! address, and environments live as linked cells in a heap.
//!
//! ```text
//! ((p,a)::T, V, H)          ⟶τ  (T, V, H)                       C[p] = ret
//! ((p,a)::T, V, H)          ⟶τ  ((p+1,a)::T, g::V, H)           C[p] = var n, H[a,n] = g
//! ((p,a)::T, V, H)          ⟶τ  ((p+1,a)::T, (q,a)::V, H)       C[p] = lamb q
//! ((p,a)::T, g::(q,b)::V, H) ⟶β ((q,c)::(p+1,a)::T, V, H')      C[p] = app, put H g b = (H', c)
//! ```

use std::cell::RefCell;
use std::fmt;
use std::marker::PhantomData;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::closure_machine::{cm_step, Clo, CloState};
use crate::code_store::{CodeStore, Com, ListCode, ProgramAddress};
use crate::framework::{Label, Machine, Refinement, SourceStep};
use crate::heap_store::{lookup, EnvMemo, HeapClosure, HeapStore, ListHeap};
use crate::programs::compile_top;
use crate::stack::{Stack, SuffixMemo};
use crate::stack_machine::write_stack;
use crate::terms::Term;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeapState<H> {
    pub tasks: Stack<HeapClosure>,
    pub values: Stack<HeapClosure>,
    pub heap: H,
}

impl<H> HeapState<H> {
    pub fn new(tasks: impl Into<Stack<HeapClosure>>, values: impl Into<Stack<HeapClosure>>, heap: H) -> Self {
        HeapState {
            tasks: tasks.into(),
            values: values.into(),
            heap,
        }
    }
}

pub fn hm_step<C, H>(code: &C, st: &HeapState<H>) -> Option<(Label, HeapState<H>)>
where
    C: CodeStore + ?Sized,
    H: HeapStore,
{
    let (&HeapClosure { code: p, env: a }, rest) = st.tasks.pop()?;
    let cont = HeapClosure::new(code.next(p), a);
    match code.fetch(p)? {
        Com::Ret => Some((
            Label::Tau,
            HeapState::new(rest.clone(), st.values.clone(), st.heap.clone()),
        )),
        Com::Var(n) => {
            let g = lookup(&st.heap, a, n)?;
            Some((
                Label::Tau,
                HeapState::new(rest.push(cont), st.values.push(g), st.heap.clone()),
            ))
        }
        Com::Lam(q) => {
            let values = st.values.push(HeapClosure::new(q, a));
            Some((Label::Tau, HeapState::new(rest.push(cont), values, st.heap.clone())))
        }
        Com::App => {
            let (g, below) = st.values.pop()?;
            let (fun, values) = below.pop()?;
            let (heap, c) = st.heap.put(*g, fun.env);
            let tasks = rest.push(cont).push(HeapClosure::new(fun.code, c));
            Some((Label::Beta, HeapState::new(tasks, values.clone(), heap)))
        }
    }
}

/// Decompiles both stacks closure by closure; environment nesting is bounded
/// by `fuel`.
pub fn hm_decompile<C, H>(code: &C, st: &HeapState<H>, fuel: usize) -> Option<CloState>
where
    C: CodeStore + ?Sized,
    H: HeapStore,
{
    let mut d = EnvMemo::default();
    let tasks = st
        .tasks
        .iter()
        .map(|g| d.closure(&st.heap, code, *g, fuel))
        .collect::<Option<Stack<Clo>>>()?;
    let values = st
        .values
        .iter()
        .map(|g| d.closure(&st.heap, code, *g, fuel))
        .collect::<Option<Stack<Clo>>>()?;
    Some(CloState::new(tasks, values))
}

/// Fuel sufficient for every reachable state of the list realizations.
pub fn default_fuel<C: CodeStore + ?Sized, H: HeapStore>(code: &C, st: &HeapState<H>) -> usize {
    st.heap.depth_bound() + code.depth_bound()
}

/// Command count of the program at `p`, counting nested bodies.
fn program_size<C: CodeStore + ?Sized>(
    code: &C,
    p: ProgramAddress,
    depth: usize,
    memo: &mut FxHashMap<ProgramAddress, usize>,
) -> Option<usize> {
    if let Some(&n) = memo.get(&p) {
        return Some(n);
    }
    let depth = depth.checked_sub(1)?;
    let n = 1 + match code.fetch(p)? {
        Com::Ret => 0,
        Com::Var(_) | Com::App => program_size(code, code.next(p), depth, memo)?,
        Com::Lam(q) => program_size(code, q, depth, memo)? + program_size(code, code.next(p), depth, memo)?,
    };
    memo.insert(p, n);
    Some(n)
}

/// Command count of the programs on the control stack, read from the code.
pub fn hm_tau_measure<C: CodeStore + ?Sized, H>(code: &C, st: &HeapState<H>) -> usize {
    let mut memo = FxHashMap::default();
    st.tasks
        .iter()
        .map(|g| {
            program_size(code, g.code, code.depth_bound(), &mut memo).expect("unreadable program on the control stack")
        })
        .sum()
}

/// The heap machine over a fixed code.
pub struct HeapMachine<'c, C: ?Sized, H> {
    pub code: &'c C,
    sizes: RefCell<FxHashMap<ProgramAddress, usize>>,
    measures: RefCell<SuffixMemo<HeapClosure, usize>>,
    _heap: PhantomData<fn() -> H>,
}

impl<'c, C: CodeStore + ?Sized, H> HeapMachine<'c, C, H> {
    pub fn new(code: &'c C) -> Self {
        HeapMachine {
            code,
            sizes: RefCell::new(FxHashMap::default()),
            measures: RefCell::new(SuffixMemo::new()),
            _heap: PhantomData,
        }
    }
}

impl<C: CodeStore + ?Sized, H: HeapStore> Machine for HeapMachine<'_, C, H> {
    type State = HeapState<H>;

    fn step(&self, state: &HeapState<H>) -> Option<(Label, HeapState<H>)> {
        hm_step(self.code, state)
    }

    fn tau_measure(&self, state: &HeapState<H>) -> usize {
        let mut sizes = self.sizes.borrow_mut();
        let mut measures = self.measures.borrow_mut();
        measures
            .fold(&state.tasks, 0, |g, below| {
                Some(below + program_size(self.code, g.code, self.code.depth_bound(), &mut sizes)?)
            })
            .expect("unreadable program on the control stack")
    }
}

/// Heap-machine states refine closure-machine states.
///
/// Decompilations are remembered while successive heaps extend each other.
pub struct HeapToClosure<'c, C: ?Sized, H> {
    pub code: &'c C,
    /// Fixed decompilation fuel; `None` uses [`default_fuel`] per state.
    pub fuel: Option<usize>,
    cache: RefCell<HeapCache<H>>,
}

struct HeapCache<H> {
    heap: Option<H>,
    fuel: usize,
    envs: EnvMemo,
    tasks: SuffixMemo<HeapClosure, Stack<Clo>>,
    values: SuffixMemo<HeapClosure, Stack<Clo>>,
}

impl<'c, C: CodeStore + ?Sized, H: HeapStore> HeapToClosure<'c, C, H> {
    pub fn new(code: &'c C) -> Self {
        HeapToClosure::build(code, None)
    }

    pub fn with_fuel(code: &'c C, fuel: usize) -> Self {
        HeapToClosure::build(code, Some(fuel))
    }

    fn build(code: &'c C, fuel: Option<usize>) -> Self {
        let cache = HeapCache {
            heap: None,
            fuel: 0,
            envs: EnvMemo::default(),
            tasks: SuffixMemo::new(),
            values: SuffixMemo::new(),
        };
        HeapToClosure {
            code,
            fuel,
            cache: RefCell::new(cache),
        }
    }
}

impl<C: CodeStore + ?Sized, H: HeapStore> Refinement for HeapToClosure<'_, C, H> {
    type Low = HeapState<H>;
    type High = CloState;

    fn decompile(&self, low: &HeapState<H>) -> Option<CloState> {
        let fuel = self.fuel.unwrap_or_else(|| default_fuel(self.code, low));
        let mut cache = self.cache.borrow_mut();
        let still_valid = match &cache.heap {
            Some(old) => fuel >= cache.fuel && old.extended_by(&low.heap),
            None => true,
        };
        if !still_valid {
            cache.envs.forget_heap();
            cache.tasks.clear();
            cache.values.clear();
        }
        cache.heap = Some(low.heap.clone());
        cache.fuel = fuel;
        let HeapCache {
            envs, tasks, values, ..
        } = &mut *cache;
        let (heap, code) = (&low.heap, self.code);
        let tasks = tasks.fold(&low.tasks, Stack::new(), |g, below| {
            Some(below.push(envs.closure(heap, code, *g, fuel)?))
        })?;
        let values = values.fold(&low.values, Stack::new(), |g, below| {
            Some(below.push(envs.closure(heap, code, *g, fuel)?))
        })?;
        Some(CloState { tasks, values })
    }

    fn source_step(&self, high: &CloState) -> Option<SourceStep<CloState>> {
        cm_step(high).map(|(label, next)| SourceStep::Labeled(label, next))
    }
}

/// The term handed to [`load`] mentions a free variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosednessError {
    /// Smallest free de Bruijn index.
    pub index: usize,
}

impl fmt::Display for ClosednessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "term is not closed: free variable {}", self.index)
    }
}

impl std::error::Error for ClosednessError {}

/// Compiles a closed term to its code and the initial heap-machine state.
pub fn load(s: &Term) -> Result<(ListCode, HeapState<ListHeap>), ClosednessError> {
    if let Some(index) = s.min_free_index() {
        return Err(ClosednessError { index });
    }
    let code = ListCode::compile(&compile_top(s));
    Ok((
        code,
        HeapState::new(vec![HeapClosure::new(0, 0)], Stack::new(), ListHeap::new()),
    ))
}

impl fmt::Display for HeapClosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.code, self.env)
    }
}

impl fmt::Display for HeapState<ListHeap> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stack(f, "T", &self.tasks)?;
        f.write_str(" | ")?;
        write_stack(f, "V", &self.values)?;
        write!(f, " | H = {} cells", self.heap.len())
    }
}
