//! Heaps of linked environment cells.
//!
//! A heap environment is either empty or a heap closure followed by the
//! address of the rest of the environment. Heap values are persistent: `put`
//! returns a new heap and leaves the old one valid.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rpds::VectorSync;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::closure_machine::{Clo, Env};
use crate::code_store::{read_program, CodeStore, ProgramAddress};
use crate::programs::Pro;

pub type HeapAddress = usize;

/// A program address paired with an environment address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeapClosure {
    pub code: ProgramAddress,
    pub env: HeapAddress,
}

impl HeapClosure {
    pub fn new(code: ProgramAddress, env: HeapAddress) -> Self {
        HeapClosure { code, env }
    }
}

/// `None` is the empty environment; otherwise head closure and tail address.
pub type HeapEntry = Option<(HeapClosure, HeapAddress)>;

/// Abstract heap structure.
///
/// Implementations must satisfy: if `put(g, a) = (h2, b)` then
/// `h2.get(b) = Some(Some((g, a)))` and `extends(self, h2)`.
pub trait HeapStore: Clone {
    fn get(&self, a: HeapAddress) -> Option<HeapEntry>;

    fn put(&self, g: HeapClosure, tail: HeapAddress) -> (Self, HeapAddress);

    /// All addresses at which `get` is defined.
    fn addresses(&self) -> Vec<HeapAddress>;

    /// Bound on environment nesting depth sufficient for [`decompile_env`]
    /// on any address of this heap.
    fn depth_bound(&self) -> usize;

    /// Same as [`extends`]`(self, newer)`; implementations may answer faster
    /// when they know how `newer` was built.
    fn extended_by(&self, newer: &Self) -> bool {
        extends(self, newer)
    }
}

/// Every address defined in `h` reads identically in `h2`.
pub fn extends<H: HeapStore>(h: &H, h2: &H) -> bool {
    h.addresses().into_iter().all(|a| h2.get(a) == h.get(a))
}

/// `H[a, n]`: the `n`th closure of the environment at `a`.
pub fn lookup<H: HeapStore>(heap: &H, mut a: HeapAddress, mut n: usize) -> Option<HeapClosure> {
    loop {
        let (g, tail) = heap.get(a)??;
        if n == 0 {
            return Some(g);
        }
        n -= 1;
        a = tail;
    }
}

/// Reconstructs the environment at `a`, with nesting depth at most `fuel`.
pub fn decompile_env<H: HeapStore, C: CodeStore + ?Sized>(
    heap: &H,
    code: &C,
    a: HeapAddress,
    fuel: usize,
) -> Option<Env> {
    EnvMemo::default().env(heap, code, a, fuel)
}

/// Decompiles environments with sharing: each address is read once.
///
/// Entries stay valid for any heap that extends the heaps they were read
/// from, and program entries for a fixed code.
#[derive(Default)]
pub(crate) struct EnvMemo {
    // address -> (environment, nesting depth it needs)
    envs: FxHashMap<HeapAddress, (Env, usize)>,
    programs: FxHashMap<ProgramAddress, Option<Arc<Pro>>>,
}

impl EnvMemo {
    pub(crate) fn forget_heap(&mut self) {
        self.envs.clear();
    }

    pub(crate) fn env<H: HeapStore, C: CodeStore + ?Sized>(
        &mut self,
        heap: &H,
        code: &C,
        a: HeapAddress,
        fuel: usize,
    ) -> Option<Env> {
        let (env, depth) = self.env_with_depth(heap, code, a, fuel)?;
        (depth <= fuel).then_some(env)
    }

    pub(crate) fn closure<H: HeapStore, C: CodeStore + ?Sized>(
        &mut self,
        heap: &H,
        code: &C,
        g: HeapClosure,
        fuel: usize,
    ) -> Option<Clo> {
        let prog = self.program(code, g.code)?;
        Some(Clo::new(prog, self.env(heap, code, g.env, fuel)?))
    }

    pub(crate) fn program<C: CodeStore + ?Sized>(&mut self, code: &C, p: ProgramAddress) -> Option<Arc<Pro>> {
        self.programs
            .entry(p)
            .or_insert_with(|| read_program(code, p, code.depth_bound()).map(Arc::new))
            .clone()
    }

    fn env_with_depth<H: HeapStore, C: CodeStore + ?Sized>(
        &mut self,
        heap: &H,
        code: &C,
        a: HeapAddress,
        fuel: usize,
    ) -> Option<(Env, usize)> {
        if let Some(hit) = self.envs.get(&a) {
            return Some(hit.clone());
        }
        let result = match heap.get(a)? {
            None => (Env::from(Vec::new()), 0),
            Some((g, tail)) => {
                let fuel = fuel.checked_sub(1)?;
                let prog = self.program(code, g.code)?;
                let (inner, d1) = self.env_with_depth(heap, code, g.env, fuel)?;
                let (rest, d2) = self.env_with_depth(heap, code, tail, fuel)?;
                if d1 > fuel || d2 > fuel {
                    return None;
                }
                let head = Clo::new(prog, inner);
                let env: Env = std::iter::once(head).chain(rest.iter().cloned()).collect();
                (env, 1 + d1.max(d2))
            }
        };
        self.envs.insert(a, result.clone());
        Some(result)
    }
}

/// Heaps realized as cell lists: address 0 is the empty environment and
/// address `n + 1` is the `n`th cell.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<(HeapClosure, HeapAddress)>", into = "Vec<(HeapClosure, HeapAddress)>")]
pub struct ListHeap {
    cells: VectorSync<(HeapClosure, HeapAddress)>,
    lineage: Arc<Lineage>,
}

/// Records which heap each heap was obtained from by `put`.
#[derive(Default)]
struct Lineage {
    parent: Option<Arc<Lineage>>,
    len: usize,
}

impl Drop for Lineage {
    fn drop(&mut self) {
        let mut cur = self.parent.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut node) => cur = node.parent.take(),
                Err(_) => break,
            }
        }
    }
}

impl PartialEq for ListHeap {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells
    }
}

impl Eq for ListHeap {}

impl fmt::Debug for ListHeap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.cells.iter()).finish()
    }
}

impl ListHeap {
    pub fn new() -> Self {
        ListHeap::default()
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = &(HeapClosure, HeapAddress)> {
        self.cells.iter()
    }

    /// Every closure environment and tail points strictly below its own cell.
    pub fn is_acyclic(&self) -> bool {
        self.cells
            .iter()
            .enumerate()
            .all(|(i, (g, tail))| g.env <= i && *tail <= i)
    }
}

impl From<Vec<(HeapClosure, HeapAddress)>> for ListHeap {
    fn from(cells: Vec<(HeapClosure, HeapAddress)>) -> Self {
        let lineage = Arc::new(Lineage {
            parent: None,
            len: cells.len(),
        });
        ListHeap {
            cells: cells.into_iter().collect(),
            lineage,
        }
    }
}

impl From<ListHeap> for Vec<(HeapClosure, HeapAddress)> {
    fn from(heap: ListHeap) -> Self {
        heap.cells.iter().copied().collect()
    }
}

impl HeapStore for ListHeap {
    fn get(&self, a: HeapAddress) -> Option<HeapEntry> {
        match a.checked_sub(1) {
            None => Some(None),
            Some(n) => self.cells.get(n).map(|&cell| Some(cell)),
        }
    }

    fn put(&self, g: HeapClosure, tail: HeapAddress) -> (Self, HeapAddress) {
        let address = self.cells.len() + 1;
        let lineage = Arc::new(Lineage {
            parent: Some(self.lineage.clone()),
            len: address,
        });
        (
            ListHeap {
                cells: self.cells.push_back((g, tail)),
                lineage,
            },
            address,
        )
    }

    fn addresses(&self) -> Vec<HeapAddress> {
        (0..=self.cells.len()).collect()
    }

    // Acyclic heaps need at most one level per cell.
    fn depth_bound(&self) -> usize {
        self.cells.len()
    }

    fn extended_by(&self, newer: &Self) -> bool {
        let mut cur = &newer.lineage;
        while cur.len > self.lineage.len {
            match &cur.parent {
                Some(parent) => cur = parent,
                None => break,
            }
        }
        Arc::ptr_eq(cur, &self.lineage) || extends(self, newer)
    }
}

/// One cell per line, `(<code>, <env>) -> <tail>`; line `i` is address `i`.
impl fmt::Display for ListHeap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, tail) in self.cells.iter() {
            writeln!(f, "({}, {}) -> {}", g.code, g.env, tail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeapParseError {
    pub line: usize,
    pub text: String,
}

impl fmt::Display for HeapParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: cannot parse heap cell `{}`", self.line, self.text)
    }
}

impl std::error::Error for HeapParseError {}

fn parse_cell(line: &str) -> Option<(HeapClosure, HeapAddress)> {
    let (closure, tail) = line.split_once("->")?;
    let inner = closure.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (code, env) = inner.split_once(',')?;
    Some((
        HeapClosure::new(code.trim().parse().ok()?, env.trim().parse().ok()?),
        tail.trim().parse().ok()?,
    ))
}

impl FromStr for ListHeap {
    type Err = HeapParseError;

    fn from_str(s: &str) -> Result<Self, HeapParseError> {
        s.lines()
            .enumerate()
            .map(|(i, line)| {
                parse_cell(line).ok_or_else(|| HeapParseError {
                    line: i + 1,
                    text: line.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ListHeap::from)
    }
}

/// Number of references to each cell from closures and tails in the heap
/// and from the given roots.
pub fn reference_counts<'a>(
    heap: &ListHeap,
    roots: impl IntoIterator<Item = &'a HeapClosure>,
) -> HashMap<HeapAddress, usize> {
    let mut counts = HashMap::new();
    let mut bump = |a: HeapAddress| {
        if a != 0 {
            *counts.entry(a).or_insert(0) += 1;
        }
    };
    for (g, tail) in heap.cells() {
        bump(g.env);
        bump(*tail);
    }
    for g in roots {
        bump(g.env);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_store::ListCode;

    fn g(code: usize, env: usize) -> HeapClosure {
        HeapClosure::new(code, env)
    }

    #[test]
    fn put_then_lookup() {
        let (h1, a) = ListHeap::new().put(g(7, 0), 0);
        assert_eq!(a, 1);
        assert_eq!(lookup(&h1, 1, 0), Some(g(7, 0)));
        assert_eq!(h1.get(1), Some(Some((g(7, 0), 0))));
    }

    #[test]
    fn address_zero_is_empty_everywhere() {
        let (h, _) = ListHeap::new().put(g(1, 0), 0);
        for n in 0..4 {
            assert_eq!(lookup(&h, 0, n), None);
            assert_eq!(lookup(&ListHeap::new(), 0, n), None);
        }
        assert_eq!(h.get(0), Some(None));
        assert_eq!(h.get(2), None);
    }

    #[test]
    fn lookup_follows_tails() {
        let (h, a0) = ListHeap::new().put(g(3, 0), 0);
        let (h, a1) = h.put(g(4, 0), a0);
        assert_eq!(lookup(&h, a1, 0), Some(g(4, 0)));
        assert_eq!(lookup(&h, a1, 1), Some(g(3, 0)));
        assert_eq!(lookup(&h, a1, 2), None);
    }

    #[test]
    fn decompile_env_examples() {
        let code = ListCode::compile(&Pro::var(0, Pro::Ret));
        let h = ListHeap::new();
        assert_eq!(decompile_env(&h, &code, 0, 1).map(|e| e.len()), Some(0));
        assert_eq!(decompile_env(&h, &code, 0, 0).map(|e| e.len()), Some(0));
        let (h, a) = h.put(g(0, 0), 0);
        let env = decompile_env(&h, &code, a, 5).unwrap();
        assert_eq!(&*env, &[Clo::bare(Pro::var(0, Pro::Ret))]);
        assert_eq!(decompile_env(&h, &code, a, 0), None);
        assert_eq!(decompile_env(&h, &code, 9, 5), None);
    }

    #[test]
    fn extension() {
        let (h, _) = ListHeap::new().put(g(0, 0), 0);
        assert!(extends(&h, &h));
        let (h2, _) = h.put(g(1, 1), 1);
        assert!(extends(&h, &h2));
        assert!(!extends(&h2, &h));
        assert!(h.extended_by(&h2) && !h2.extended_by(&h));
        // same cells built independently
        let copy = ListHeap::from(Vec::from(h2.clone()));
        assert!(h.extended_by(&copy));
        let other = ListHeap::from(vec![(g(5, 0), 0)]);
        assert!(!h.extended_by(&other));
        assert!(ListHeap::new().extended_by(&other));
    }

    #[test]
    fn dump_format_round_trip() {
        let (h, a) = ListHeap::new().put(g(2, 0), 0);
        let (h, _) = h.put(g(5, a), a);
        let text = h.to_string();
        assert_eq!(text, "(2, 0) -> 0\n(5, 1) -> 1\n");
        assert_eq!(text.parse::<ListHeap>(), Ok(h));
        assert!("(1, 2) 3".parse::<ListHeap>().is_err());
    }

    #[test]
    fn acyclicity() {
        let (h, a) = ListHeap::new().put(g(0, 0), 0);
        let (h, _) = h.put(g(0, a), a);
        assert!(h.is_acyclic());
        assert!(!ListHeap::from(vec![(g(0, 1), 0)]).is_acyclic());
    }
}
