//! Persistent stacks with shared tails.
//!
//! Machine steps only touch the top of their stacks, so successive states
//! share almost all of their nodes. [`SuffixMemo`] exploits this to keep
//! per-state computations such as decompilation proportional to what changed.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::Index;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub struct Stack<T> {
    node: Option<Arc<Node<T>>>,
}

struct Node<T> {
    head: T,
    tail: Stack<T>,
    len: usize,
}

impl<T> Stack<T> {
    pub fn new() -> Self {
        Stack { node: None }
    }

    pub fn len(&self) -> usize {
        self.node.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.node.is_none()
    }

    pub fn push(&self, x: T) -> Self {
        Stack::cons(x, self.clone())
    }

    pub fn cons(head: T, tail: Stack<T>) -> Self {
        let len = tail.len() + 1;
        Stack {
            node: Some(Arc::new(Node { head, tail, len })),
        }
    }

    pub fn top(&self) -> Option<&T> {
        self.node.as_ref().map(|n| &n.head)
    }

    pub fn pop(&self) -> Option<(&T, &Stack<T>)> {
        self.node.as_ref().map(|n| (&n.head, &n.tail))
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.iter().nth(i)
    }

    pub fn iter(&self) -> Iter<'_, T> {
        Iter { cur: self }
    }

    /// Same node (or both empty).
    pub fn ptr_eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (None, None) => true,
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    fn id(&self) -> usize {
        self.node.as_ref().map_or(0, |n| Arc::as_ptr(n) as usize)
    }

    /// Splits both stacks into their distinct tops and their longest shared
    /// tail, found by node identity.
    pub fn split_common<'a>(&'a self, other: &'a Self) -> (Vec<&'a T>, Vec<&'a T>, &'a Stack<T>) {
        let (mut a, mut b) = (self, other);
        let (mut top_a, mut top_b) = (Vec::new(), Vec::new());
        while a.len() > b.len() {
            let (x, rest) = a.pop().unwrap();
            top_a.push(x);
            a = rest;
        }
        while b.len() > a.len() {
            let (x, rest) = b.pop().unwrap();
            top_b.push(x);
            b = rest;
        }
        while !a.ptr_eq(b) {
            let (x, ra) = a.pop().unwrap();
            let (y, rb) = b.pop().unwrap();
            top_a.push(x);
            top_b.push(y);
            a = ra;
            b = rb;
        }
        (top_a, top_b, a)
    }
}

impl<T: Clone> Stack<T> {
    /// Elements from the top down.
    pub fn to_vec(&self) -> Vec<T> {
        self.iter().cloned().collect()
    }
}

impl<T> Clone for Stack<T> {
    fn clone(&self) -> Self {
        Stack {
            node: self.node.clone(),
        }
    }
}

impl<T> Default for Stack<T> {
    fn default() -> Self {
        Stack::new()
    }
}

impl<T> Drop for Stack<T> {
    // Iterative, so that long stacks do not overflow the call stack.
    fn drop(&mut self) {
        let mut cur = self.node.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut node) => cur = node.tail.node.take(),
                Err(_) => break,
            }
        }
    }
}

/// The first element becomes the top.
impl<T> FromIterator<T> for Stack<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let items: Vec<T> = iter.into_iter().collect();
        items.into_iter().rev().fold(Stack::new(), |acc, x| Stack::cons(x, acc))
    }
}

/// Index 0 becomes the top.
impl<T> From<Vec<T>> for Stack<T> {
    fn from(items: Vec<T>) -> Self {
        items.into_iter().collect()
    }
}

pub struct Iter<'a, T> {
    cur: &'a Stack<T>,
}

impl<'a, T> Iterator for Iter<'a, T> {
    type Item = &'a T;

    fn next(&mut self) -> Option<&'a T> {
        let (x, rest) = self.cur.pop()?;
        self.cur = rest;
        Some(x)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.cur.len(), Some(self.cur.len()))
    }
}

impl<T> ExactSizeIterator for Iter<'_, T> {}

impl<'a, T> IntoIterator for &'a Stack<T> {
    type Item = &'a T;
    type IntoIter = Iter<'a, T>;

    fn into_iter(self) -> Iter<'a, T> {
        self.iter()
    }
}

impl<T> Index<usize> for Stack<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        self.get(i).expect("stack index out of range")
    }
}

impl<T: PartialEq> PartialEq for Stack<T> {
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (self, other);
        loop {
            if a.ptr_eq(b) {
                return true;
            }
            match (a.pop(), b.pop()) {
                (Some((x, ra)), Some((y, rb))) if a.len() == b.len() && x == y => {
                    a = ra;
                    b = rb;
                }
                _ => return false,
            }
        }
    }
}

impl<T: Eq> Eq for Stack<T> {}

impl<T: Hash> Hash for Stack<T> {
    fn hash<S: Hasher>(&self, state: &mut S) {
        self.len().hash(state);
        for x in self {
            x.hash(state);
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Stack<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl<T: Serialize> Serialize for Stack<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Stack<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Vec::<T>::deserialize(deserializer).map(Stack::from)
    }
}

/// Memoizes a fold over stacks from the bottom up, keyed by node identity.
///
/// `fold(x, acc)` combines an element with the result for the stack below
/// it; callers must pass the same `base` and `fold` every time. Nodes are
/// retained by the memo, so identities are never reused.
pub struct SuffixMemo<T, R> {
    memo: FxHashMap<usize, (Stack<T>, R)>,
}

impl<T, R: Clone> SuffixMemo<T, R> {
    pub fn new() -> Self {
        SuffixMemo {
            memo: FxHashMap::default(),
        }
    }

    pub fn clear(&mut self) {
        self.memo.clear();
    }

    /// The fold of `stack` starting from `base`, or `None` if `fold` fails on
    /// any element.
    pub fn fold<F>(&mut self, stack: &Stack<T>, base: R, mut fold: F) -> Option<R>
    where
        F: FnMut(&T, &R) -> Option<R>,
    {
        let mut pending = Vec::new();
        let mut cur = stack;
        let mut acc = loop {
            if cur.is_empty() {
                break base;
            }
            if let Some((_, r)) = self.memo.get(&cur.id()) {
                break r.clone();
            }
            pending.push(cur);
            cur = cur.pop().unwrap().1;
        };
        for node in pending.into_iter().rev() {
            acc = fold(node.top().unwrap(), &acc)?;
            self.memo.insert(node.id(), (node.clone(), acc.clone()));
        }
        Some(acc)
    }
}

impl<T, R: Clone> Default for SuffixMemo<T, R> {
    fn default() -> Self {
        SuffixMemo::new()
    }
}
