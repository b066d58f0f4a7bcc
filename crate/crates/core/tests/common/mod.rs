#![allow(dead_code)]

use lam_core::gen::{random_program, random_term};
use lam_core::{Pro, Term};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Possibly open terms with indices below `max_index`.
pub fn term(max_index: usize) -> impl Strategy<Value = Term> {
    let leaf = (0..max_index).prop_map(Term::var);
    leaf.prop_recursive(8, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Term::lam),
            (inner.clone(), inner).prop_map(|(s, t)| Term::app(s, t)),
        ]
    })
}

/// Closed terms of size `2..=max_size`, drawn by the corpus generator.
pub fn closed_term(max_size: usize) -> impl Strategy<Value = Term> {
    (2..=max_size, any::<u64>()).prop_map(|(size, seed)| random_term(&mut StdRng::seed_from_u64(seed), size, 0))
}

/// Terms of exactly `size` constructors with free variables below `free`.
pub fn sized_term(size: usize, free: usize) -> impl Strategy<Value = Term> {
    any::<u64>().prop_map(move |seed| random_term(&mut StdRng::seed_from_u64(seed), size, free))
}

/// Arbitrary programs; most represent no term.
pub fn program(max_commands: usize, max_var: usize) -> impl Strategy<Value = Pro> {
    (1..=max_commands, any::<u64>())
        .prop_map(move |(n, seed)| random_program(&mut StdRng::seed_from_u64(seed), n, max_var))
}

pub fn term_stack(max_index: usize, max_len: usize) -> impl Strategy<Value = Vec<Term>> {
    prop::collection::vec(term(max_index), 0..=max_len)
}

pub fn v(n: usize) -> Term {
    Term::var(n)
}

pub fn l(s: Term) -> Term {
    Term::lam(s)
}

pub fn a(s: Term, t: Term) -> Term {
    Term::app(s, t)
}
