//! Term and program generators for testing and fuzzing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::programs::Pro;
use crate::terms::Term;

/// Whether a term of exactly `size` constructors exists with `bound` binders
/// in scope and no free variables beyond them.
fn feasible(bound: usize, size: usize) -> bool {
    if bound == 0 {
        size >= 2
    } else {
        size >= 1
    }
}

/// A random term of exactly `size` constructors whose free variables are all
/// below `free` (so `free = 0` gives closed terms).
///
/// Panics if no such term exists, i.e. `size == 0`, or `free == 0` and `size < 2`.
pub fn random_term<R: Rng + ?Sized>(rng: &mut R, size: usize, free: usize) -> Term {
    assert!(
        feasible(free, size),
        "no term of size {size} with {free} free variables"
    );
    go(rng, size, free)
}

fn go<R: Rng + ?Sized>(rng: &mut R, size: usize, bound: usize) -> Term {
    if size == 1 {
        return Term::var(rng.gen_range(0..bound));
    }
    let splits: Vec<usize> = (1..size - 1)
        .filter(|&k| feasible(bound, k) && feasible(bound, size - 1 - k))
        .collect();
    let lam_ok = feasible(bound + 1, size - 1);
    if splits.is_empty() || (lam_ok && rng.gen_bool(0.4)) {
        Term::lam(go(rng, size - 1, bound + 1))
    } else {
        let k = *splits.choose(rng).unwrap();
        Term::app(go(rng, k, bound), go(rng, size - 1 - k, bound))
    }
}

/// A random closed term with size drawn uniformly from `2..=max_size`.
pub fn random_closed_term<R: Rng + ?Sized>(rng: &mut R, max_size: usize) -> Term {
    let size = rng.gen_range(2..=max_size.max(2));
    random_term(rng, size, 0)
}

/// A random program of `commands` top-level and nested commands (at least 1),
/// with variable indices below `max_var`. The result need not represent a term.
pub fn random_program<R: Rng + ?Sized>(rng: &mut R, commands: usize, max_var: usize) -> Pro {
    if commands <= 1 {
        return Pro::Ret;
    }
    let n = commands - 1;
    match rng.gen_range(0..3) {
        0 if max_var > 0 => Pro::var(rng.gen_range(0..max_var), random_program(rng, n, max_var)),
        1 if n >= 2 => {
            let body = rng.gen_range(1..n);
            Pro::lam(
                random_program(rng, body, max_var + 1),
                random_program(rng, n - body, max_var),
            )
        }
        _ => Pro::app(random_program(rng, n, max_var)),
    }
}

/// All terms with at most `max_size` constructors whose free variables are
/// below `free`, in order of increasing size.
pub fn enumerate_terms(max_size: usize, free: usize) -> Vec<Term> {
    // table[bound][size] = all terms of exactly that size
    let max_bound = free + max_size;
    let mut table: Vec<Vec<Vec<Term>>> = vec![vec![Vec::new(); max_size + 1]; max_bound + 1];
    for size in 1..=max_size {
        for bound in 0..=max_bound {
            let mut out = Vec::new();
            if size == 1 {
                out.extend((0..bound).map(Term::var));
            } else {
                if bound < max_bound {
                    out.extend(table[bound + 1][size - 1].iter().cloned().map(Term::lam));
                }
                for k in 1..size - 1 {
                    for s in &table[bound][k] {
                        for t in &table[bound][size - 1 - k] {
                            out.push(Term::app(s.clone(), t.clone()));
                        }
                    }
                }
            }
            table[bound][size] = out;
        }
    }
    table.swap_remove(free).into_iter().flatten().collect()
}
