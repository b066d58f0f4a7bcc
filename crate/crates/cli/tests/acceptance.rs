//! Acceptance criteria, one PASS/FAIL line each.

use std::time::{Duration, Instant};

use lam_cli::driver::{self, fuzz_corpus, Level, RunOptions};
use lam_cli::syntax::parse_term;
use lam_core::closure_machine::state_closed;
use lam_core::code_store::{psi, read_program, represents_pro};
use lam_core::fixtures::{DropLambda, Split, SplitBeta, SplitView};
use lam_core::framework::evaluate;
use lam_core::gen::{enumerate_terms, random_program, random_term};
use lam_core::heap_store::{decompile_env, extends, lookup};
use lam_core::programs::{compile, compile_top, decompile, represents};
use lam_core::stack_machine::{sm_classify, sm_step, StackClass};
use lam_core::terms::{eval, TermClass};
use lam_core::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const SEED: u64 = 42;
const CORPUS: usize = 1000;
const MAX_SIZE: usize = 25;
const FUEL: usize = 10_000;
const CASES: usize = 10_000;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn v(n: usize) -> Term {
    Term::var(n)
}
fn l(s: Term) -> Term {
    Term::lam(s)
}
fn a(s: Term, t: Term) -> Term {
    Term::app(s, t)
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn capture_example() -> Outcome {
    let start = Instant::now();
    let s = parse_term("(\\ \\ 1) (\\ 1) (\\ 0)").map_err(|e| e.to_string())?;
    let mid = s.step();
    let result = driver::run(
        &s,
        Level::L,
        &RunOptions {
            fuel: 100_000,
            ..Default::default()
        },
        &mut std::io::sink(),
    );
    let elapsed = start.elapsed();
    let outcome = result.map_err(|e| format!("exit {}: {e}", e.exit_code()))?;
    ensure(mid == Some(a(l(l(v(1))), l(v(0)))), || {
        format!("intermediate term {mid:?}")
    })?;
    ensure(outcome.normal_form == Some(l(l(v(0)))), || {
        format!("normal form {:?}", outcome.normal_form)
    })?;
    ensure(outcome.beta_count == 2 && outcome.tau_count == 0, || {
        format!("{} steps", outcome.beta_count)
    })?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("λλ0 in 2 steps via (λλ1) (λ0), exit 0, {elapsed:.2?}"))
}

fn cons(s: &Term, rest: &[Term]) -> Vec<Term> {
    std::iter::once(s.clone()).chain(rest.iter().cloned()).collect()
}

fn inversion() -> Outcome {
    let start = Instant::now();
    let conts = [
        (Pro::Ret, vec![]),
        (Pro::app(Pro::Ret), vec![l(v(0))]),
        (Pro::var(1, Pro::app(Pro::Ret)), vec![]),
        (Pro::lam(Pro::var(0, Pro::Ret), Pro::Ret), vec![v(0), l(v(1))]),
        (Pro::app(Pro::app(Pro::Ret)), vec![v(2)]),
    ];
    let small = enumerate_terms(6, 7);
    for s in &small {
        for (p, stack) in &conts {
            let lhs = decompile(&compile(s, p.clone()), stack.clone());
            ensure(lhs == decompile(p, cons(s, stack)), || format!("{s} with {p}"))?;
        }
    }
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut defined = 0;
    for _ in 0..CASES {
        let size = rng.gen_range(1..=15);
        let s = random_term(&mut rng, size, 3);
        let p = if rng.gen_bool(0.5) {
            let commands = rng.gen_range(1..20);
            random_program(&mut rng, commands, 3)
        } else {
            // a continuation that always decompiles
            let (m, n) = (rng.gen_range(1..8), rng.gen_range(1..8));
            let (u, w) = (random_term(&mut rng, m, 3), random_term(&mut rng, n, 3));
            compile(&u, compile(&w, Pro::app(Pro::Ret)))
        };
        let depth = rng.gen_range(0..4);
        let stack: Vec<Term> = (0..depth)
            .map(|_| {
                let size = rng.gen_range(1..6);
                random_term(&mut rng, size, 3)
            })
            .collect();
        let lhs = decompile(&compile(&s, p.clone()), stack.clone());
        ensure(lhs == decompile(&p, cons(&s, &stack)), || format!("{s} with {p}"))?;
        defined += lhs.is_some() as usize;
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{} small terms × {} continuations, {CASES} random cases ({defined} defined), {:.2?}",
        small.len(),
        conts.len(),
        start.elapsed()
    ))
}

fn substitution() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    for _ in 0..CASES {
        let (m, n) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let s = random_term(&mut rng, m, 6);
        let t = random_term(&mut rng, n, 6);
        let k = rng.gen_range(0..=5);
        let p = compile_top(&s).subst(k, &compile_top(&t));
        ensure(represents(&p, &s.subst(k, &l(t.clone()))), || {
            format!("s = {s}, t = {t}, k = {k}")
        })?;
    }
    Ok(format!("{CASES} random (s, t, k)"))
}

fn stack_audit(corpus: &[Term]) -> Outcome {
    let start = Instant::now();
    let (mut halted, mut betas) = (0, 0);
    for (i, s) in corpus.iter().enumerate() {
        let report = audit_refinement(&StackMachine::new(), &StackToTerm::new(), StackState::init(s), FUEL);
        ensure(report.is_ok(), || format!("term {i} {s}: {:?}", report.verdict))?;
        if !report.halted {
            betas += report.beta_count;
            continue;
        }
        let l_run = eval(s.clone(), FUEL);
        if l_run.is_normal() {
            ensure(report.beta_count == l_run.steps(), || {
                format!("term {i} {s}: {} β steps, {} L steps", report.beta_count, l_run.steps())
            })?;
            halted += 1;
        }
        betas += report.beta_count;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{} terms, {halted} terminating, {betas} β steps audited, {:.2?}",
        corpus.len(),
        start.elapsed()
    ))
}

fn closure_audit(corpus: &[Term]) -> Outcome {
    let machine = ClosureMachine::new();
    for (i, s) in corpus.iter().enumerate() {
        let init = CloState::init(compile_top(s));
        let report = audit_refinement(&machine, &ClosureToStack::new(), init.clone(), FUEL);
        ensure(report.is_ok(), || format!("term {i} {s}: {:?}", report.verdict))?;
        let mut st = init;
        for _ in 0..=FUEL {
            ensure(state_closed(&st), || format!("term {i} {s}: open state {st}"))?;
            match machine.step(&st) {
                Some((_, next)) => st = next,
                None => break,
            }
        }
    }
    Ok(format!("{} terms, every state closed", corpus.len()))
}

fn heap_audit(corpus: &[Term]) -> Outcome {
    let mut halted = 0;
    for (i, s) in corpus.iter().enumerate() {
        let (code, st) = load(s).map_err(|e| e.to_string())?;
        let machine = HeapMachine::new(&code);
        let report = audit_refinement(&machine, &HeapToClosure::new(&code), st.clone(), FUEL);
        ensure(report.is_ok(), || format!("term {i} {s}: {:?}", report.verdict))?;
        if report.halted {
            let last = evaluate(&machine, st, FUEL);
            let cells = last.state().heap.len();
            ensure(cells == report.beta_count, || {
                format!("term {i} {s}: {cells} cells, {} β", report.beta_count)
            })?;
            halted += 1;
        }
    }
    Ok(format!(
        "{} terms, heap size = β-count on {halted} terminating runs",
        corpus.len()
    ))
}

fn end_to_end(corpus: &[Term]) -> Outcome {
    let mut halted = 0;
    for (i, s) in corpus.iter().enumerate() {
        let report = driver::diff_levels(s, FUEL);
        ensure(report.agree(), || format!("term {i} {s}: {:?}", report.results))?;
        let first = &report.results[0];
        ensure(first.halted == first.normal_form.is_some(), || {
            format!("term {i} {s}: no normal form")
        })?;
        halted += first.halted as usize;
    }
    let omega = driver::diff_levels(&Term::omega(), FUEL);
    for r in &omega.results {
        ensure(!r.halted && r.beta_count == FUEL, || {
            format!("Ω on {}: {r:?}", r.level.name())
        })?;
    }
    Ok(format!(
        "{} terms agree ({halted} terminating); Ω exhausts {FUEL} β steps everywhere",
        corpus.len()
    ))
}

/// Checks the machine classifier against the decompiled term's class.
fn classifier_agrees(st: &StackState, term: &Term) -> bool {
    let class = sm_classify(st);
    let shape_ok = match &class {
        Some(StackClass::Reducible) => sm_step(st).is_some(),
        Some(StackClass::FinalAbstraction(p)) => matches!(term, Term::Lam(body) if represents(p, body)),
        Some(StackClass::StuckVar) => term.is_stuck() && sm_step(st).is_none(),
        None => false,
    };
    shape_ok && (term.classify() != TermClass::Reducible || class == Some(StackClass::Reducible))
}

fn trichotomy(corpus: &[Term]) -> Outcome {
    let terms = enumerate_terms(7, 7);
    for s in &terms {
        let holding = [s.step().is_some(), s.is_lam(), s.is_stuck()]
            .iter()
            .filter(|&&b| b)
            .count();
        ensure(holding == 1, || format!("{s}: {holding} of the three classes hold"))?;
    }
    let mut states = 0;
    for (i, s) in corpus.iter().enumerate() {
        let up = StackToTerm::new();
        let mut st = StackState::init(s);
        for _ in 0..=FUEL {
            if let Some(term) = up.decompile(&st) {
                states += 1;
                ensure(classifier_agrees(&st, &term), || {
                    format!("term {i} {s}: disagrees at {st}")
                })?;
            }
            match sm_step(&st) {
                Some((_, next)) => st = next,
                None => break,
            }
        }
    }
    Ok(format!(
        "{} terms of size ≤ 7; classifier agrees on {states} stack states",
        terms.len()
    ))
}

fn random_coms(rng: &mut StdRng) -> Vec<Com> {
    let n = rng.gen_range(0..10);
    (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => Com::Ret,
            1 => Com::App,
            2 => Com::Var(rng.gen_range(0..4)),
            _ => Com::Lam(rng.gen_range(0..8)),
        })
        .collect()
}

fn code_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    for _ in 0..CASES {
        let before = random_coms(&mut rng);
        let commands = rng.gen_range(1..40);
        let p = random_program(&mut rng, commands, 3);
        let after = random_coms(&mut rng);
        let base = before.len();
        let code = ListCode::new([before, psi(&p), after].concat());
        ensure(represents_pro(&code, base, &p), || format!("{p} at {base} in {code}"))?;
        ensure(
            read_program(&code, base, code.depth_bound()).as_ref() == Some(&p),
            || format!("reading {p}"),
        )?;
        let alone = ListCode::compile(&p);
        ensure(
            read_program(&alone, 0, alone.depth_bound()).as_ref() == Some(&p),
            || format!("ψ of {p}"),
        )?;
    }
    Ok(format!("{CASES} random (C1, P, C2)"))
}

fn random_heap(rng: &mut StdRng, code: &ListCode, mut heap: ListHeap, cells: usize) -> ListHeap {
    for _ in 0..cells {
        let next = heap.len() + 1;
        let g = HeapClosure::new(rng.gen_range(0..code.len()), rng.gen_range(0..next));
        heap = heap.put(g, rng.gen_range(0..next)).0;
    }
    heap
}

fn heap_laws() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    for case in 0..CASES {
        let commands = rng.gen_range(1..30);
        let code = ListCode::compile(&random_program(&mut rng, commands, 2));
        let cells = rng.gen_range(0..40);
        let heap = random_heap(&mut rng, &code, ListHeap::new(), cells);
        ensure(heap.is_acyclic(), || format!("heap {case} is cyclic"))?;

        let g = HeapClosure::new(rng.gen_range(0..code.len()), rng.gen_range(0..=heap.len()));
        let tail = rng.gen_range(0..=heap.len());
        let (bigger, b) = heap.put(g, tail);
        ensure(b == heap.len() + 1 && bigger.get(b) == Some(Some((g, tail))), || {
            format!("heap {case}: put-then-get")
        })?;
        ensure(extends(&heap, &bigger), || format!("heap {case}: put-then-extends"))?;

        let more = rng.gen_range(1..10);
        let bigger = random_heap(&mut rng, &code, bigger, more);
        let fuel = heap.depth_bound() + code.depth_bound();
        for addr in 0..=heap.len() {
            let env = decompile_env(&heap, &code, addr, fuel).ok_or(format!("heap {case}: {addr} undecompilable"))?;
            ensure(decompile_env(&bigger, &code, addr, fuel).as_ref() == Some(&env), || {
                format!("heap {case}: decompiling {addr} is not monotone")
            })?;
            for n in 0..env.len() + 2 {
                let coherent = match (env.get(n), lookup(&heap, addr, n)) {
                    (None, None) => true,
                    (Some(e), Some(g)) => {
                        let prog = read_program(&code, g.code, fuel);
                        let inner = decompile_env(&heap, &code, g.env, fuel);
                        prog.zip(inner).is_some_and(|(p, inner)| *e == Clo::new(p, inner))
                    }
                    _ => false,
                };
                ensure(coherent, || format!("heap {case}: lookup {n} at {addr}"))?;
            }
        }
    }
    Ok(format!("{CASES} random acyclic heaps"))
}

fn negative_controls(corpus: &[Term]) -> Outcome {
    // the corruption shows once the trace reaches an abstraction, so take
    // reducible terms that terminate
    let mut terms = vec![a(l(v(0)), l(v(0)))];
    terms.extend(
        corpus
            .iter()
            .filter(|s| s.step().is_some() && eval((*s).clone(), FUEL).is_normal())
            .take(50)
            .cloned(),
    );
    for s in &terms {
        let dropped = audit_refinement(
            &StackMachine::new(),
            &DropLambda(StackToTerm::new()),
            StackState::init(s),
            FUEL,
        );
        ensure(!dropped.is_ok(), || format!("corrupted decompiler passes on {s}"))?;
        let split = audit_refinement(
            &SplitBeta(StackMachine::new()),
            &SplitView(StackToTerm::new()),
            Split::new(StackState::init(s)),
            FUEL,
        );
        ensure(!split.is_ok(), || format!("two-β fixture passes on {s}"))?;
    }
    Ok(format!("both fixtures flagged on {} reducible terms", terms.len()))
}

fn main() {
    let results = driver::with_big_stack(|| {
        let corpus = fuzz_corpus(CORPUS, MAX_SIZE, SEED);
        let criteria: Vec<(&str, Check)> = vec![
            ("L capture example", Box::new(capture_example)),
            ("compile/decompile inversion", Box::new(inversion)),
            ("program substitution", Box::new(substitution)),
            ("stack machine refines L", Box::new(|| stack_audit(&corpus))),
            (
                "closure machine refines stack machine",
                Box::new(|| closure_audit(&corpus)),
            ),
            ("heap machine refines closure machine", Box::new(|| heap_audit(&corpus))),
            ("end-to-end diff", Box::new(|| end_to_end(&corpus))),
            ("trichotomy", Box::new(|| trichotomy(&corpus))),
            ("code correctness", Box::new(code_correctness)),
            ("heap laws", Box::new(heap_laws)),
            ("negative controls", Box::new(|| negative_controls(&corpus))),
        ];
        let mut passed = 0;
        for (i, (name, check)) in criteria.iter().enumerate() {
            let start = Instant::now();
            let result = check();
            let elapsed = start.elapsed();
            match result {
                Ok(detail) => {
                    passed += 1;
                    println!("criterion {:>2} PASS  {name}: {detail} [{elapsed:.2?}]", i + 1);
                }
                Err(reason) => println!("criterion {:>2} FAIL  {name}: {reason} [{elapsed:.2?}]", i + 1),
            }
        }
        println!("{passed}/{} criteria passed", criteria.len());
        passed == criteria.len()
    });
    match results {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            println!("acceptance suite crashed: {e}");
            std::process::exit(1);
        }
    }
}
