//! The `run`, `diff` and `fuzz` commands.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use lam_core::framework::{compose, evaluate_observable};
use lam_core::gen::random_closed_term;
use lam_core::programs::compile_top;
use lam_core::terms::eval;
use lam_core::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::trace::{AuditEntry, ResultKind, Snapshot, Trace, TraceRecord, TraceResult};

/// Stack size for threads that walk deep terms.
pub const STACK_SIZE: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Level {
    L,
    Stack,
    Closure,
    Heap,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::L, Level::Stack, Level::Closure, Level::Heap];

    pub fn name(self) -> &'static str {
        match self {
            Level::L => "l",
            Level::Stack => "stack",
            Level::Closure => "closure",
            Level::Heap => "heap",
        }
    }

    fn from_name(name: &str) -> Option<Level> {
        Level::ALL.into_iter().find(|l| l.name() == name)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Verification(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Runs `f` on a thread with a large stack; a panic becomes an internal error.
pub fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    std::thread::scope(|scope| {
        let handle = std::thread::Builder::new()
            .stack_size(STACK_SIZE)
            .spawn_scoped(scope, f)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        handle.join().map_err(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            CliError::Internal(message)
        })
    })
}

pub fn read_source(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut text = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut text)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))
    }
}

pub fn parse_source(text: &str) -> Result<Term, CliError> {
    crate::syntax::parse_term(text).map_err(|e| CliError::Input(e.to_string()))
}

fn require_closed(s: &Term, level: Level) -> Result<(), CliError> {
    match s.min_free_index() {
        Some(index) => Err(CliError::Input(format!(
            "the {} machine needs a closed term, but variable {index} is free",
            level.name()
        ))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Total step budget, τ and β alike.
    pub fuel: usize,
    pub trace: bool,
    pub trace_json: Option<String>,
    pub audit: bool,
    pub dump_code: Option<String>,
    pub dump_heap: Option<String>,
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub normal_form: Option<Term>,
    pub beta_count: usize,
    pub tau_count: usize,
}

impl Outcome {
    pub fn halted(&self) -> bool {
        self.normal_form.is_some()
    }
}

type View<'a, S, T> = Box<dyn Fn(&S) -> Option<T> + 'a>;

/// Decompilations shown next to each state.
struct Views<'a, S> {
    to_l: View<'a, S, Term>,
    higher: Option<View<'a, S, String>>,
}

impl<S: Serialize + Display> Views<'_, S> {
    fn snapshot(&self, state: &S) -> Result<Snapshot, CliError> {
        Ok(Snapshot {
            rendering: state.to_string(),
            state: serde_json::to_value(state).map_err(|e| CliError::Internal(e.to_string()))?,
            decompiled: (self.to_l)(state).map(|t| t.to_string()),
            higher: self.higher.as_ref().map(|h| h(state).unwrap_or_else(|| "?".into())),
        })
    }
}

struct Execution<S> {
    last: S,
    halted: bool,
    beta_count: usize,
    tau_count: usize,
    initial: Option<Snapshot>,
    records: Vec<TraceRecord>,
}

fn execute<M>(
    machine: &M,
    initial: M::State,
    opts: &RunOptions,
    views: &Views<M::State>,
    out: &mut dyn Write,
) -> Result<Execution<M::State>, CliError>
where
    M: Machine,
    M::State: Serialize + Display,
{
    let json = opts.trace_json.is_some();
    let mut exec = Execution {
        last: initial,
        halted: false,
        beta_count: 0,
        tau_count: 0,
        initial: None,
        records: Vec::new(),
    };
    if opts.trace || json {
        let snap = views.snapshot(&exec.last)?;
        if opts.trace {
            write_trace_line(out, 0, None, &snap)?;
        }
        exec.initial = Some(snap);
    }
    for step_index in 1..=opts.fuel + 1 {
        let Some((label, next)) = machine.step(&exec.last) else {
            exec.halted = true;
            break;
        };
        if step_index > opts.fuel {
            break;
        }
        match label {
            Label::Tau => exec.tau_count += 1,
            Label::Beta => exec.beta_count += 1,
        }
        exec.last = next;
        if opts.trace || json {
            let snapshot = views.snapshot(&exec.last)?;
            if opts.trace {
                write_trace_line(out, step_index, Some(label), &snapshot)?;
            }
            if json {
                exec.records.push(TraceRecord {
                    step_index,
                    label,
                    snapshot,
                });
            }
        }
    }
    Ok(exec)
}

fn write_trace_line(out: &mut dyn Write, i: usize, label: Option<Label>, snap: &Snapshot) -> std::io::Result<()> {
    let label = label.map(|l| l.to_string()).unwrap_or_default();
    writeln!(out, "#{i:<5} {label:1}  {}", snap.rendering)?;
    if let Some(higher) = &snap.higher {
        writeln!(out, "         ≫  {higher}")?;
    }
    match &snap.decompiled {
        Some(t) if t != &snap.rendering => writeln!(out, "         ≫  {t}"),
        Some(_) => Ok(()),
        None => writeln!(out, "         ≫  (does not decompile)"),
    }
}

fn finish<S>(
    level: Level,
    exec: Execution<S>,
    views: &Views<S>,
    code: Option<&ListCode>,
    opts: &RunOptions,
    audits: &[(String, AuditReport)],
) -> Result<Outcome, CliError> {
    let normal_form = if exec.halted {
        let t = (views.to_l)(&exec.last)
            .ok_or_else(|| CliError::Internal(format!("the final {} state does not decompile", level.name())))?;
        Some(t)
    } else {
        None
    };
    let outcome = Outcome {
        normal_form,
        beta_count: exec.beta_count,
        tau_count: exec.tau_count,
    };
    if let (Some(path), Some(initial)) = (&opts.trace_json, exec.initial) {
        let trace = Trace {
            machine: level.name().into(),
            fuel: opts.fuel,
            code: code.cloned(),
            audits: audits
                .iter()
                .map(|(refinement, report)| AuditEntry {
                    refinement: refinement.clone(),
                    report: report.clone(),
                })
                .collect(),
            initial,
            records: exec.records,
            result: TraceResult {
                kind: if outcome.halted() {
                    ResultKind::Normal
                } else {
                    ResultKind::Diverged
                },
                normal_form: outcome.normal_form.as_ref().map(|t| t.to_string()),
                beta_count: outcome.beta_count,
                tau_count: outcome.tau_count,
            },
        };
        let file = std::fs::File::create(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &trace).map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(outcome)
}

fn write_file(path: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(Path::new(path), text).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

/// Runs `s` on `level`, printing the result and, if asked, the trace and audits.
pub fn run(s: &Term, level: Level, opts: &RunOptions, out: &mut dyn Write) -> Result<Outcome, CliError> {
    if level != Level::L {
        require_closed(s, level)?;
    }
    if opts.dump_heap.is_some() && level != Level::Heap {
        return Err(CliError::Input("--dump-heap needs --machine heap".into()));
    }
    let audits = if opts.audit {
        audit_chain(s, level, opts.fuel)
    } else {
        Vec::new()
    };
    let outcome = match level {
        Level::L => {
            let views = Views {
                to_l: Box::new(|t: &Term| Some(t.clone())),
                higher: None,
            };
            let exec = execute(&Calculus, s.clone(), opts, &views, out)?;
            finish(level, exec, &views, None, opts, &audits)?
        }
        Level::Stack => {
            let up = StackToTerm::new();
            let views = Views {
                to_l: Box::new(|st| up.decompile(st)),
                higher: None,
            };
            let exec = execute(&StackMachine::new(), StackState::init(s), opts, &views, out)?;
            finish(level, exec, &views, None, opts, &audits)?
        }
        Level::Closure => {
            let up = ClosureToStack::new();
            let chain = compose(ClosureToStack::new(), StackToTerm::new());
            let views = Views {
                to_l: Box::new(|st| chain.decompile(st)),
                higher: Some(Box::new(|st| up.decompile(st).map(|x| x.to_string()))),
            };
            let exec = execute(
                &ClosureMachine::new(),
                CloState::init(compile_top(s)),
                opts,
                &views,
                out,
            )?;
            finish(level, exec, &views, None, opts, &audits)?
        }
        Level::Heap => {
            let (code, st) = load(s).map_err(|e| CliError::Input(e.to_string()))?;
            let up = HeapToClosure::new(&code);
            let chain = compose(
                HeapToClosure::new(&code),
                compose(ClosureToStack::new(), StackToTerm::new()),
            );
            let views = Views {
                to_l: Box::new(|st| chain.decompile(st)),
                higher: Some(Box::new(|st| up.decompile(st).map(|x| x.to_string()))),
            };
            let exec = execute(&HeapMachine::new(&code), st, opts, &views, out)?;
            if let Some(path) = &opts.dump_heap {
                write_file(path, &exec.last.heap.to_string())?;
            }
            finish(level, exec, &views, Some(&code), opts, &audits)?
        }
    };
    if let Some(path) = &opts.dump_code {
        write_file(path, &ListCode::compile(&compile_top(s)).to_string())?;
    }
    match &outcome.normal_form {
        Some(t) => writeln!(out, "{t}")?,
        None => writeln!(out, "diverged (fuel {})", opts.fuel)?,
    }
    writeln!(
        out,
        "steps {} (β {}, τ {})",
        outcome.beta_count + outcome.tau_count,
        outcome.beta_count,
        outcome.tau_count
    )?;
    if opts.audit {
        let mut failed = Vec::new();
        for (name, report) in &audits {
            writeln!(out, "{}", describe_audit(name, report))?;
            if !report.is_ok() {
                failed.push(name.as_str());
            }
        }
        if !failed.is_empty() {
            return Err(CliError::Verification(format!("audit failed: {}", failed.join(", "))));
        }
    }
    Ok(outcome)
}

pub fn describe_audit(name: &str, report: &AuditReport) -> String {
    let verdict = match &report.verdict {
        Verdict::Ok => "ok".to_string(),
        Verdict::Violation {
            violation,
            at_step,
            detail,
        } => {
            format!("VIOLATION {violation:?} at step {at_step}: {detail}")
        }
    };
    format!(
        "audit {name}: {verdict} ({} steps, β {}, τ {}, longest τ run {}{})",
        report.steps_checked,
        report.beta_count,
        report.tau_count,
        report.max_tau_run,
        if report.halted { "" } else { ", fuel exhausted" }
    )
}

/// Audits every adjacent pair of levels from L down to `level`.
pub fn audit_chain(s: &Term, level: Level, fuel: usize) -> Vec<(String, AuditReport)> {
    let mut reports = Vec::new();
    if level == Level::L {
        return reports;
    }
    reports.push((
        "stack → l".into(),
        audit_refinement(&StackMachine::new(), &StackToTerm::new(), StackState::init(s), fuel),
    ));
    if level == Level::Stack {
        return reports;
    }
    reports.push((
        "closure → stack".into(),
        audit_refinement(
            &ClosureMachine::new(),
            &ClosureToStack::new(),
            CloState::init(compile_top(s)),
            fuel,
        ),
    ));
    if level == Level::Closure {
        return reports;
    }
    if let Ok((code, st)) = load(s) {
        reports.push((
            "heap → closure".into(),
            audit_refinement(&HeapMachine::new(&code), &HeapToClosure::new(&code), st, fuel),
        ));
    }
    reports
}

/// One level's answer in a [`diff`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelResult {
    pub level: Level,
    pub halted: bool,
    pub beta_count: usize,
    pub normal_form: Option<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffReport {
    pub results: Vec<LevelResult>,
}

impl DiffReport {
    pub fn agree(&self) -> bool {
        let first = &self.results[0];
        self.results.iter().all(|r| {
            r == &LevelResult {
                level: r.level,
                ..first.clone()
            }
        })
    }
}

/// Runs a closed term on all four levels, each for at most `beta_fuel` β steps.
pub fn diff_levels(s: &Term, beta_fuel: usize) -> DiffReport {
    let l_run = eval(s.clone(), beta_fuel);
    let mut results = vec![LevelResult {
        level: Level::L,
        halted: l_run.is_normal(),
        beta_count: l_run.steps(),
        normal_form: l_run.is_normal().then(|| l_run.state().clone()),
    }];
    let sm = evaluate_observable(&StackMachine::new(), StackState::init(s), beta_fuel);
    results.push(LevelResult {
        level: Level::Stack,
        halted: sm.halted,
        beta_count: sm.beta_steps,
        normal_form: sm.halted.then(|| StackToTerm::new().decompile(&sm.state)).flatten(),
    });
    let cm = evaluate_observable(&ClosureMachine::new(), CloState::init(compile_top(s)), beta_fuel);
    let chain = compose(ClosureToStack::new(), StackToTerm::new());
    results.push(LevelResult {
        level: Level::Closure,
        halted: cm.halted,
        beta_count: cm.beta_steps,
        normal_form: cm.halted.then(|| chain.decompile(&cm.state)).flatten(),
    });
    let (code, st) = load(s).expect("diff needs a closed term");
    let hm = evaluate_observable(&HeapMachine::new(&code), st, beta_fuel);
    let chain = compose(HeapToClosure::new(&code), chain);
    results.push(LevelResult {
        level: Level::Heap,
        halted: hm.halted,
        beta_count: hm.beta_steps,
        normal_form: hm.halted.then(|| chain.decompile(&hm.state)).flatten(),
    });
    DiffReport { results }
}

pub fn diff(s: &Term, beta_fuel: usize, out: &mut dyn Write) -> Result<DiffReport, CliError> {
    require_closed(s, Level::Stack)?;
    let report = diff_levels(s, beta_fuel);
    for r in &report.results {
        let status = if r.halted {
            "normal".to_string()
        } else {
            format!("diverged (fuel {beta_fuel})")
        };
        let nf = r.normal_form.as_ref().map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{:<8} {status:<10} β {:<6} {nf}", r.level.name(), r.beta_count)?;
    }
    let first = &report.results[0];
    if !report.agree() {
        writeln!(out, "levels disagree")?;
        return Err(CliError::Verification("levels disagree".into()));
    }
    match &first.normal_form {
        Some(t) => writeln!(out, "all levels agree: normal form {t}, β-count {}", first.beta_count)?,
        None => writeln!(out, "all levels agree: diverged after {} β steps", first.beta_count)?,
    }
    Ok(report)
}

/// The verdict on one fuzz case.
#[derive(Clone, Debug)]
pub struct CaseReport {
    pub term: Term,
    pub diff: DiffReport,
    pub audits: Vec<(String, AuditReport)>,
}

impl CaseReport {
    pub fn ok(&self) -> bool {
        self.diff.agree() && self.audits.iter().all(|(_, r)| r.is_ok())
    }
}

pub fn check_case(s: &Term, fuel: usize) -> CaseReport {
    CaseReport {
        term: s.clone(),
        diff: diff_levels(s, fuel),
        audits: audit_chain(s, Level::Heap, fuel),
    }
}

/// The `count` terms `fuzz` draws from `seed`.
pub fn fuzz_corpus(count: usize, size: usize, seed: u64) -> Vec<Term> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| random_closed_term(&mut rng, size)).collect()
}

pub fn fuzz(count: usize, size: usize, seed: u64, fuel: usize, out: &mut dyn Write) -> Result<usize, CliError> {
    if size < 2 {
        return Err(CliError::Input("--size must be at least 2".into()));
    }
    let corpus = fuzz_corpus(count, size, seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .stack_size(STACK_SIZE)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let reports: Vec<CaseReport> = pool.install(|| corpus.par_iter().map(|s| check_case(s, fuel)).collect());
    let mut failures = 0;
    for (i, case) in reports.iter().enumerate() {
        let first = &case.diff.results[0];
        if case.ok() {
            let status = if first.halted { "normal" } else { "diverged" };
            writeln!(out, "case {i}: ok {status} β {}  {}", first.beta_count, case.term)?;
        } else {
            failures += 1;
            writeln!(out, "case {i}: FAIL  {}", case.term)?;
            if !case.diff.agree() {
                for r in &case.diff.results {
                    writeln!(
                        out,
                        "    {} halted={} β {} {:?}",
                        r.level.name(),
                        r.halted,
                        r.beta_count,
                        r.normal_form
                    )?;
                }
            }
            for (name, report) in case.audits.iter().filter(|(_, r)| !r.is_ok()) {
                writeln!(out, "    {}", describe_audit(name, report))?;
            }
        }
    }
    writeln!(out, "fuzz: {count} cases, {} ok, {failures} failed", count - failures)?;
    if failures > 0 {
        return Err(CliError::Verification(format!("{failures} fuzz cases failed")));
    }
    Ok(count)
}

fn replay_with<M>(machine: &M, trace: &Trace) -> Result<(), String>
where
    M: Machine,
    M::State: DeserializeOwned + PartialEq,
{
    let decode = |v: &serde_json::Value| serde_json::from_value::<M::State>(v.clone()).map_err(|e| e.to_string());
    let mut prev = decode(&trace.initial.state)?;
    let (mut beta, mut tau) = (0, 0);
    for (i, record) in trace.records.iter().enumerate() {
        if record.step_index != i + 1 {
            return Err(format!("record {i} has step index {}", record.step_index));
        }
        let state = decode(&record.snapshot.state)?;
        match machine.step(&prev) {
            Some((label, next)) if label == record.label && next == state => {}
            _ => return Err(format!("step {} does not replay", record.step_index)),
        }
        match record.label {
            Label::Tau => tau += 1,
            Label::Beta => beta += 1,
        }
        prev = state;
    }
    if (beta, tau) != (trace.result.beta_count, trace.result.tau_count) {
        return Err("step counts do not match the records".into());
    }
    let halted = machine.step(&prev).is_none();
    match trace.result.kind {
        ResultKind::Normal if !halted => Err("the last state still steps".into()),
        ResultKind::Diverged if halted || trace.records.len() != trace.fuel => {
            Err("a diverged trace must use all its fuel".into())
        }
        _ => Ok(()),
    }
}

/// Checks that stepping each recorded state yields the next record.
///
/// Machines are deterministic, so this means the trace suffix from any
/// recorded state is reproduced by re-running from it.
pub fn replay(trace: &Trace) -> Result<(), String> {
    match Level::from_name(&trace.machine) {
        Some(Level::L) => replay_with(&Calculus, trace),
        Some(Level::Stack) => replay_with(&StackMachine::new(), trace),
        Some(Level::Closure) => replay_with(&ClosureMachine::new(), trace),
        Some(Level::Heap) => {
            let code = trace.code.as_ref().ok_or("heap trace without code")?;
            replay_with(&HeapMachine::<ListCode, ListHeap>::new(code), trace)
        }
        None => Err(format!("unknown machine `{}`", trace.machine)),
    }
}
