//! Reduction systems, labeled machines and the refinement auditor.
//!
//! A [`Machine`] is a deterministic labeled transition system: every step is
//! either silent ([`Label::Tau`]) or observable ([`Label::Beta`]). A
//! [`Refinement`] relates machine states to states of a higher-level system
//! through a computable decompilation function. Refinements are not trusted;
//! [`audit_refinement`] walks a concrete trace and checks, at every step, the
//! conditions that make the decompilation a simulation:
//!
//! 1. progress: if the decompiled state is reducible, the machine state is too;
//! 2. silent steps preserve the decompiled state (or, against a labeled
//!    source, map to a silent source step);
//! 3. observable steps map to exactly one source step;
//! 4. silent steps strictly decrease the machine's τ-measure.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Label carried by every machine transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Tau,
    Beta,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tau => f.write_str("τ"),
            Label::Beta => f.write_str("β"),
        }
    }
}

/// Outcome of a fuel-bounded evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalResult<S> {
    /// `state` has no successor; it was reached after `steps` steps.
    Normal { state: S, steps: usize },
    /// Fuel ran out; `state` is the last state reached and `steps` equals the fuel.
    OutOfFuel { state: S, steps: usize },
}

impl<S> EvalResult<S> {
    pub fn state(&self) -> &S {
        match self {
            EvalResult::Normal { state, .. } | EvalResult::OutOfFuel { state, .. } => state,
        }
    }

    pub fn into_state(self) -> S {
        match self {
            EvalResult::Normal { state, .. } | EvalResult::OutOfFuel { state, .. } => state,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            EvalResult::Normal { steps, .. } | EvalResult::OutOfFuel { steps, .. } => *steps,
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, EvalResult::Normal { .. })
    }
}

/// Iterates a step function at most `fuel` times.
pub fn iterate<S>(mut state: S, fuel: usize, mut step: impl FnMut(&S) -> Option<S>) -> EvalResult<S> {
    for steps in 0..fuel {
        match step(&state) {
            Some(next) => state = next,
            None => return EvalResult::Normal { state, steps },
        }
    }
    if step(&state).is_none() {
        EvalResult::Normal { state, steps: fuel }
    } else {
        EvalResult::OutOfFuel { state, steps: fuel }
    }
}

/// A deterministic machine with labeled steps.
pub trait Machine {
    type State: Clone;

    fn step(&self, state: &Self::State) -> Option<(Label, Self::State)>;

    /// A natural number that strictly decreases across every τ step.
    fn tau_measure(&self, state: &Self::State) -> usize;
}

impl<M: Machine + ?Sized> Machine for &M {
    type State = M::State;

    fn step(&self, state: &Self::State) -> Option<(Label, Self::State)> {
        (**self).step(state)
    }

    fn tau_measure(&self, state: &Self::State) -> usize {
        (**self).tau_measure(state)
    }
}

/// Runs `machine` from `state` for at most `fuel` steps (τ and β alike).
pub fn evaluate<M: Machine>(machine: &M, state: M::State, fuel: usize) -> EvalResult<M::State> {
    iterate(state, fuel, |s| machine.step(s).map(|(_, next)| next))
}

/// Counts of a run; see [`evaluate_observable`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run<S> {
    pub state: S,
    pub beta_steps: usize,
    pub tau_steps: usize,
    pub halted: bool,
}

/// Runs `machine` until it halts or has taken `beta_fuel` β steps.
///
/// τ steps are not charged. Their runs are finite whenever the machine's
/// τ-measure is sound, which the auditor checks separately.
pub fn evaluate_observable<M: Machine>(machine: &M, mut state: M::State, beta_fuel: usize) -> Run<M::State> {
    let mut beta_steps = 0;
    let mut tau_steps = 0;
    loop {
        match machine.step(&state) {
            None => {
                return Run {
                    state,
                    beta_steps,
                    tau_steps,
                    halted: true,
                };
            }
            Some((Label::Beta, _)) if beta_steps == beta_fuel => {
                return Run {
                    state,
                    beta_steps,
                    tau_steps,
                    halted: false,
                };
            }
            Some((label, next)) => {
                match label {
                    Label::Tau => tau_steps += 1,
                    Label::Beta => beta_steps += 1,
                }
                state = next;
            }
        }
    }
}

/// A successor in the system a refinement decompiles into.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceStep<X> {
    /// The source is a plain reduction system (such as L).
    Plain(X),
    /// The source is itself a machine; machine-to-machine refinements are
    /// strict simulations, so labels must agree.
    Labeled(Label, X),
}

impl<X> SourceStep<X> {
    pub fn target(&self) -> &X {
        match self {
            SourceStep::Plain(x) | SourceStep::Labeled(_, x) => x,
        }
    }
}

/// A functional, computable refinement from `Low` states to `High` states.
pub trait Refinement {
    type Low;
    type High: Clone + PartialEq + fmt::Debug;

    fn decompile(&self, low: &Self::Low) -> Option<Self::High>;

    fn source_step(&self, high: &Self::High) -> Option<SourceStep<Self::High>>;

    fn source_reducible(&self, high: &Self::High) -> bool {
        self.source_step(high).is_some()
    }

    /// A cheap sufficient condition for `decompile(after) == decompile(before)`,
    /// given that `before` decompiles. `false` only means "not established";
    /// the auditor then compares full decompilations.
    fn unchanged(&self, _before: &Self::Low, _after: &Self::Low) -> bool {
        false
    }
}

impl<R: Refinement + ?Sized> Refinement for &R {
    type Low = R::Low;
    type High = R::High;

    fn decompile(&self, low: &Self::Low) -> Option<Self::High> {
        (**self).decompile(low)
    }

    fn source_step(&self, high: &Self::High) -> Option<SourceStep<Self::High>> {
        (**self).source_step(high)
    }

    fn source_reducible(&self, high: &Self::High) -> bool {
        (**self).source_reducible(high)
    }

    fn unchanged(&self, before: &Self::Low, after: &Self::Low) -> bool {
        (**self).unchanged(before, after)
    }
}

/// Composition of a refinement `A → B` with a refinement `B → X`.
#[derive(Clone, Copy, Debug)]
pub struct Composed<R1, R2> {
    pub lower: R1,
    pub upper: R2,
}

pub fn compose<R1, R2>(lower: R1, upper: R2) -> Composed<R1, R2>
where
    R1: Refinement,
    R2: Refinement<Low = R1::High>,
{
    Composed { lower, upper }
}

impl<R1, R2> Refinement for Composed<R1, R2>
where
    R1: Refinement,
    R2: Refinement<Low = R1::High>,
{
    type Low = R1::Low;
    type High = R2::High;

    fn decompile(&self, low: &Self::Low) -> Option<Self::High> {
        self.lower.decompile(low).and_then(|mid| self.upper.decompile(&mid))
    }

    fn source_step(&self, high: &Self::High) -> Option<SourceStep<Self::High>> {
        self.upper.source_step(high)
    }

    fn source_reducible(&self, high: &Self::High) -> bool {
        self.upper.source_reducible(high)
    }

    fn unchanged(&self, before: &Self::Low, after: &Self::Low) -> bool {
        self.lower.unchanged(before, after)
    }
}

/// The identity refinement of a machine onto itself.
#[derive(Clone, Copy, Debug)]
pub struct Identity<M>(pub M);

impl<M> Refinement for Identity<M>
where
    M: Machine,
    M::State: PartialEq + fmt::Debug,
{
    type Low = M::State;
    type High = M::State;

    fn decompile(&self, low: &Self::Low) -> Option<Self::High> {
        Some(low.clone())
    }

    fn source_step(&self, high: &Self::High) -> Option<SourceStep<Self::High>> {
        self.0.step(high).map(|(label, next)| SourceStep::Labeled(label, next))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    SilentChanged,
    BetaMismatch,
    ProgressFailed,
    TauBudgetExceeded,
    DecompileFailed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Violation {
        violation: ViolationKind,
        at_step: usize,
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub steps_checked: usize,
    pub beta_count: usize,
    pub tau_count: usize,
    pub max_tau_run: usize,
    /// The trace reached a state without successor within fuel.
    pub halted: bool,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn is_ok(&self) -> bool {
        self.verdict == Verdict::Ok
    }

    pub fn violation(&self) -> Option<ViolationKind> {
        match &self.verdict {
            Verdict::Ok => None,
            Verdict::Violation { violation, .. } => Some(*violation),
        }
    }
}

const DETAIL_LIMIT: usize = 400;

fn clip(mut text: String) -> String {
    if text.len() > DETAIL_LIMIT {
        let mut cut = DETAIL_LIMIT;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
        text.push('…');
    }
    text
}

/// Audits the trace of `machine` from `initial` against `refinement`.
///
/// At most `fuel` machine steps are checked. The report is `Ok` iff every
/// checked step satisfied the refinement conditions.
pub fn audit_refinement<M, R>(machine: &M, refinement: &R, initial: M::State, fuel: usize) -> AuditReport
where
    M: Machine,
    R: Refinement<Low = M::State>,
{
    let mut report = AuditReport {
        steps_checked: 0,
        beta_count: 0,
        tau_count: 0,
        max_tau_run: 0,
        halted: false,
        verdict: Verdict::Ok,
    };
    let fail = |mut report: AuditReport, violation, at_step, detail: String| {
        report.verdict = Verdict::Violation {
            violation,
            at_step,
            detail: clip(detail),
        };
        report
    };

    let mut state = initial;
    let Some(mut high) = refinement.decompile(&state) else {
        return fail(
            report,
            ViolationKind::DecompileFailed,
            0,
            "initial state does not decompile".into(),
        );
    };
    let mut measure = machine.tau_measure(&state);
    let mut tau_run = 0;
    let mut run_budget = measure;
    // Recomputed only when the decompiled state changes.
    let mut source = refinement.source_step(&high);

    for index in 0..fuel {
        let Some((label, next)) = machine.step(&state) else {
            if source.is_some() {
                return fail(
                    report,
                    ViolationKind::ProgressFailed,
                    index,
                    format!("machine is stuck but the decompiled state reduces: {high:?}"),
                );
            }
            report.halted = true;
            return report;
        };
        let plain_source = matches!(source, Some(SourceStep::Plain(_)) | None);
        let shortcut = label == Label::Tau && plain_source && refinement.unchanged(&state, &next);
        let next_high = if shortcut {
            high.clone()
        } else {
            match refinement.decompile(&next) {
                Some(x) => x,
                None => {
                    return fail(
                        report,
                        ViolationKind::DecompileFailed,
                        index,
                        format!("{label} step leads to a state that does not decompile"),
                    );
                }
            }
        };
        let next_measure = machine.tau_measure(&next);

        match label {
            Label::Tau => {
                let preserved = match &source {
                    Some(SourceStep::Labeled(Label::Tau, expected)) => *expected == next_high,
                    Some(SourceStep::Labeled(Label::Beta, _)) => false,
                    Some(SourceStep::Plain(_)) | None => high == next_high,
                };
                if !preserved {
                    return fail(
                        report,
                        ViolationKind::SilentChanged,
                        index,
                        format!("τ step moved the decompiled state from {high:?} to {next_high:?}"),
                    );
                }
                if next_measure >= measure {
                    return fail(
                        report,
                        ViolationKind::TauBudgetExceeded,
                        index,
                        format!("τ-measure did not decrease ({measure} -> {next_measure})"),
                    );
                }
                tau_run += 1;
                if tau_run > run_budget {
                    return fail(
                        report,
                        ViolationKind::TauBudgetExceeded,
                        index,
                        format!("τ run of length {tau_run} exceeds its starting measure {run_budget}"),
                    );
                }
                report.tau_count += 1;
                report.max_tau_run = report.max_tau_run.max(tau_run);
            }
            Label::Beta => {
                let matched = match &source {
                    Some(SourceStep::Plain(expected)) | Some(SourceStep::Labeled(Label::Beta, expected)) => {
                        *expected == next_high
                    }
                    _ => false,
                };
                if !matched {
                    return fail(
                        report,
                        ViolationKind::BetaMismatch,
                        index,
                        format!(
                            "β step from {high:?} decompiles to {next_high:?}, source step gives {:?}",
                            source.as_ref().map(SourceStep::target)
                        ),
                    );
                }
                report.beta_count += 1;
                tau_run = 0;
                run_budget = next_measure;
            }
        }
        report.steps_checked += 1;
        state = next;
        measure = next_measure;
        if !(label == Label::Tau && plain_source) {
            high = next_high;
            source = refinement.source_step(&high);
        }
    }
    report.halted = machine.step(&state).is_none();
    report
}

/// Why a [`top_down_check`] failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopDownFailure {
    InitialMismatch,
    Halted { after_tau: usize },
    OutOfFuel,
    DecompileFailed,
    WrongLanding(String),
}

/// Checks that from `state` the machine performs τ steps followed by exactly
/// one β step landing on a state that decompiles to `target`.
///
/// Returns the number of τ steps taken before the β step.
pub fn top_down_check<M, R>(
    machine: &M,
    refinement: &R,
    state: M::State,
    target: &R::High,
    fuel: usize,
) -> Result<usize, TopDownFailure>
where
    M: Machine,
    R: Refinement<Low = M::State>,
{
    let Some(high) = refinement.decompile(&state) else {
        return Err(TopDownFailure::DecompileFailed);
    };
    if refinement.source_step(&high).as_ref().map(SourceStep::target) != Some(target) {
        return Err(TopDownFailure::InitialMismatch);
    }
    let mut state = state;
    for after_tau in 0..=fuel {
        match machine.step(&state) {
            None => return Err(TopDownFailure::Halted { after_tau }),
            Some((Label::Tau, next)) => state = next,
            Some((Label::Beta, landing)) => {
                return match refinement.decompile(&landing) {
                    Some(ref x) if x == target => Ok(after_tau),
                    Some(x) => Err(TopDownFailure::WrongLanding(clip(format!("{x:?}")))),
                    None => Err(TopDownFailure::DecompileFailed),
                };
            }
        }
    }
    Err(TopDownFailure::OutOfFuel)
}
