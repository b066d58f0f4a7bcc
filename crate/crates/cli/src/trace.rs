//! The JSON trace format.

use lam_core::{AuditReport, Label, ListCode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// `l`, `stack`, `closure` or `heap`.
    pub machine: String,
    pub fuel: usize,
    /// The code heap-machine states refer to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<ListCode>,
    /// Present when the run was audited.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audits: Vec<AuditEntry>,
    pub initial: Snapshot,
    pub records: Vec<TraceRecord>,
    pub result: TraceResult,
}

/// A state, rendered and in machine-readable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub rendering: String,
    pub state: serde_json::Value,
    /// The L term the state decompiles to.
    pub decompiled: Option<String>,
    /// The state one level up, for machines below the stack machine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub higher: Option<String>,
}

/// Step `step_index` and the state it leads to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step_index: usize,
    pub label: Label,
    #[serde(flatten)]
    pub snapshot: Snapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Normal,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceResult {
    pub kind: ResultKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_form: Option<String>,
    pub beta_count: usize,
    pub tau_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Such as `heap → closure`.
    pub refinement: String,
    pub report: AuditReport,
}

/// Reads a trace without serde_json's nesting limit; states of long runs nest
/// deeply, so call this on a thread with a large stack.
pub fn read_trace(reader: impl std::io::Read) -> serde_json::Result<Trace> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    de.disable_recursion_limit();
    let trace = Trace::deserialize(&mut de)?;
    de.end()?;
    Ok(trace)
}
