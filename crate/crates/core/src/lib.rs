//! A call-by-value λ-calculus and a chain of abstract machines that
//! implement it, each related to the level above by an audited refinement.

pub mod closure_machine;
pub mod code_store;
pub mod fixtures;
pub mod framework;
pub mod gen;
pub mod heap_machine;
pub mod heap_store;
pub mod programs;
pub mod stack;
pub mod stack_machine;
pub mod terms;

pub use closure_machine::{Clo, CloState, ClosureMachine, ClosureToStack, Env};
pub use code_store::{CodeStore, Com, ListCode};
pub use framework::{audit_refinement, AuditReport, EvalResult, Label, Machine, Refinement, Verdict, ViolationKind};
pub use heap_machine::{load, HeapMachine, HeapState, HeapToClosure};
pub use heap_store::{HeapClosure, HeapStore, ListHeap};
pub use programs::Pro;
pub use stack::Stack;
pub use stack_machine::{StackMachine, StackState, StackToTerm};
pub use terms::{Calculus, Term};
