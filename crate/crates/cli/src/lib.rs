//! Parsing, running, tracing and fuzzing front end for `lam-core`.

pub mod driver;
pub mod syntax;
pub mod trace;
