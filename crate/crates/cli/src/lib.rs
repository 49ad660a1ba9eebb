//! Document formats and command implementations behind the `incentix` binary.
//!
//! Every command returns an [`Outcome`] instead of printing, so the binary is a
//! thin shell and tests can drive commands in-process.

pub mod commands;
pub mod document;

pub use commands::{run, Outcome, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_WARNINGS};
pub use document::{emit_graph, parse_graph, CertificateDocument, DocumentError, GraphDocument};
