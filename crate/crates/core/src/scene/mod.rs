//! File formats: chain documents, pose scripts, and trajectory CSV output.

mod chain_file;
mod script;
mod trajectory;

use thiserror::Error;

use crate::chain::ChainError;

pub use chain_file::{parse_chain_file, serialize_chain};
pub use script::{parse_script, Command, PoseScript, ScriptCommand};
pub use trajectory::{
    format_number, run_script, AssertionFailure, RunError, ScriptRun, TrajectoryRow,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: `{verb}` takes {expected} argument(s), found {found}")]
    Arity {
        line: usize,
        verb: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid chain: {0}")]
    Validation(#[from] ChainError),
}
