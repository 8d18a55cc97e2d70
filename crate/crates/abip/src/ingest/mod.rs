//! Instance acquisition: MPS files, random instances with planted
//! solutions, and sparse-inverse-covariance estimation subproblem LPs.

mod mps;
mod random;
mod sice;

pub use mps::{parse_mps, write_mps};
pub use random::{generate_random_lp, RandomLpInstance};
pub use sice::{build_sice_lp, sice_lambda, SiceSpec};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

impl IngestError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        IngestError::Parse { line, msg: msg.into() }
    }
}
