use std::fmt;

use gdantzig::DantzigError;

/// Failure classes with fixed exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, malformed input or an invalid configuration (exit 2).
    Usage(String),
    /// The solver could not produce an answer (exit 3).
    Solver(String),
    /// The program has no feasible point (exit 4).
    Infeasible(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Infeasible(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Solver(m) | Failure::Infeasible(m) => f.write_str(m),
        }
    }
}

impl From<DantzigError> for Failure {
    fn from(e: DantzigError) -> Self {
        let msg = e.to_string();
        match e {
            DantzigError::Lp(_) => Failure::Solver(msg),
            DantzigError::Infeasible { .. } | DantzigError::NoFeasibleIterate { .. } => Failure::Infeasible(msg),
            _ => Failure::Usage(msg),
        }
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

pub fn io_error(path: &std::path::Path, e: impl fmt::Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}
