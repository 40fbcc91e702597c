use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {vertex} out of range for graph with {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },

    #[error("graph is not connected")]
    Disconnected,

    #[error("no simple {d}-regular graph on {n} vertices")]
    InfeasibleDegreeSequence { n: usize, d: usize },

    #[error("configuration model rejection budget exceeded after {attempts} attempts")]
    RejectionBudgetExceeded { attempts: usize },

    #[error("{what} did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("principal pair residual {residual:e} too large to deflate")]
    DeflationResidual { residual: f64 },

    #[error(
        "exactness window violated: depth {depth} + length {n} exceeds truncation radius {radius}"
    )]
    WindowViolation {
        depth: usize,
        n: usize,
        radius: usize,
    },

    #[error("kernel support does not match graph at vertex {vertex}")]
    KernelSupportMismatch { vertex: usize },

    #[error("kernel is not irreducible; no unique stationary measure")]
    NotIrreducible,

    #[error("t = {t} outside the domain of the Green function (limit {limit})")]
    BranchCut { t: f64, limit: f64 },

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidGraph(_)
                | Error::VertexOutOfRange { .. }
                | Error::Disconnected
                | Error::InfeasibleDegreeSequence { .. }
                | Error::WindowViolation { .. }
                | Error::KernelSupportMismatch { .. }
                | Error::BranchCut { .. }
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
