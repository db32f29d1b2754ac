use thiserror::Error;

/// Errors produced by pitman-core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A size limit that bounds runtime or memory was exceeded.
    #[error("{what}: n = {n} exceeds the cap of {cap}{hint}")]
    CapExceeded {
        what: &'static str,
        n: u64,
        cap: u64,
        hint: &'static str,
    },

    /// Exact evaluation was requested for a quantity that is not rational.
    #[error("{0} is not representable as a rational number")]
    NotRational(String),

    /// A floating evaluation did not stabilise before the precision ceiling.
    #[error("{context}: result not stable up to {bits} bits of precision")]
    PrecisionExhausted { context: String, bits: u32 },

    /// A series or iteration failed to converge within its term budget.
    #[error("{context}: no convergence after {terms} terms")]
    NonConvergent { context: String, terms: usize },

    /// A regime or study configuration is infeasible.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// Malformed textual input.
    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PrecisionExhausted { .. } | Error::NonConvergent { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
