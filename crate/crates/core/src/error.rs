use alloc::string::String;

/// Errors raised by the core operations.
///
/// Variants map onto the exit-code families used by the CLI: `Domain` and
/// `Config` are caller mistakes, `Data` is malformed input, `Optimizer` and
/// `JudgeProtocol` come from a run in progress.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data violates an invariant (missing label, bad record, ...).
    #[error("data error: {0}")]
    Data(String),
    /// A configuration field is invalid. `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    /// A policy update produced a non-finite gradient.
    #[error("optimizer error in group {group}: {message}")]
    Optimizer { group: usize, message: String },
    /// A judge backend answered something other than Yes/No.
    #[error("judge protocol error: unexpected verdict {0:?}")]
    JudgeProtocol(String),
    /// No question survived the curriculum filter.
    #[error("curriculum mix is empty")]
    EmptyCurriculum,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
