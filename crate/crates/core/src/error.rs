use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration value.
    #[error("domain error: {0}")]
    Domain(String),

    /// The truncation radius required for the requested tail bound exceeds
    /// the configured cap; alpha is too small for `max_shell_radius`.
    #[error("truncation radius {required:.3} exceeds cap {cap:.3}; alpha too small for the configured cap")]
    Truncation { required: f64, cap: f64 },

    /// A functional evaluation produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The analytic Fisher matrix is singular; the configuration carries no
    /// decodable information.
    #[error("singular Fisher matrix: unidentifiable configuration")]
    SingularFisher,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit status for the CLI: 2 for validation errors, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::Truncation { .. } | Error::Evaluation(_) | Error::SingularFisher => 3,
        }
    }
}
