use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown molecule preset `{0}` (known: K2, HCl, HI, NO)")]
    UnknownMolecule(String),

    #[error("vibrational level {nu} does not exist (nu_max = {nu_max})")]
    LevelOutOfRange { nu: u32, nu_max: u32 },

    #[error(
        "steady state did not converge after {iterations} iterations (defect {defect:.3e}); \
         the drive may be inside a bistable region"
    )]
    NonConvergence { iterations: usize, defect: f64 },

    #[error("zero denominator in {0}")]
    ZeroDivision(&'static str),

    #[error("cavity amplitude is not real after phase rotation (Im alpha_s = {0:.3e})")]
    PhaseConvention(f64),

    #[error("system is not asymptotically stable (max Re lambda = {max_re_eig:.3e})")]
    Unstable { max_re_eig: f64 },

    #[error("marginally stable system: {0}")]
    Marginal(String),

    #[error("eigenvalue solver failed to converge")]
    EigenSolver,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("response frequency must be nonzero")]
    ZeroFrequency,

    #[error("effective-frequency radicand is negative ({0:.6e}); the value leaves the real axis")]
    NegativeRadicand(f64),

    #[error("stochastic integration aborted: {0}")]
    Sde(String),

    #[error("ODE step size underflow at t = {t:.6e}")]
    StepUnderflow { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::UnknownMolecule(_)
            | Error::Io(_)
            | Error::Json(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
