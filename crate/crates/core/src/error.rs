use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angular momentum arguments: {0}")]
    InvalidAngularMomentum(String),

    #[error("invalid hyperfine state {term} F={f} mF={m}")]
    InvalidState { term: &'static str, f: i32, m: i32 },

    #[error("manifolds {lower} and {upper} are not dipole connected")]
    NotConnected { lower: String, upper: String },

    #[error("laser `{label}` does not drive the {lower}-{upper} line")]
    LaserMismatch { label: String, lower: String, upper: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("propagation failed: {0}")]
    Propagation(String),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds {target:e}")]
    Quadrature { estimate: f64, target: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
