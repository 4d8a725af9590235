use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MllError {
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("table error: {0}")]
    Table(String),
    #[error("invalid marginal sequence: {0}")]
    Sequence(String),
    #[error("non-positive cell or lumped cell in {0}")]
    Positivity(String),
    #[error("effect {0} is not housed in the parameterization")]
    UnknownEffect(String),
    #[error("no distribution reproduces the requested parameters: {0}")]
    Nonexistence(String),
    #[error("model compilation failed: {0}")]
    Compile(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MllError>;
