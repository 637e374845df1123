use thiserror::Error;

/// Errors raised by samplers, splitting laws and metric computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("cannot glue an empty list of trees")]
    EmptyGlue,

    #[error("tree has no leaf")]
    Leafless,

    #[error("size {size} exceeds the limit {limit} for {what}")]
    SizeCap {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("impossible conditioning: {0}")]
    ImpossibleConditioning(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("invalid family spec: {0}")]
    FamilySpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
