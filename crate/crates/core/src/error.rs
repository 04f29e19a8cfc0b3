use thiserror::Error;

/// Errors raised by mesh construction, the solvers and the diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("field has {got} values but the mesh has {expected} nodes")]
    FieldLength { expected: usize, got: usize },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("conjugate gradient stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is singular at pivot {0}")]
    SingularMatrix(usize),

    #[error("unknown flux `{0}` (expected burgers, linear or polynomial)")]
    UnknownFlux(String),

    #[error("invalid flux parameters: {0}")]
    FluxParams(String),

    #[error("jacobian {index} is {rows}x{cols}, expected {dim}x{dim}")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },

    #[error("step denominator {0:e} vanishes; the linearized defect is zero")]
    ZeroDenominator(f64),

    #[error("newton iteration diverged after {iterations} steps (residual {residual:e}); retry with continuation from a larger epsilon")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("flux is not convex on [{lo}, {hi}]")]
    NonConvexFlux { lo: f64, hi: f64 },

    #[error("cfl violation: {0}")]
    Cfl(String),

    #[error("iterate sequence is empty")]
    EmptySequence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
