use thiserror::Error;

#[derive(Debug, Error)]
pub enum HessdiscError {
    #[error("sparse matrix index out of range: ({row}, {col}) for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("matrix is numerically singular: pivot {pivot:.3e} in row {row}")]
    Singular { row: usize, pivot: f64 },
    #[error("matrix must be square, got {n_rows}x{n_cols}")]
    NotSquare { n_rows: usize, n_cols: usize },
    #[error("SPD-flagged matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {defect:.3e}")]
    NotSymmetric { row: usize, col: usize, defect: f64 },
    #[error("block dimensions are not conformable: {0}")]
    BlockShape(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("mesh connectivity is invalid: {0}")]
    MeshInvalid(String),
    #[error("mesh is not Delta-adapted: {0}")]
    NotDeltaAdapted(String),
    #[error("mesh refinement unsupported: {0}")]
    RefineUnsupported(String),
    #[error("scheme requires {0}")]
    SchemeMeshMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigenvalue iteration did not converge within {0} iterations")]
    EigNonConvergence(usize),
    #[error("active set cycling: no fixed point after {iterations} PDAS iterations")]
    PdasNonConvergence {
        iterations: usize,
        history: Vec<(usize, usize)>,
    },
    #[error("root solve failed: {0}")]
    RootSolve(String),
    #[error("zero denominator in relative error for {0}")]
    ZeroDenominator(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HessdiscError>;
