use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-manifold input: face {face:?} is shared by {count} tetrahedra")]
    NonManifold { face: [usize; 3], count: usize },

    #[error("unsupported quadrature degree {degree} for {cell} (maximum {max})")]
    UnsupportedDegree {
        cell: &'static str,
        degree: usize,
        max: usize,
    },

    #[error("singular affine map (det = {0:e})")]
    SingularMap(f64),

    #[error("degenerate tetrahedron {tet} (det J = {det:e})")]
    DegenerateTet { tet: usize, det: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("inner solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    InnerNotConverged { iterations: usize, residual: f64 },

    #[error("outer Uzawa iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    OuterNotConverged { iterations: usize, residual: f64 },

    #[error("stiffness matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("eigenvalue iteration did not converge after {0} steps")]
    EigenNotConverged(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
