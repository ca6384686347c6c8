use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension {0} exceeds the three-qubit limit")]
    DimensionOverflow(usize),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian (max |M - M†| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("unsupported resource family for closed form: {0}")]
    UnsupportedFamily(String),

    #[error("fidelity is not monotone in the sharpness parameter ({0})")]
    NonMonotone(String),

    #[error("reusability number {0} is never attained in the scan range")]
    MrnNotAttained(usize),

    #[error("round limit of {0} exceeded")]
    RoundLimit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
