use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FepError {
    #[error("invalid configuration string: {0}")]
    Parse(String),
    #[error("particle count {k} outside the admissible range for N = {n}: {reason}")]
    ParticleCount { n: usize, k: usize, reason: &'static str },
    #[error("local window is not ergodic (adjacent holes)")]
    NonErgodicWindow,
    #[error("size {n} exceeds the exact enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("density {rho} outside the admissible range {range}")]
    Density { rho: f64, range: &'static str },
    #[error("no move has positive rate (frozen configuration)")]
    Frozen,
    #[error("the full configuration has no empty site to anchor the zero-range map")]
    FullConfiguration,
    #[error("window length {ell} must be smaller than the torus size {k}")]
    WindowTooLarge { ell: usize, k: usize },
    #[error("initial configuration is not in A_l(delta): {0}")]
    NotInRegularSet(String),
    #[error("time step {dt} violates the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },
    #[error("density left (1/2, 1] at cell {cell}: {value}")]
    OutOfRange { cell: usize, value: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FepError>;
