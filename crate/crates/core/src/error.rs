use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "codebook with {bits} bits is too large for explicit RVQ (limit {limit}); use cell-approximation sampling"
    )]
    Capacity { bits: u32, limit: u32 },

    #[error("direction matrix is numerically rank deficient (condition number {condition:.3e})")]
    NumericalRank { condition: f64 },

    #[error("quadrature did not converge: estimate {value:.6e}, achieved error {achieved:.3e} after {subdivisions} subdivisions")]
    Quadrature {
        value: f64,
        achieved: f64,
        subdivisions: usize,
    },

    #[error("I3 pole at b = 1 (b = {b}); use I2(a, 1, m + 1)")]
    DegeneratePole { b: f64 },

    #[error("non-finite rate at {snr_db} dB: {detail}")]
    NonFinite { snr_db: f64, detail: String },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
