use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis mismatch: n_cap {left} vs {right}")]
    BasisMismatch { left: usize, right: usize },

    #[error("(2j, 2m) = ({twice_j}, {twice_m}) is not a valid angular-momentum label")]
    InvalidJm { twice_j: u32, twice_m: i32 },

    #[error("state norm {norm_sqr:e} is too small to normalize")]
    DegenerateState { norm_sqr: f64 },

    #[error("non-finite amplitude at index {index}")]
    NonFinite { index: usize },

    #[error("truncation deficit {deficit:e} exceeds epsilon {epsilon:e}; raise the cutoff")]
    TruncationDeficit { deficit: f64, epsilon: f64 },

    #[error("mode matrix is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter regime violated: {0}")]
    RegimeViolation(String),

    #[error("grid index {index} out of range for a central difference on {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("phase grid is not strictly ascending with uniform step")]
    NonUniformGrid,

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("post-selection on total photon number {total} kept no events")]
    FilterExhausted { total: usize },

    #[error("Fisher information {f_q:e} carries no phase information")]
    NoInformation { f_q: f64 },
}

impl Error {
    /// True for failures that come out of the numerics rather than from bad
    /// user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateState { .. }
                | Error::NonFinite { .. }
                | Error::TruncationDeficit { .. }
                | Error::FilterExhausted { .. }
                | Error::NoInformation { .. }
                | Error::EmptyHistogram
        )
    }
}
