use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("step size underflow at t = {t}: the integrator stalled")]
    StepSizeUnderflow { t: f64 },

    #[error("Ermakov solution collapsed (alpha -> 0) at t = {t}")]
    ErmakovSingularity { t: f64 },

    #[error("|u| = {modulus:e} below breakdown threshold")]
    DivisionByZeroU { modulus: f64 },

    #[error("packet is not normalizable: Re(omega) = {re_omega}")]
    NonNormalizable { re_omega: f64 },

    #[error("inadmissible Wronskian W(0) = {re} + {im}i: i*W(0) must be real and positive")]
    InadmissibleWronskian { re: f64, im: f64 },

    #[error("Hermite degree {degree} exceeds maximum {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("expansion tail {tail:e} exceeds tolerance {tolerance:e}; raise n_max")]
    TailTooLarge { tail: f64, tolerance: f64 },

    #[error("grid too coarse: need at least {needed} points, got {got}")]
    GridTooCoarse { needed: usize, got: usize },

    #[error("wavefunction reached the box edge at t = {t} (|psi| = {amplitude:e}); enlarge the box")]
    BoundaryLeak { t: f64, amplitude: f64 },

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("invalid mass model: {0}")]
    InvalidMassModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable identifier used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::ErmakovSingularity { .. } => "ErmakovSingularity",
            Error::DivisionByZeroU { .. } => "DivisionByZeroU",
            Error::NonNormalizable { .. } => "NonNormalizable",
            Error::InadmissibleWronskian { .. } => "InadmissibleWronskian",
            Error::DegreeTooLarge { .. } => "DegreeTooLarge",
            Error::TailTooLarge { .. } => "TailTooLarge",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::BoundaryLeak { .. } => "BoundaryLeak",
            Error::GridMismatch => "GridMismatch",
            Error::InvalidMassModel(_) => "InvalidMassModel",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
