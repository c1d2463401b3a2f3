use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("microphones of a pair coincide")]
    DegeneratePair,
    #[error("far-field scenario needs min_rho > 1, got {0}")]
    InvalidRho(f64),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    SampleRateMismatch(f64, f64),
    #[error("no DFT bin falls inside [{lo}, {hi}] rad/s")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("grid has no points")]
    EmptyGrid,
    #[error("position ({0}, {1}, {2}) is outside the room")]
    PositionOutsideRoom(f64, f64, f64),
    #[error("absorption coefficient {0} is not below 1; room too small for the requested RT60")]
    AbsorptionOutOfRange(f64),
    #[error("energy decay curve never reaches -35 dB")]
    InsufficientDecay,
    #[error("sample is empty")]
    EmptySample,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
