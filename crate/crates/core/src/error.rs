use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported modulation: {0}")]
    UnsupportedModulation(String),
    #[error("symbol {symbol} out of range for a {order}-point constellation")]
    SymbolOutOfRange { symbol: usize, order: usize },
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("malformed generator matrix: {0}")]
    MalformedGenerator(String),
    #[error("bit sequence length {len} is not a multiple of k = {k}")]
    BitLengthNotMultiple { len: usize, k: usize },
    #[error("code is catastrophic")]
    Catastrophic,
    #[error("code is not equiprobable")]
    NonEquiprobable,
    #[error("distance computation exceeded {0} sweeps")]
    IterationCap(usize),
    #[error("modulation has {points} points but code emits {outputs} symbols")]
    ModulationMismatch { points: usize, outputs: usize },
    #[error("coding gain needs a positive distance, got {0}")]
    NonPositiveDistance(f64),
    #[error("search space of 2^{bits} codes exceeds the cap of 2^{cap}")]
    SearchSpaceTooLarge { bits: u32, cap: u32 },
    #[error("no valid code found in {0} trials")]
    NoValidCode(u64),
    #[error("empty input")]
    EmptyInput,
    #[error("block size {0} is not prime")]
    NotPrime(u64),
    #[error("block length {got} does not match interleaver size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid sweep configuration: {0}")]
    InvalidSweep(String),
    #[error("unknown mcs id {0}")]
    UnknownMcs(u8),
    #[error("payload of {0} bits exceeds the 16-bit length field")]
    PayloadTooLong(usize),
    #[error("preamble not found")]
    PreambleNotFound,
    #[error("header authentication failed")]
    AuthenticationFailed,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("malformed catalog line {line}: {reason}")]
    MalformedCatalog { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable snake_case identifier for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnsupportedModulation(_) => "unsupported_modulation",
            Error::SymbolOutOfRange { .. } => "symbol_out_of_range",
            Error::InvalidCode(_) => "invalid_code",
            Error::MalformedGenerator(_) => "malformed_generator",
            Error::BitLengthNotMultiple { .. } => "bit_length_not_multiple",
            Error::Catastrophic => "catastrophic",
            Error::NonEquiprobable => "non_equiprobable",
            Error::IterationCap(_) => "iteration_cap",
            Error::ModulationMismatch { .. } => "modulation_mismatch",
            Error::NonPositiveDistance(_) => "non_positive_distance",
            Error::SearchSpaceTooLarge { .. } => "search_space_too_large",
            Error::NoValidCode(_) => "no_valid_code",
            Error::EmptyInput => "empty_input",
            Error::NotPrime(_) => "not_prime",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidSweep(_) => "invalid_sweep",
            Error::UnknownMcs(_) => "unknown_mcs",
            Error::PayloadTooLong(_) => "payload_too_long",
            Error::PreambleNotFound => "preamble_not_found",
            Error::AuthenticationFailed => "authentication_failed",
            Error::MalformedFrame(_) => "malformed_frame",
            Error::MalformedCatalog { .. } => "malformed_catalog",
        }
    }
}
