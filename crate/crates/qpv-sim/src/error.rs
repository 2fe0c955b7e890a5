use thiserror::Error;

use crate::optics::Detector;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric field lies outside its admissible range.
    #[error("value for `{key}` out of range: {value} (expected {expected})")]
    OutOfRange {
        key: String,
        value: f64,
        expected: &'static str,
    },

    /// The configuration document could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// A polarization state failed the normalization precondition.
    #[error("polarization state is not normalized: |amplitudes|^2 sums to {norm}")]
    NotNormalized { norm: f64 },

    /// g2 too large for the two-photon truncated source model.
    #[error("g2 = {0} is outside the supported regime [0, 0.5]; the two-photon probability equation 2p/(1+p)^2 = g2 has no solution with p in [0, 1]")]
    UnsupportedRegime(f64),

    /// Normalized coincidences need strictly positive singles counts.
    #[error("cannot normalize coincidences: singles count for detector {0} is zero")]
    ZeroSingles(Detector),

    /// HOM visibility needs a nonzero orthogonal correlation as denominator.
    #[error("g2_perp must be positive to form the visibility ratio")]
    ZeroPerpendicularCorrelation,

    /// Protocol rounds need at least one enabled basis.
    #[error("enabled basis set is empty")]
    EmptyBasisSet,

    /// The analytic LOCC bound covers 1..=3 mutually unbiased bases.
    #[error("LOCC bound is defined for 1..=3 mutually unbiased bases, got {0}")]
    BasisCountOutOfRange(usize),

    /// Unknown attacker strategy name.
    #[error("unknown strategy `{name}`; available: {available}")]
    UnknownStrategy { name: String, available: String },

    /// A CSV document failed to parse.
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
