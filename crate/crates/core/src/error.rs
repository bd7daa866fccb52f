use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("inactive node {node}: {reason}")]
    InactiveNode { node: usize, reason: String },

    #[error("singular capacitance matrix (inactive node / floating island): {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("{what} = {value} lies outside the sampled domain [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("evaluation at a pole of H(s): s = {re} + {im}i")]
    AtPole { re: f64, im: f64 },

    #[error("contour crosses pole: sigma = {sigma} must exceed max Re(pole) = {max_re}")]
    ContourCrossesPole { sigma: f64, max_re: f64 },

    #[error("improper rational function (degree {num} / {den}): response contains distributions; split off the polynomial part")]
    Improper { num: usize, den: usize },

    #[error("repeated poles (separation {separation:e}); partial fractions need simple poles")]
    RepeatedPoles { separation: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("echo window violated: t_max = {t_max} needs line length > {min_length} (got {length})")]
    EchoWindow {
        t_max: f64,
        length: f64,
        min_length: f64,
    },

    #[error("integration unstable: relative energy drift {drift:e} exceeds {limit:e}; use a smaller dt")]
    Unstable { drift: f64, limit: f64 },

    #[error("commutator checks require linear dynamics (circuit contains Josephson junctions)")]
    Nonlinear,

    #[error("noise-free flag not set: vacuum-noise injection from e0 is not modelled")]
    NoiseTermOutOfScope,

    #[error("inadmissible source: {0}")]
    InvalidSource(String),

    #[error("signal is identically zero")]
    ZeroSignal,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
