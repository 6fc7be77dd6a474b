use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown provider {id} (scenario has {count})")]
    UnknownProvider { id: usize, count: usize },

    #[error("coalition must contain at least one provider")]
    EmptyCoalition,

    #[error("coalition bitmask {coalition:#b} references providers outside 0..{providers}")]
    CoalitionOutOfRange { coalition: u32, providers: usize },

    #[error("provider {provider} is not a member of the coalition")]
    NotInCoalition { provider: usize },

    #[error("{axis} dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { axis: &'static str, expected: usize, found: usize },

    #[error("cross utility needs distinct host and guest (both were {0})")]
    SameHostAndGuest(usize),

    #[error("provider {0} has no native applications")]
    NoApplications(usize),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("scenario has {providers} providers, above the enumeration cap of {cap}; raise max_n explicitly to override")]
    TooManyPlayers { providers: usize, cap: usize },

    #[error("coalition table is missing coalition {0}")]
    IncompleteTable(String),

    #[error("oracle instance too large: {reason}")]
    OracleTooLarge { reason: String },

    #[error("oracle grid contains no individually rational point; refine the step")]
    OracleNoRationalPoint,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid generator configuration: {0}")]
    InvalidGenerator(String),

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("scenario file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("table parse error: {0}")]
    TableParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
