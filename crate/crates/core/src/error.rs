use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset has no records")]
    EmptyDataset,

    #[error("record {0} has a non-positive or non-finite time")]
    NonPositiveTime(usize),

    #[error("dataset has no observed events")]
    NoEvents,

    #[error("risk table counts increase from {prev} to {next} at time {time}")]
    InconsistentRiskTable { time: f64, prev: u64, next: u64 },

    #[error("digitized coordinates cannot be repaired: {0}")]
    IrreparableCoords(String),

    #[error("invalid risk table: {0}")]
    InvalidRiskTable(String),

    #[error("survival probability {0} is not a valid quantile level")]
    DegenerateU(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("subgroup {id}: {source}")]
    Subgroup {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable name of the variant, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyDataset => "EmptyDataset",
            Error::NonPositiveTime(_) => "NonPositiveTime",
            Error::NoEvents => "NoEvents",
            Error::InconsistentRiskTable { .. } => "InconsistentRiskTable",
            Error::IrreparableCoords(_) => "IrreparableCoords",
            Error::InvalidRiskTable(_) => "InvalidRiskTable",
            Error::DegenerateU(_) => "DegenerateU",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Subgroup { source, .. } => source.kind(),
            Error::Parse { .. } => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}
