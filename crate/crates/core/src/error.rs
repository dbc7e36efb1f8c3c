use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("invalid price {input:?}: {reason}")]
    Price { input: String, reason: &'static str },

    #[error("index series: {0}")]
    Index(String),

    #[error("data integrity: {0}")]
    Integrity(String),

    #[error("date {0} is outside the market calendar")]
    OutsideCalendar(NaiveDate),

    #[error("market calendar: {0}")]
    Calendar(String),

    #[error("degenerate response: y is constant")]
    DegenerateResponse,

    #[error("glm: {0}")]
    Glm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
