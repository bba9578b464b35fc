use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("stream order violated: id {id} arrived after id {last}")]
    StreamOrder { last: u64, id: u64 },

    #[error("column `{column}`: value {value} outside declared range [{lower}, {upper})")]
    Range {
        column: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = MonitorError> = std::result::Result<T, E>;
