use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown game id `{0}` (expected paddle, invaders or climber)")]
    UnknownGame(String),
    #[error("action {action} out of range for a {count}-action cartridge")]
    InvalidAction { action: u8, count: usize },
    #[error("RAM address {0} out of range (0..128)")]
    AddressOutOfRange(usize),
    #[error("saved state belongs to `{found}`, console runs `{expected}`")]
    CartridgeMismatch { expected: String, found: String },
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode has terminated; call reset first")]
    EpisodeTerminated,
    #[error("empty episode: no frames to aggregate")]
    EmptyEpisode,
    #[error("row {index}, column {column}: {message}")]
    Parse {
        index: String,
        column: String,
        message: String,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
