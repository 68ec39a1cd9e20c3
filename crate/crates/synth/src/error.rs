use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("synth params: {0}")]
    Params(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] rppg_core::Error),
    #[error(transparent)]
    Dsp(#[from] rppg_dsp::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
