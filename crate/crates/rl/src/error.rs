use hgrl_core::CoreError;
use hgrl_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged at episode {episode}, tick {tick}: {what} = {value}")]
    Divergence { episode: usize, tick: u64, what: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, RlError>;
