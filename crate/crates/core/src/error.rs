use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate contact: bumper gap {0} m is not positive")]
    DegenerateContact(f64),
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(u32),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("{name} must be finite, got {value}")))
    }
}
