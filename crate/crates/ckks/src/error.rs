use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("vector of length {len} exceeds slot count {slots}")]
    SlotOverflow { len: usize, slots: usize },
    #[error("non-finite input at index {index}")]
    NonFiniteInput { index: usize },
    #[error("key or operand was produced under different parameters")]
    KeyParamsMismatch,
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: f64, right: f64 },
    #[error("no levels remaining (need {needed}, have {available})")]
    NoLevelsRemaining { needed: usize, available: usize },
    #[error("missing rotation key for step {0}")]
    MissingRotationKey(usize),
    #[error("level {level} outside modulus chain (max {max})")]
    InvalidLevel { level: usize, max: usize },
    #[error("invalid scale {0}")]
    InvalidScale(f64),
    #[error("malformed encoding: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, HeError>;
