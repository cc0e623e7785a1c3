//! Applying model outputs: keep masks for note reduction and the
//! token-by-token decoding loop for reduced-to-full generation.

mod decode;
mod keep;

use thiserror::Error;

pub use decode::{
    decode_r2f, generated_len, parse_r2f_inputs, r2f_to_score, FnPredictor, Predictor, ReplayPredictor,
    ScriptedPredictor,
};
pub use keep::{apply_keep_mask, apply_to_stream, parse_keep_masks, KeepMask, DEFAULT_CUTOFF};

use crate::score::QuantizeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("input holds {tokens} tokens, at most {max} allowed")]
    InputTooLong { tokens: usize, max: usize },
    #[error("predictor failed at round {round}: {message}")]
    Predictor { round: usize, message: String },
    #[error("cutoff {0} outside (0, 1)")]
    InvalidCutoff(f64),
    #[error("no keep mask for window {0}")]
    MissingMask(String),
    #[error("keep mask {0} matches no window of this score")]
    UnknownMask(String),
    #[error("keep mask {0} appears twice")]
    DuplicateMask(String),
    #[error("keep mask {id} has {len} probabilities")]
    MaskLength { id: String, len: usize },
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
}
