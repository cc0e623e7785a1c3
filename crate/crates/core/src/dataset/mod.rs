//! Training data preparation.
//!
//! Three datasets are produced, all as JSON lines using the tokenizer's wire
//! encoding:
//!
//! * pre-training: fixed-length windows with masked-token targets,
//! * note reduction: orchestra windows with per-token keep/discard labels,
//! * reduced-to-full: skyline melody+bass inputs paired with the full piano
//!   tokens of the same bars.

mod labels;
mod mlm;
mod r2f;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::QuantizeError;
use crate::tokenizer::{decode_token, encode_tokens, CpToken, JsonlError, RawToken};

pub use labels::{build_nr_dataset, label_keep, nr_token_stream, KeepLabel, NrRecord, NrStream};
pub use mlm::{apply_mlm_masking, build_pretrain_dataset, MaskedSequence, PretrainRecord, DEFAULT_MASK_PROB};
pub use r2f::{build_r2f_dataset, melody_and_bass, R2fDataset, R2fLimits, R2fRecord};

/// Length of every model input/output window.
pub const SEQUENCE_LEN: usize = 512;

/// Wire value for positions that carry no training target.
pub const IGNORE_ID: i64 = -100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("sequence content of {0} tokens exceeds {SEQUENCE_LEN}")]
    TooLong(usize),
    #[error("sequence has {0} slots, expected {SEQUENCE_LEN}")]
    WrongLength(usize),
    #[error("content token at {0} follows padding")]
    PadNotSuffix(usize),
    #[error("mask probability {0} outside [0, 1]")]
    InvalidMaskProb(f64),
    #[error("piece {id}: {source}")]
    Quantize {
        id: String,
        #[source]
        source: QuantizeError,
    },
}

/// Exactly [`SEQUENCE_LEN`] tokens, padding only as a suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<CpToken>,
}

impl TokenSequence {
    /// Pads `content` with ⟨PAD⟩ up to the window length.
    pub fn from_content(content: &[CpToken]) -> Result<Self, DatasetError> {
        if content.len() > SEQUENCE_LEN {
            return Err(DatasetError::TooLong(content.len()));
        }
        let mut tokens = content.to_vec();
        tokens.resize(SEQUENCE_LEN, CpToken::PAD);
        TokenSequence::from_tokens(tokens)
    }

    /// Validates a full window.
    pub fn from_tokens(tokens: Vec<CpToken>) -> Result<Self, DatasetError> {
        if tokens.len() != SEQUENCE_LEN {
            return Err(DatasetError::WrongLength(tokens.len()));
        }
        if let Some(first_pad) = tokens.iter().position(CpToken::is_pad) {
            if let Some(offset) = tokens[first_pad..].iter().position(|t| !t.is_pad()) {
                return Err(DatasetError::PadNotSuffix(first_pad + offset));
            }
        }
        Ok(TokenSequence { tokens })
    }

    pub fn tokens(&self) -> &[CpToken] {
        &self.tokens
    }

    /// Number of non-PAD tokens.
    pub fn content_len(&self) -> usize {
        self.tokens.iter().position(CpToken::is_pad).unwrap_or(SEQUENCE_LEN)
    }

    pub fn content(&self) -> &[CpToken] {
        &self.tokens[..self.content_len()]
    }

    pub fn attention_mask(&self) -> Vec<bool> {
        self.tokens.iter().map(|t| !t.is_pad()).collect()
    }

    pub fn encode(&self) -> Vec<[u16; 4]> {
        encode_tokens(&self.tokens)
    }

    pub(crate) fn decode(raw: &[RawToken]) -> Result<Self, String> {
        let tokens = raw
            .iter()
            .enumerate()
            .map(|(i, &r)| decode_token(r).map_err(|e| format!("token {i}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        TokenSequence::from_tokens(tokens).map_err(|e| e.to_string())
    }
}

/// One window cut from a piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub id: String,
    pub sequence: TokenSequence,
}

pub fn chunk_id(piece: &str, index: usize) -> String {
    format!("{piece}#{index}")
}

/// Cuts one piece's tokens into consecutive windows. The last window is
/// padded; pieces are never mixed and an empty piece yields nothing.
pub fn chunk_stream(piece: &str, tokens: &[CpToken]) -> Vec<Chunk> {
    tokens
        .chunks(SEQUENCE_LEN)
        .enumerate()
        .map(|(i, window)| Chunk {
            id: chunk_id(piece, i),
            sequence: TokenSequence::from_content(window).expect("window fits"),
        })
        .collect()
}

/// Chunks every piece in order.
pub fn build_pretrain_sequences<'a>(pieces: impl IntoIterator<Item = (&'a str, &'a [CpToken])>) -> Vec<Chunk> {
    pieces
        .into_iter()
        .flat_map(|(id, tokens)| chunk_stream(id, tokens))
        .collect()
}

pub(crate) fn ignore_token() -> [i64; 4] {
    [IGNORE_ID; 4]
}

/// Counts recorded next to every emitted dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask_prob: Option<f64>,
    pub pieces: usize,
    pub records: usize,
    pub discarded: BTreeMap<String, usize>,
    pub vocab: String,
}

pub(crate) fn wire_error(line: usize, message: impl Into<String>) -> JsonlError {
    JsonlError {
        line,
        message: message.into(),
    }
}
