//! JSON-lines exchange format shared with the training side.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vocab::{Special, REGULAR_SIZES, SPECIAL_COUNT};
use super::{CpToken, NoteToken};

/// A token as it appears on the wire.
pub type RawToken = [i64; 4];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct JsonlError {
    pub line: usize,
    pub message: String,
}

/// Parses one JSON value per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| JsonlError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn encode_tokens(tokens: &[CpToken]) -> Vec<[u16; 4]> {
    tokens.iter().map(CpToken::encode).collect()
}

/// Decodes four ids into a token. A special must use its reserved slot in
/// all four dimensions; a note must be in the regular range everywhere.
pub fn decode_token(raw: RawToken) -> Result<CpToken, String> {
    let in_regular = raw
        .iter()
        .zip(REGULAR_SIZES)
        .all(|(&v, size)| (0..i64::from(size)).contains(&v));
    if in_regular {
        return Ok(CpToken::Note(NoteToken {
            same_bar: raw[0] == 1,
            position: raw[1] as u8,
            pitch: raw[2] as u8,
            duration: raw[3] as u8,
        }));
    }
    let slot = raw[0] - i64::from(REGULAR_SIZES[0]);
    if (0..i64::from(SPECIAL_COUNT)).contains(&slot) {
        let special = Special::from_slot(slot as u16).expect("slot in range");
        let expected: [i64; 4] = std::array::from_fn(|d| i64::from(special.id_in(d)));
        if raw == expected {
            return Ok(CpToken::Special(special));
        }
    }
    Err(format!("{raw:?} is not a valid token"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRecord {
    pub id: String,
    pub tokens: Vec<CpToken>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord<T> {
    id: String,
    tokens: Vec<T>,
}

pub fn parse_token_records(text: &str) -> Result<Vec<TokenRecord>, JsonlError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| JsonlError { line: i + 1, message };
        let wire: WireRecord<RawToken> = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let tokens = wire
            .tokens
            .into_iter()
            .enumerate()
            .map(|(k, raw)| decode_token(raw).map_err(|m| err(format!("token {k}: {m}"))))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(TokenRecord { id: wire.id, tokens });
    }
    Ok(records)
}

pub fn write_token_records<'a>(records: impl IntoIterator<Item = &'a TokenRecord>) -> String {
    let mut out = String::new();
    for record in records {
        let wire = WireRecord {
            id: record.id.clone(),
            tokens: encode_tokens(&record.tokens),
        };
        out.push_str(&serde_json::to_string(&wire).expect("token record serializes"));
        out.push('\n');
    }
    out
}
