use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::BridgeError;
use crate::dataset::{chunk_id, nr_token_stream, NrStream, SEQUENCE_LEN};
use crate::score::{Bar, QuantizedScore, Score};
use crate::tokenizer::{parse_jsonl, JsonlError};

pub const DEFAULT_CUTOFF: f64 = 0.5;

/// Keep probabilities for one note-reduction window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeepMask {
    pub id: String,
    pub keep: Vec<f64>,
}

/// Parses keep-mask lines, checking window length and probability range.
pub fn parse_keep_masks(text: &str) -> Result<Vec<KeepMask>, JsonlError> {
    let masks: Vec<KeepMask> = parse_jsonl(text)?;
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    for (mask, line) in masks.iter().zip(lines) {
        let err = |message: String| JsonlError { line, message };
        if mask.keep.len() != SEQUENCE_LEN {
            return Err(err(format!(
                "{} probabilities, expected {SEQUENCE_LEN}",
                mask.keep.len()
            )));
        }
        if let Some((i, p)) = mask.keep.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(err(format!("probability {p} at {i} outside [0, 1]")));
        }
    }
    Ok(masks)
}

/// Keeps the orchestra notes whose window probability reaches `cutoff`.
/// Windows are regenerated from the score exactly as the note-reduction
/// dataset cuts them, under the piece id `piece`; every window needs a mask
/// and every mask a window. Empty bars survive as empty bars.
pub fn apply_keep_mask(
    orchestra: &Score,
    piece: &str,
    masks: &[KeepMask],
    cutoff: f64,
) -> Result<QuantizedScore, BridgeError> {
    let stream = nr_token_stream(orchestra)?;
    apply_to_stream(&stream, piece, masks, cutoff)
}

pub fn apply_to_stream(
    stream: &NrStream,
    piece: &str,
    masks: &[KeepMask],
    cutoff: f64,
) -> Result<QuantizedScore, BridgeError> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(BridgeError::InvalidCutoff(cutoff));
    }
    let mut by_id: HashMap<&str, &KeepMask> = HashMap::new();
    for mask in masks {
        if mask.keep.len() != SEQUENCE_LEN {
            return Err(BridgeError::MaskLength {
                id: mask.id.clone(),
                len: mask.keep.len(),
            });
        }
        if by_id.insert(&mask.id, mask).is_some() {
            return Err(BridgeError::DuplicateMask(mask.id.clone()));
        }
    }
    let windows = stream.tokens.len().div_ceil(SEQUENCE_LEN);
    let mut probs = Vec::with_capacity(stream.tokens.len());
    for k in 0..windows {
        let id = chunk_id(piece, k);
        let mask = by_id.remove(id.as_str()).ok_or(BridgeError::MissingMask(id))?;
        probs.extend_from_slice(&mask.keep);
    }
    if let Some(extra) = masks.iter().find(|m| by_id.contains_key(m.id.as_str())) {
        return Err(BridgeError::UnknownMask(extra.id.clone()));
    }

    let mut position = 0;
    let bars = stream
        .quantized
        .bars()
        .iter()
        .map(|bar| {
            if bar.is_empty() {
                position += 1;
                return Bar::empty();
            }
            let kept = bar
                .notes()
                .iter()
                .filter(|_| {
                    position += 1;
                    probs[position - 1] >= cutoff
                })
                .copied()
                .collect();
            Bar::new(kept)
        })
        .collect();
    Ok(QuantizedScore::new(bars))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{quantize, Note};

    const PPQ: u16 = 4;

    fn ten_notes() -> Score {
        // bars 0 and 2 sound, bar 1 is empty
        let mut notes: Vec<Note> = (0..6).map(|i| Note::new(60 + i as u8, i * 2, 2)).collect();
        notes.extend((0..4).map(|i| Note::new(50 + i as u8, 32 + i * 4, 4)));
        Score::from_notes(PPQ, notes)
    }

    fn mask(id: &str, head: &[f64]) -> KeepMask {
        let mut keep = head.to_vec();
        keep.resize(SEQUENCE_LEN, 0.0);
        KeepMask { id: id.into(), keep }
    }

    #[test]
    fn all_ones_is_identity() {
        let score = ten_notes();
        let out = apply_keep_mask(&score, "p", &[mask("p#0", &[1.0; 11])], DEFAULT_CUTOFF).unwrap();
        assert_eq!(out, quantize(&score).unwrap());
    }

    #[test]
    fn all_zeros_keeps_bars() {
        let out = apply_keep_mask(&ten_notes(), "p", &[mask("p#0", &[])], DEFAULT_CUTOFF).unwrap();
        assert_eq!(out.bar_count(), 3);
        assert_eq!(out.note_count(), 0);
    }

    #[test]
    fn mixed_mask() {
        // tokens: 6 notes, ABS, 4 notes
        let probs = [0.9, 0.1, 0.5, 0.49, 1.0, 0.0, 1.0, 0.7, 0.2, 0.6, 0.3];
        let out = apply_keep_mask(&ten_notes(), "p", &[mask("p#0", &probs)], 0.5).unwrap();
        let kept: Vec<u8> = out.iter_notes().map(|(_, n)| n.pitch).collect();
        assert_eq!(kept, vec![60, 62, 64, 50, 52]);
        assert!(out.bars()[1].is_empty());
    }

    #[test]
    fn id_and_length_mismatches() {
        let score = ten_notes();
        assert_eq!(
            apply_keep_mask(&score, "p", &[mask("q#0", &[])], 0.5),
            Err(BridgeError::MissingMask("p#0".into()))
        );
        assert_eq!(
            apply_keep_mask(&score, "p", &[mask("p#0", &[]), mask("p#1", &[])], 0.5),
            Err(BridgeError::UnknownMask("p#1".into()))
        );
        let short = KeepMask {
            id: "p#0".into(),
            keep: vec![1.0; 10],
        };
        assert!(matches!(
            apply_keep_mask(&score, "p", &[short], 0.5),
            Err(BridgeError::MaskLength { len: 10, .. })
        ));
        assert_eq!(
            apply_keep_mask(&score, "p", &[mask("p#0", &[]), mask("p#0", &[])], 0.5),
            Err(BridgeError::DuplicateMask("p#0".into()))
        );
        assert_eq!(
            apply_keep_mask(&score, "p", &[mask("p#0", &[])], 1.0),
            Err(BridgeError::InvalidCutoff(1.0))
        );
    }

    #[test]
    fn parses_and_validates_mask_lines() {
        let good = serde_json::to_string(&mask("p#0", &[0.25])).unwrap();
        assert_eq!(parse_keep_masks(&good).unwrap()[0].keep[0], 0.25);
        let bad = serde_json::to_string(&mask("p#0", &[1.5])).unwrap();
        assert_eq!(parse_keep_masks(&format!("\n{bad}")).unwrap_err().line, 2);
        assert!(parse_keep_masks(r#"{"id":"p#0","keep":[0.5]}"#).is_err());
    }
}
