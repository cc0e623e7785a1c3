//! Keep/discard labels for the note-reduction task.

use std::collections::HashMap;

use serde::Serialize;

use super::{chunk_stream, DatasetError, TokenSequence, IGNORE_ID, SEQUENCE_LEN};
use crate::score::{merge_to_single_channel, quantize_with_sources, QuantizeError, QuantizedScore, Score};
use crate::tokenizer::{tokenize, TokenStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeepLabel {
    Discard,
    Keep,
    /// Special or padding position; excluded from the loss.
    Ignore,
}

impl KeepLabel {
    pub fn wire(self) -> i64 {
        match self {
            KeepLabel::Discard => 0,
            KeepLabel::Keep => 1,
            KeepLabel::Ignore => IGNORE_ID,
        }
    }
}

impl From<bool> for KeepLabel {
    fn from(keep: bool) -> Self {
        if keep {
            KeepLabel::Keep
        } else {
            KeepLabel::Discard
        }
    }
}

/// Marks each orchestra note (in `orchestra.notes()` order) as kept when some
/// piano note of the same pitch overlaps it in time. Intervals are half-open,
/// so notes that merely touch do not count. Differing tick resolutions are
/// compared exactly.
pub fn label_keep(orchestra: &Score, piano: &Score) -> Vec<bool> {
    let (op, pp) = (u128::from(orchestra.ppq()), u128::from(piano.ppq()));

    // per pitch: intervals sorted by start plus running max of ends
    let mut by_pitch: HashMap<u8, Vec<(u128, u128)>> = HashMap::new();
    for note in piano.notes() {
        by_pitch
            .entry(note.pitch)
            .or_default()
            .push((u128::from(note.onset) * op, u128::from(note.end()) * op));
    }
    let index: HashMap<u8, (Vec<u128>, Vec<u128>)> = by_pitch
        .into_iter()
        .map(|(pitch, mut spans)| {
            spans.sort_unstable();
            let starts = spans.iter().map(|s| s.0).collect();
            let max_ends = spans
                .iter()
                .scan(0u128, |max, s| {
                    *max = (*max).max(s.1);
                    Some(*max)
                })
                .collect();
            (pitch, (starts, max_ends))
        })
        .collect();

    orchestra
        .notes()
        .map(|note| {
            let Some((starts, max_ends)) = index.get(&note.pitch) else {
                return false;
            };
            let (start, end) = (u128::from(note.onset) * pp, u128::from(note.end()) * pp);
            // piano notes starting before this note ends
            let candidates = starts.partition_point(|&s| s < end);
            candidates > 0 && max_ends[candidates - 1] > start
        })
        .collect()
}

/// The orchestra side of the note-reduction task: merged, quantized and
/// tokenized, with the merged-score note behind every token.
#[derive(Debug, Clone, PartialEq)]
pub struct NrStream {
    pub merged: Score,
    pub quantized: QuantizedScore,
    pub tokens: TokenStream,
    /// Index into `merged.notes()` per token; `None` for ⟨ABS⟩.
    pub sources: Vec<Option<usize>>,
}

pub fn nr_token_stream(orchestra: &Score) -> Result<NrStream, QuantizeError> {
    let merged = merge_to_single_channel(orchestra);
    let (quantized, bar_sources) = quantize_with_sources(&merged)?;
    let tokens = tokenize(&quantized);
    let sources = bar_sources
        .iter()
        .flat_map(|bar| {
            if bar.is_empty() {
                vec![None]
            } else {
                bar.iter().map(|&i| Some(i)).collect()
            }
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(sources.len(), tokens.len());
    Ok(NrStream {
        merged,
        quantized,
        tokens,
        sources,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NrRecord {
    pub id: String,
    pub tokens: TokenSequence,
    pub labels: Vec<KeepLabel>,
}

#[derive(Serialize)]
struct NrWire<'a> {
    id: &'a str,
    tokens: Vec<[u16; 4]>,
    labels: Vec<i64>,
}

impl NrRecord {
    pub fn to_json_line(&self) -> String {
        let wire = NrWire {
            id: &self.id,
            tokens: self.tokens.encode(),
            labels: self.labels.iter().map(|l| l.wire()).collect(),
        };
        serde_json::to_string(&wire).expect("record serializes")
    }
}

/// Tokenizes each orchestra score into windows and labels every note token
/// against its paired piano score.
pub fn build_nr_dataset<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a Score, &'a Score)>,
) -> Result<Vec<NrRecord>, DatasetError> {
    let mut records = Vec::new();
    for (id, orchestra, piano) in pairs {
        let stream = nr_token_stream(orchestra).map_err(|source| DatasetError::Quantize {
            id: id.to_string(),
            source,
        })?;
        let note_labels = label_keep(&stream.merged, piano);
        let token_labels: Vec<KeepLabel> = stream
            .sources
            .iter()
            .map(|s| s.map_or(KeepLabel::Ignore, |i| note_labels[i].into()))
            .collect();
        for (chunk, labels) in chunk_stream(id, &stream.tokens)
            .into_iter()
            .zip(token_labels.chunks(SEQUENCE_LEN))
        {
            let mut labels = labels.to_vec();
            labels.resize(SEQUENCE_LEN, KeepLabel::Ignore);
            assert_eq!(labels.len(), chunk.sequence.tokens().len());
            records.push(NrRecord {
                id: chunk.id,
                tokens: chunk.sequence,
                labels,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Note, Track};
    use crate::tokenizer::CpToken;

    fn one(pitch: u8, onset: u64, duration: u64) -> Score {
        Score::from_notes(480, vec![Note::new(pitch, onset, duration)])
    }

    #[test]
    fn overlap_rules() {
        assert_eq!(label_keep(&one(60, 0, 480), &one(60, 240, 480)), vec![true]);
        assert_eq!(label_keep(&one(60, 0, 480), &one(61, 240, 480)), vec![false]);
        assert_eq!(label_keep(&one(60, 0, 480), &one(60, 480, 480)), vec![false]);
        assert_eq!(label_keep(&one(60, 480, 480), &one(60, 0, 480)), vec![false]);
        assert_eq!(label_keep(&one(60, 100, 10), &one(60, 0, 960)), vec![true]);
    }

    #[test]
    fn mixed_resolutions_compare_exactly() {
        let piano = Score::from_notes(240, vec![Note::new(60, 240, 240)]);
        assert_eq!(label_keep(&one(60, 0, 480), &piano), vec![false]);
        assert_eq!(label_keep(&one(60, 0, 481), &piano), vec![true]);
    }

    #[test]
    fn long_earlier_note_is_found() {
        // an early long note must be seen past shorter later ones
        let piano = Score::from_notes(
            480,
            vec![Note::new(60, 0, 4000), Note::new(60, 100, 10), Note::new(60, 200, 10)],
        );
        assert_eq!(label_keep(&one(60, 3000, 10), &piano), vec![true]);
    }

    #[test]
    fn self_pair_and_empty_piano() {
        let orchestra = Score::from_tracks(
            480,
            (0..4)
                .map(|t| {
                    Track::new(
                        (0..10)
                            .map(|i| Note::new(50 + t * 5 + i % 3, u64::from(i) * 480, 480))
                            .collect(),
                    )
                })
                .collect(),
        );
        let records = build_nr_dataset([("o", &orchestra, &orchestra)]).unwrap();
        let all_keep = records[0].tokens.tokens().iter().zip(&records[0].labels).all(|(t, l)| {
            if t.is_note() {
                *l == KeepLabel::Keep
            } else {
                *l == KeepLabel::Ignore
            }
        });
        assert!(all_keep);

        let empty = Score::new(480);
        let records = build_nr_dataset([("o", &orchestra, &empty)]).unwrap();
        assert!(records[0].labels.iter().all(|l| *l != KeepLabel::Keep));
        assert!(records[0].labels.contains(&KeepLabel::Discard));
    }

    #[test]
    fn abs_positions_are_ignored() {
        let orchestra = Score::from_notes(480, vec![Note::new(60, 0, 480), Note::new(62, 1920 * 2, 480)]);
        let records = build_nr_dataset([("o", &orchestra, &orchestra)]).unwrap();
        assert_eq!(records[0].tokens.tokens()[1], CpToken::ABS);
        assert_eq!(
            &records[0].labels[..3],
            &[KeepLabel::Keep, KeepLabel::Ignore, KeepLabel::Keep]
        );
        assert!(records[0].to_json_line().contains("\"labels\":[1,-100,1,-100"));
    }
}
