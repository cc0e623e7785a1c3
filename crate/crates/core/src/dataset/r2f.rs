//! Reduced-to-full pairs: skyline melody and bass in, full piano score out.

use serde::{Deserialize, Serialize};

use super::{wire_error, DatasetError, TokenSequence, SEQUENCE_LEN};
use crate::score::{merge_to_single_channel, quantize, Bar, Note, QuantizedScore, Score, Track};
use crate::skyline::{skyline_bottom, skyline_top};
use crate::tokenizer::{tokenize, CpToken, JsonlError, RawToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct R2fLimits {
    /// Maximum non-PAD tokens in an input window.
    pub max_input_tokens: usize,
    /// Maximum output length including ⟨BOS⟩ and ⟨EOS⟩.
    pub max_output_tokens: usize,
}

impl Default for R2fLimits {
    fn default() -> Self {
        R2fLimits {
            max_input_tokens: 90,
            max_output_tokens: SEQUENCE_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R2fRecord {
    pub id: String,
    pub input: TokenSequence,
    /// ⟨BOS⟩ full-score tokens ⟨EOS⟩, padded.
    pub output: TokenSequence,
}

#[derive(Serialize, Deserialize)]
struct R2fWire<T> {
    id: String,
    input: Vec<T>,
    output: Vec<T>,
}

impl R2fRecord {
    pub fn to_json_line(&self) -> String {
        let wire = R2fWire {
            id: self.id.clone(),
            input: self.input.encode(),
            output: self.output.encode(),
        };
        serde_json::to_string(&wire).expect("record serializes")
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<R2fRecord>, JsonlError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let wire: R2fWire<RawToken> = serde_json::from_str(line).map_err(|e| wire_error(i + 1, e.to_string()))?;
            let input = TokenSequence::decode(&wire.input).map_err(|e| wire_error(i + 1, format!("input: {e}")))?;
            let output = TokenSequence::decode(&wire.output).map_err(|e| wire_error(i + 1, format!("output: {e}")))?;
            records.push(R2fRecord {
                id: wire.id,
                input,
                output,
            });
        }
        Ok(records)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct R2fDataset {
    pub records: Vec<R2fRecord>,
    /// Segments whose output would not fit the output limit.
    pub discarded_long_output: usize,
    /// Bars whose melody+bass alone exceed the input limit.
    pub discarded_oversized_bar: usize,
    /// Segments without any input note.
    pub skipped_empty: usize,
}

/// Union of the top and bottom skylines of every pitched note, as a
/// single-track score on the same timeline.
pub fn melody_and_bass(score: &Score) -> Score {
    let merged = merge_to_single_channel(score);
    let notes: Vec<Note> = merged.notes().copied().collect();
    let mut lines: Vec<Note> = skyline_top(&notes).into_notes();
    lines.extend(skyline_bottom(&notes).into_notes());
    lines.sort_by_key(|n| (n.onset, n.pitch, n.duration));
    lines.dedup_by_key(|n| (n.onset, n.pitch, n.duration));
    Score::from_tracks(score.ppq(), vec![Track::new(lines)])
        .with_time_signatures(score.time_signatures().to_vec())
        .with_end_tick(score.end_tick())
}

/// Segments each piano score into bar ranges whose melody+bass tokens fit
/// the input limit (greedy, growing one bar at a time) and pairs each with
/// the full tokenization of the same bars.
pub fn build_r2f_dataset<'a>(
    pianos: impl IntoIterator<Item = (&'a str, &'a Score)>,
    limits: R2fLimits,
) -> Result<R2fDataset, DatasetError> {
    let mut out = R2fDataset::default();
    for (id, piano) in pianos {
        let wrap = |source| DatasetError::Quantize {
            id: id.to_string(),
            source,
        };
        let mut reduced = quantize(&melody_and_bass(piano)).map_err(wrap)?;
        let mut full = quantize(&merge_to_single_channel(piano)).map_err(wrap)?;
        let bars = reduced.bar_count().max(full.bar_count());
        pad_bars(&mut reduced, bars);
        pad_bars(&mut full, bars);

        let mut start = 0;
        let mut count = 0;
        for bar in 0..bars {
            let cost = reduced.bars()[bar].len().max(1);
            if cost > limits.max_input_tokens {
                emit(&mut out, id, &reduced, &full, start..bar, limits);
                out.discarded_oversized_bar += 1;
                start = bar + 1;
                count = 0;
            } else if count + cost > limits.max_input_tokens {
                emit(&mut out, id, &reduced, &full, start..bar, limits);
                start = bar;
                count = cost;
            } else {
                count += cost;
            }
        }
        emit(&mut out, id, &reduced, &full, start..bars, limits);
    }
    Ok(out)
}

fn pad_bars(q: &mut QuantizedScore, bars: usize) {
    let missing = bars - q.bar_count();
    q.extend(QuantizedScore::new(vec![Bar::empty(); missing]));
}

fn emit(
    out: &mut R2fDataset,
    id: &str,
    reduced: &QuantizedScore,
    full: &QuantizedScore,
    range: std::ops::Range<usize>,
    limits: R2fLimits,
) {
    if range.is_empty() {
        return;
    }
    let input = reduced.slice(range.clone());
    if input.note_count() == 0 {
        out.skipped_empty += 1;
        return;
    }
    let mut output = vec![CpToken::BOS];
    output.extend(tokenize(&full.slice(range.clone())).iter().copied());
    output.push(CpToken::EOS);
    if output.len() > limits.max_output_tokens.min(SEQUENCE_LEN) {
        out.discarded_long_output += 1;
        return;
    }
    out.records.push(R2fRecord {
        id: format!("{id}#{}-{}", range.start, range.end),
        input: TokenSequence::from_content(&tokenize(&input)).expect("input within limit"),
        output: TokenSequence::from_content(&output).expect("output within limit"),
    });
}
