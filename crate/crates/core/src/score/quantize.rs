//! Snapping tick timing onto a grid of sixteen sub-beats per 4/4 bar.

use thiserror::Error;

use super::{Note, Score, TimeSignature, Track};

pub const SUBBEATS_PER_BAR: u8 = 16;
pub const SUBBEATS_PER_BEAT: u8 = 4;
pub const MAX_DURATION_SUBBEATS: u8 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantizeError {
    #[error("time signature {numerator}/{denominator} at tick {tick} is not 4/4")]
    NonCommonTime { tick: u64, numerator: u8, denominator: u8 },
}

/// A note placed on the bar grid. Field order gives the canonical sort
/// `(position, pitch, duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QNote {
    /// Sub-beat offset from the start of the bar, `0..16`.
    pub position: u8,
    pub pitch: u8,
    /// Length in sub-beats, `1..=64`.
    pub duration: u8,
}

impl QNote {
    pub fn new(position: u8, pitch: u8, duration: u8) -> Self {
        debug_assert!(position < SUBBEATS_PER_BAR);
        debug_assert!((1..=MAX_DURATION_SUBBEATS).contains(&duration));
        QNote {
            position,
            pitch,
            duration,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Bar {
    notes: Vec<QNote>,
}

impl Bar {
    pub fn new(mut notes: Vec<QNote>) -> Self {
        notes.sort();
        Bar { notes }
    }

    pub fn empty() -> Self {
        Bar::default()
    }

    pub fn notes(&self) -> &[QNote] {
        &self.notes
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }
}

/// A piece as a contiguous list of bars; empty bars are kept, never omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct QuantizedScore {
    bars: Vec<Bar>,
}

impl QuantizedScore {
    pub fn new(bars: Vec<Bar>) -> Self {
        QuantizedScore { bars }
    }

    pub fn with_empty_bars(count: usize) -> Self {
        QuantizedScore {
            bars: vec![Bar::empty(); count],
        }
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn bar_count(&self) -> usize {
        self.bars.len()
    }

    pub fn note_count(&self) -> usize {
        self.bars.iter().map(Bar::len).sum()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> QuantizedScore {
        QuantizedScore {
            bars: self.bars[range].to_vec(),
        }
    }

    /// Appends the bars of `other` after this score's bars.
    pub fn extend(&mut self, other: QuantizedScore) {
        self.bars.extend(other.bars);
    }

    /// `(bar index, note)` pairs in token order.
    pub fn iter_notes(&self) -> impl Iterator<Item = (usize, &QNote)> + '_ {
        self.bars
            .iter()
            .enumerate()
            .flat_map(|(i, bar)| bar.notes.iter().map(move |n| (i, n)))
    }
}

pub fn quantize(score: &Score) -> Result<QuantizedScore, QuantizeError> {
    quantize_with_sources(score).map(|(q, _)| q)
}

/// Quantizes and also reports, for every grid note, the index of the source
/// note in `score.notes()` order. The returned index lists are parallel to
/// each bar's notes.
pub fn quantize_with_sources(score: &Score) -> Result<(QuantizedScore, Vec<Vec<usize>>), QuantizeError> {
    if let Some(ts) = score.time_signatures().iter().find(|ts| !ts.is_common_time()) {
        return Err(QuantizeError::NonCommonTime {
            tick: ts.tick,
            numerator: ts.numerator,
            denominator: ts.denominator,
        });
    }
    let ppq = score.ppq();
    let per_bar = u64::from(SUBBEATS_PER_BAR);

    let mut placed: Vec<(u64, QNote, usize)> = score
        .notes()
        .enumerate()
        .map(|(index, note)| {
            let start = ticks_to_subbeats(note.onset, ppq);
            let duration = ticks_to_subbeats(note.duration, ppq).clamp(1, u64::from(MAX_DURATION_SUBBEATS));
            let qnote = QNote {
                position: (start % per_bar) as u8,
                pitch: note.pitch,
                duration: duration as u8,
            };
            (start / per_bar, qnote, index)
        })
        .collect();

    let from_notes = placed.iter().map(|(bar, _, _)| bar + 1).max().unwrap_or(0);
    let from_end = ticks_to_subbeats(score.end_tick(), ppq).div_ceil(per_bar);
    let bar_count = from_notes.max(from_end) as usize;

    placed.sort_by_key(|&(bar, qnote, index)| (bar, qnote, index));
    let mut bars = vec![Vec::new(); bar_count];
    let mut sources = vec![Vec::new(); bar_count];
    for (bar, qnote, index) in placed {
        bars[bar as usize].push(qnote);
        sources[bar as usize].push(index);
    }
    // already in canonical order; bypass Bar::new to keep sources parallel
    let bars = bars.into_iter().map(|notes| Bar { notes }).collect();
    Ok((QuantizedScore { bars }, sources))
}

/// Places a quantized piece back on a tick timeline as a single track.
pub fn dequantize(q: &QuantizedScore, ppq: u16) -> Score {
    let notes = q
        .iter_notes()
        .map(|(bar, n)| {
            let start = bar as u64 * u64::from(SUBBEATS_PER_BAR) + u64::from(n.position);
            let onset = subbeats_to_ticks(start, ppq);
            let end = subbeats_to_ticks(start + u64::from(n.duration), ppq);
            Note::new(n.pitch, onset, (end - onset).max(1))
        })
        .collect();
    let bar_ticks = subbeats_to_ticks(u64::from(SUBBEATS_PER_BAR), ppq);
    Score::from_tracks(ppq, vec![Track::new(notes)])
        .with_time_signatures(vec![TimeSignature::common_time(0)])
        .with_end_tick(q.bar_count() as u64 * bar_ticks)
}

/// Nearest sub-beat, halves rounding up.
pub(crate) fn ticks_to_subbeats(ticks: u64, ppq: u16) -> u64 {
    let beats = u128::from(SUBBEATS_PER_BEAT);
    let ppq = u128::from(ppq);
    ((u128::from(ticks) * beats * 2 + ppq) / (ppq * 2)) as u64
}

pub(crate) fn subbeats_to_ticks(subbeats: u64, ppq: u16) -> u64 {
    let beats = u128::from(SUBBEATS_PER_BEAT);
    let ppq = u128::from(ppq);
    ((u128::from(subbeats) * ppq * 2 + beats) / (beats * 2)) as u64
}
