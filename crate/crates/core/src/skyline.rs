//! Melody track selection and skyline line extraction.
//!
//! [`skyline_top`] keeps, at every tick, the highest sounding pitch. A lower
//! note interrupted by a higher one is cut at the higher note's onset, and
//! picks up again once nothing higher sounds. [`skyline_bottom`] is the
//! mirror image for bass lines.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{Note, Score};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkylineError {
    #[error("score has no pitched tracks")]
    NoPitchedTracks,
}

/// A strictly monophonic sequence of notes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonophonicLine(Vec<Note>);

impl MonophonicLine {
    pub fn notes(&self) -> &[Note] {
        &self.0
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Returns true when no two notes' `[onset, end)` intervals intersect.
pub fn is_monophonic(notes: &[Note]) -> bool {
    let mut sorted: Vec<&Note> = notes.iter().collect();
    sorted.sort_by_key(|n| n.onset);
    sorted.windows(2).all(|w| w[0].end() <= w[1].onset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelodyWeights {
    pub mean_pitch: f64,
    pub coverage: f64,
    pub variety: f64,
}

impl Default for MelodyWeights {
    fn default() -> Self {
        MelodyWeights {
            mean_pitch: 0.5,
            coverage: 0.3,
            variety: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TrackFeatures {
    index: usize,
    mean_pitch: f64,
    coverage: f64,
    variety: f64,
}

/// Picks the track most likely to carry the melody: a weighted sum of mean
/// pitch, fraction of bars in which the track sounds and number of distinct
/// pitches, each normalized by its maximum over all tracks. Ties go to the
/// lowest track index.
pub fn select_melody_track(score: &Score, weights: &MelodyWeights) -> Result<usize, SkylineError> {
    let bar_ticks = score.bar_ticks();
    let total_bars = score.extent().div_ceil(bar_ticks).max(1) as f64;

    let features: Vec<TrackFeatures> = score
        .tracks()
        .iter()
        .enumerate()
        .filter_map(|(index, track)| {
            let mean_pitch = track.mean_pitch()?;
            let mut bars = BTreeSet::new();
            let mut pitches = BTreeSet::new();
            for note in track.notes.iter().filter(|n| !n.is_percussion()) {
                bars.extend(note.onset / bar_ticks..=(note.end() - 1) / bar_ticks);
                pitches.insert(note.pitch);
            }
            Some(TrackFeatures {
                index,
                mean_pitch,
                coverage: bars.len() as f64 / total_bars,
                variety: pitches.len() as f64,
            })
        })
        .collect();

    let max_of = |f: fn(&TrackFeatures) -> f64| features.iter().map(f).fold(0.0_f64, f64::max);
    let norm = |value: f64, max: f64| if max > 0.0 { value / max } else { 0.0 };
    let (max_pitch, max_cov, max_var) = (max_of(|f| f.mean_pitch), max_of(|f| f.coverage), max_of(|f| f.variety));

    let mut best: Option<(usize, f64)> = None;
    for f in &features {
        let score = weights.mean_pitch * norm(f.mean_pitch, max_pitch)
            + weights.coverage * norm(f.coverage, max_cov)
            + weights.variety * norm(f.variety, max_var);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((f.index, score));
        }
    }
    best.map(|(i, _)| i).ok_or(SkylineError::NoPitchedTracks)
}

pub fn skyline_top(notes: &[Note]) -> MonophonicLine {
    skyline(notes, |active| active.last_key_value().map(|(_, &i)| i))
}

pub fn skyline_bottom(notes: &[Note]) -> MonophonicLine {
    skyline(notes, |active| active.first_key_value().map(|(_, &i)| i))
}

fn skyline(notes: &[Note], pick: impl Fn(&BTreeMap<u8, usize>) -> Option<usize>) -> MonophonicLine {
    let merged = merge_same_pitch(notes);

    let mut boundaries: Vec<u64> = merged.iter().flat_map(|n| [n.onset, n.end()]).collect();
    boundaries.sort_unstable();
    boundaries.dedup();

    let mut starts: Vec<usize> = (0..merged.len()).collect();
    starts.sort_by_key(|&i| merged[i].onset);
    let mut ends = starts.clone();
    ends.sort_by_key(|&i| merged[i].end());

    let mut active: BTreeMap<u8, usize> = BTreeMap::new();
    let (mut s, mut e) = (0, 0);
    let mut out: Vec<(usize, Note)> = Vec::new();
    for window in boundaries.windows(2) {
        let (from, to) = (window[0], window[1]);
        while e < ends.len() && merged[ends[e]].end() <= from {
            active.remove(&merged[ends[e]].pitch);
            e += 1;
        }
        while s < starts.len() && merged[starts[s]].onset <= from {
            let i = starts[s];
            if merged[i].end() > from {
                active.insert(merged[i].pitch, i);
            }
            s += 1;
        }
        let Some(winner) = pick(&active) else { continue };
        match out.last_mut() {
            Some((source, note)) if *source == winner && note.end() == from => note.duration += to - from,
            _ => out.push((
                winner,
                Note {
                    onset: from,
                    duration: to - from,
                    ..merged[winner]
                },
            )),
        }
    }
    MonophonicLine(out.into_iter().map(|(_, n)| n).collect())
}

/// Unions overlapping intervals of equal pitch. Touching notes stay separate.
fn merge_same_pitch(notes: &[Note]) -> Vec<Note> {
    let mut sorted: Vec<Note> = notes.iter().filter(|n| !n.is_percussion()).copied().collect();
    sorted.sort_by_key(|n| (n.pitch, n.onset));
    let mut merged: Vec<Note> = Vec::with_capacity(sorted.len());
    for note in sorted {
        match merged.last_mut() {
            Some(last) if last.pitch == note.pitch && note.onset < last.end() => {
                let end = last.end().max(note.end());
                last.duration = end - last.onset;
            }
            _ => merged.push(note),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::Track;

    fn spans(line: &MonophonicLine) -> Vec<(u8, u64, u64)> {
        line.notes().iter().map(|n| (n.pitch, n.onset, n.end())).collect()
    }

    #[test]
    fn chord_reduces_to_extremes() {
        let chord = [Note::new(60, 0, 480), Note::new(64, 0, 480), Note::new(67, 0, 480)];
        assert_eq!(spans(&skyline_top(&chord)), vec![(67, 0, 480)]);
        assert_eq!(spans(&skyline_bottom(&chord)), vec![(60, 0, 480)]);
    }

    #[test]
    fn interrupted_lower_note_is_truncated() {
        let notes = [Note::new(70, 0, 960), Note::new(72, 480, 960)];
        assert_eq!(spans(&skyline_top(&notes)), vec![(70, 0, 480), (72, 480, 1440)]);
        let mirrored = [Note::new(70, 0, 960), Note::new(68, 480, 960)];
        assert_eq!(spans(&skyline_bottom(&mirrored)), vec![(70, 0, 480), (68, 480, 1440)]);
    }

    #[test]
    fn lower_note_resumes_after_short_interruption() {
        let notes = [Note::new(60, 0, 960), Note::new(67, 240, 240)];
        assert_eq!(
            spans(&skyline_top(&notes)),
            vec![(60, 0, 240), (67, 240, 480), (60, 480, 960)]
        );
    }

    #[test]
    fn fully_covered_note_is_dropped() {
        let notes = [Note::new(72, 0, 960), Note::new(60, 240, 240)];
        assert_eq!(spans(&skyline_top(&notes)), vec![(72, 0, 960)]);
    }

    #[test]
    fn monophonic_input_is_unchanged() {
        let notes = vec![Note::new(60, 0, 480), Note::new(62, 480, 480), Note::new(60, 960, 240)];
        assert_eq!(skyline_bottom(&notes).into_notes(), notes);
        assert_eq!(skyline_top(&notes).into_notes(), notes);
        assert!(skyline_top(&[]).is_empty());
    }

    #[test]
    fn overlapping_unisons_merge() {
        let notes = [Note::new(60, 0, 480), Note::new(60, 240, 480)];
        assert_eq!(spans(&skyline_top(&notes)), vec![(60, 0, 720)]);
    }

    #[test]
    fn melody_track_selection() {
        let low = Track::new((0..4).map(|i| Note::new(48 + i, u64::from(i) * 480, 480)).collect());
        let high = Track::new((0..4).map(|i| Note::new(60 + i, u64::from(i) * 480, 480)).collect());
        let score = Score::from_tracks(480, vec![low.clone(), high.clone()]);
        assert_eq!(select_melody_track(&score, &MelodyWeights::default()), Ok(1));
        let tied = Score::from_tracks(480, vec![high.clone(), high]);
        assert_eq!(select_melody_track(&tied, &MelodyWeights::default()), Ok(0));
        let single = Score::from_tracks(480, vec![low]);
        assert_eq!(select_melody_track(&single, &MelodyWeights::default()), Ok(0));
        let drums = Score::from_tracks(480, vec![Track::new(vec![Note::new(36, 0, 10).with_channel(9)])]);
        assert_eq!(
            select_melody_track(&drums, &MelodyWeights::default()),
            Err(SkylineError::NoPitchedTracks)
        );
    }
}
