//! Iterative two-hand cleanup: per-beat hand clustering, simplification and
//! octave transposition, repeated until nothing changes.

mod kde;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kde::{cluster_beat, BeatClusters, Hand, KdeParams, SINGLE_CLUSTER_SPLIT};

use crate::score::{Note, Score, Track};

/// Track index of each hand in a two-hand score.
pub const RIGHT_HAND_TRACK: usize = 0;
pub const LEFT_HAND_TRACK: usize = 1;
pub const RIGHT_HAND_NAME: &str = "Right Hand";
pub const LEFT_HAND_NAME: &str = "Left Hand";

/// Longest allowed note, in beats.
pub const MAX_DURATION_BEATS: u64 = 4;
/// Simultaneous notes per hand above which doublings are thinned.
pub const MAX_NOTES_PER_HAND: usize = 4;
pub const DEFAULT_FAR_THRESHOLD: u8 = 12;
/// Largest tolerated gap between the hands before the left hand moves up.
pub const HAND_GAP_LIMIT: u8 = 18;
pub const DEFAULT_MAX_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub kde: KdeParams,
    pub far_threshold: u8,
    pub max_iters: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            kde: KdeParams::default(),
            far_threshold: DEFAULT_FAR_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Hand centres per beat index (onset / ppq).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HandAssignment {
    pub beats: BTreeMap<u64, BeatClusters>,
}

impl HandAssignment {
    pub fn centre(&self, beat: u64, hand: Hand) -> Option<f64> {
        self.beats.get(&beat).map(|c| c.centre(hand))
    }
}

fn hand_of_track(index: usize) -> Hand {
    if index == LEFT_HAND_TRACK {
        Hand::Left
    } else {
        Hand::Right
    }
}

/// Builds a two-hand score carrying over `template`'s timing metadata.
pub fn two_hand_score(template: &Score, right: Vec<Note>, left: Vec<Note>) -> Score {
    let right = right.into_iter().map(|n| n.with_channel(0)).collect();
    let left = left.into_iter().map(|n| n.with_channel(1)).collect();
    Score::from_tracks(
        template.ppq(),
        vec![Track::named(RIGHT_HAND_NAME, right), Track::named(LEFT_HAND_NAME, left)],
    )
    .with_time_signatures(template.time_signatures().to_vec())
    .with_end_tick(template.end_tick())
}

/// Clusters every beat's pitched notes (by onset) into two hands and returns
/// the resulting two-hand score together with the per-beat centres.
pub fn assign_hands(score: &Score, params: &KdeParams) -> (Score, HandAssignment) {
    let ppq = u64::from(score.ppq());
    let mut notes: Vec<Note> = score.pitched_notes().copied().collect();
    notes.sort_by_key(|n| (n.onset, n.pitch, n.duration, n.velocity));

    let mut assignment = HandAssignment::default();
    let (mut right, mut left) = (Vec::new(), Vec::new());
    for beat_notes in notes.chunk_by(|a, b| a.onset / ppq == b.onset / ppq) {
        let pitches: Vec<u8> = beat_notes.iter().map(|n| n.pitch).collect();
        let Some(clusters) = cluster_beat(&pitches, params) else {
            continue;
        };
        for (note, hand) in beat_notes.iter().zip(&clusters.hands) {
            match hand {
                Hand::Right => right.push(*note),
                Hand::Left => left.push(*note),
            }
        }
        assignment.beats.insert(beat_notes[0].onset / ppq, clusters);
    }
    (two_hand_score(score, right, left), assignment)
}

fn hand_notes(score: &Score, hand: Hand) -> Vec<Note> {
    score
        .tracks()
        .iter()
        .enumerate()
        .filter(|(i, _)| hand_of_track(*i) == hand)
        .flat_map(|(_, t)| t.notes.iter().copied())
        .collect()
}

/// Deletes inner doublings at onset ticks where more than four notes of one
/// hand sound. `notes` must be sorted by onset.
fn thin_doublings(notes: Vec<Note>, hand: Hand) -> Vec<Note> {
    let mut alive: Vec<Option<Note>> = notes.into_iter().map(Some).collect();
    let mut onsets: Vec<u64> = alive.iter().flatten().map(|n| n.onset).collect();
    onsets.dedup();
    for tick in onsets {
        loop {
            let sounding = alive
                .iter()
                .flatten()
                .filter(|n| n.onset <= tick && tick < n.end())
                .count();
            if sounding <= MAX_NOTES_PER_HAND {
                break;
            }
            let starters: Vec<usize> = (0..alive.len())
                .filter(|&i| alive[i].is_some_and(|n| n.onset == tick))
                .collect();
            let doubled = starters.iter().copied().filter(|&i| {
                let n = alive[i].unwrap();
                starters.iter().any(|&j| {
                    let m = alive[j].unwrap();
                    j != i
                        && m.pitch % 12 == n.pitch % 12
                        && match hand {
                            Hand::Right => m.pitch >= n.pitch,
                            Hand::Left => m.pitch <= n.pitch,
                        }
                })
            });
            let victim = match hand {
                Hand::Right => doubled.min_by_key(|&i| alive[i].unwrap().pitch),
                Hand::Left => doubled.max_by_key(|&i| alive[i].unwrap().pitch),
            };
            match victim {
                Some(i) => alive[i] = None,
                None => break,
            }
        }
    }
    alive.into_iter().flatten().collect()
}

/// Trims notes longer than four beats, then thins doubled pairs per hand
/// wherever more than four notes sound at an onset tick: the right hand loses
/// the lower note of a pair, the left hand the upper one.
pub fn simplify(score: &Score) -> Score {
    let max = MAX_DURATION_BEATS * u64::from(score.ppq());
    let trim = |hand| {
        let mut notes = hand_notes(score, hand);
        for note in &mut notes {
            note.duration = note.duration.min(max);
        }
        notes.sort_by_key(|n| (n.onset, n.pitch, n.duration, n.velocity));
        thin_doublings(notes, hand)
    };
    two_hand_score(score, trim(Hand::Right), trim(Hand::Left))
}

/// Octave transposition toward each hand's beat centre, bounded by the
/// score's own pitch range.
pub fn transpose(score: &Score, assignment: &HandAssignment, far_threshold: u8) -> Score {
    match score.pitch_bounds() {
        Some(bounds) => transpose_within(score, assignment, far_threshold, bounds),
        None => score.clone(),
    }
}

/// Moves notes farther than `far_threshold` from their hand centre one
/// octave toward it, right hand only upward and left hand only downward,
/// never leaving `bounds`. Then, per beat, lifts the whole left hand an
/// octave when the closest pair across the hands is more than 18 semitones
/// apart.
pub fn transpose_within(score: &Score, assignment: &HandAssignment, far_threshold: u8, bounds: (u8, u8)) -> Score {
    let ppq = u64::from(score.ppq());
    let (lo, hi) = bounds;
    let far = f64::from(far_threshold);

    let mut right = hand_notes(score, Hand::Right);
    let mut left = hand_notes(score, Hand::Left);
    for note in &mut right {
        if let Some(centre) = assignment.centre(note.onset / ppq, Hand::Right) {
            if centre - f64::from(note.pitch) > far && note.pitch.checked_add(12).is_some_and(|p| p <= hi) {
                note.pitch += 12;
            }
        }
    }
    for note in &mut left {
        if let Some(centre) = assignment.centre(note.onset / ppq, Hand::Left) {
            if f64::from(note.pitch) - centre > far && note.pitch.checked_sub(12).is_some_and(|p| p >= lo) {
                note.pitch -= 12;
            }
        }
    }

    let mut right_range: BTreeMap<u64, (u8, u8)> = BTreeMap::new();
    for note in &right {
        let e = right_range.entry(note.onset / ppq).or_insert((note.pitch, note.pitch));
        *e = (e.0.min(note.pitch), e.1.max(note.pitch));
    }
    let mut left_top: BTreeMap<u64, u8> = BTreeMap::new();
    for note in &left {
        let e = left_top.entry(note.onset / ppq).or_insert(note.pitch);
        *e = (*e).max(note.pitch);
    }
    for note in &mut left {
        let beat = note.onset / ppq;
        let (Some(&(right_low, _)), Some(&top)) = (right_range.get(&beat), left_top.get(&beat)) else {
            continue;
        };
        if right_low > top && right_low - top > HAND_GAP_LIMIT && note.pitch + 12 <= hi {
            note.pitch += 12;
        }
    }
    two_hand_score(score, right, left)
}

/// Smallest pitch distance between the hands' notes starting in `beat`.
pub fn hand_gap(score: &Score, beat: u64) -> Option<u8> {
    let ppq = u64::from(score.ppq());
    let in_beat = |hand| -> Vec<u8> {
        hand_notes(score, hand)
            .iter()
            .filter(|n| n.onset / ppq == beat)
            .map(|n| n.pitch)
            .collect()
    };
    let (right, left) = (in_beat(Hand::Right), in_beat(Hand::Left));
    right
        .iter()
        .flat_map(|&r| left.iter().map(move |&l| r.abs_diff(l)))
        .min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessOutcome {
    pub score: Score,
    /// Whether each pass changed the score, in pass order.
    pub passes: Vec<bool>,
    pub fixpoint: bool,
}

impl PostprocessOutcome {
    pub fn iterations(&self) -> usize {
        self.passes.len()
    }

    /// One `iter=<n> changed=<bool>` line per pass.
    pub fn report(&self) -> String {
        self.passes
            .iter()
            .enumerate()
            .map(|(i, changed)| format!("iter={} changed={changed}\n", i + 1))
            .collect()
    }
}

/// Repeats clustering, simplification and transposition until a pass leaves
/// the score unchanged or `max_iters` passes have run. Pitches stay within
/// the input's original range.
pub fn postprocess(score: &Score, config: &PostprocessConfig) -> PostprocessOutcome {
    let max_iters = config.max_iters.max(1);
    let bounds = score.pitch_bounds();
    let mut current = score.clone();
    let mut passes = Vec::new();
    let mut fixpoint = false;
    while passes.len() < max_iters {
        let (hands, assignment) = assign_hands(&current, &config.kde);
        let simplified = simplify(&hands);
        let next = match bounds {
            Some(bounds) => transpose_within(&simplified, &assignment, config.far_threshold, bounds),
            None => simplified,
        };
        let changed = next != current;
        passes.push(changed);
        current = next;
        if !changed {
            fixpoint = true;
            break;
        }
    }
    PostprocessOutcome {
        score: current,
        passes,
        fixpoint,
    }
}
