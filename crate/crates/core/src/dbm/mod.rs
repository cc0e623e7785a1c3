//! Rule-based reduction: melody on the right hand, database-matched
//! accompaniment bars on the left.

mod db;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use db::{
    build_accomp_db, extract_entries, left_hand_track, AccompanimentDB, AccompanimentEntry, DbSkip, SkipReason,
};

use crate::postprocess::two_hand_score;
use crate::score::{
    merge_to_single_channel, quantize, Note, QNote, QuantizeError, Score, TimeSignature, OUTPUT_PPQ, SUBBEATS_PER_BAR,
};
use crate::skyline::{select_melody_track, skyline_top, MelodyWeights, SkylineError};

/// Share of a bar's duration mass a pitch class needs to count as a chord tone.
pub const CHORD_MASS_THRESHOLD: f64 = 0.2;
/// Left-hand roots are placed in `[LEFT_ROOT_LOW, LEFT_ROOT_LOW + 11]`.
pub const LEFT_ROOT_LOW: u8 = 36;
/// Cap on the number of accompaniment notes asked for per bar.
pub const MAX_TARGET_DENSITY: usize = 8;
pub const PIANO_LOW: u8 = 21;
pub const PIANO_HIGH: u8 = 108;

#[derive(Debug, Error, PartialEq)]
pub enum DbmError {
    #[error("accompaniment database is empty")]
    EmptyDatabase,
    #[error("invalid accompaniment database: {0}")]
    InvalidDatabase(String),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Skyline(#[from] SkylineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BarChord {
    /// Pitch class of the bass at the downbeat, else of the lowest note.
    pub root: Option<u8>,
    /// Chord pitch classes, ascending.
    pub pcs: Vec<u8>,
}

impl BarChord {
    pub fn mask(&self) -> u16 {
        self.pcs.iter().fold(0, |m, &pc| m | 1 << pc)
    }
}

/// Pitch classes holding at least 20% of the bar's duration mass (durations
/// clipped at the bar line). The root is the lowest note starting on the
/// downbeat, or the lowest note of the bar when nothing starts there.
pub fn detect_bar_chord(bar: &[QNote]) -> BarChord {
    let mut mass = [0u32; 12];
    for note in bar {
        let dur = note.duration.min(SUBBEATS_PER_BAR.saturating_sub(note.position));
        mass[usize::from(note.pitch % 12)] += u32::from(dur);
    }
    let total: u32 = mass.iter().sum();
    let pcs = (0..12u8)
        .filter(|&pc| total > 0 && f64::from(mass[usize::from(pc)]) >= CHORD_MASS_THRESHOLD * f64::from(total))
        .collect();
    let downbeat = bar.iter().filter(|n| n.position == 0).map(|n| n.pitch).min();
    let root = downbeat.or_else(|| bar.iter().map(|n| n.pitch).min()).map(|p| p % 12);
    BarChord { root, pcs }
}

/// Coefficients of the entry score
/// `hit·|realized ∩ chord| − miss·|realized ∖ chord| − density·|entry density − target|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchWeights {
    pub hit: f64,
    pub miss: f64,
    pub density: f64,
}

impl Default for MatchWeights {
    fn default() -> Self {
        MatchWeights {
            hit: 2.0,
            miss: 1.0,
            density: 0.5,
        }
    }
}

/// Score of one entry for a bar. With no chord tones only the density term
/// applies.
pub fn match_score(entry: &AccompanimentEntry, chord: &BarChord, target_density: usize, weights: &MatchWeights) -> f64 {
    let density = weights.density * entry.density().abs_diff(target_density) as f64;
    if chord.pcs.is_empty() {
        return -density;
    }
    let root = chord.root.unwrap_or(0);
    let chord_mask = chord.mask();
    let realized = entry
        .pitch_classes
        .iter()
        .fold(0u16, |m, &pc| m | 1 << ((pc + root) % 12));
    let hits = (realized & chord_mask).count_ones();
    let misses = (realized & !chord_mask).count_ones();
    weights.hit * f64::from(hits) - weights.miss * f64::from(misses) - density
}

/// Best-scoring entry; ties go to the higher count, then the smaller source id.
pub fn match_accompaniment<'a>(
    db: &'a AccompanimentDB,
    chord: &BarChord,
    target_density: usize,
    weights: &MatchWeights,
) -> Result<&'a AccompanimentEntry, DbmError> {
    db.entries()
        .iter()
        .map(|e| (match_score(e, chord, target_density, weights), e))
        .max_by(|(sa, a), (sb, b)| {
            sa.total_cmp(sb)
                .then(a.count.cmp(&b.count))
                .then_with(|| b.source_id.cmp(&a.source_id))
        })
        .map(|(_, e)| e)
        .ok_or(DbmError::EmptyDatabase)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbmOptions {
    pub melody: MelodyWeights,
    pub matching: MatchWeights,
}

fn fold_into_piano(mut pitch: u8) -> u8 {
    while pitch < PIANO_LOW {
        pitch += 12;
    }
    while pitch > PIANO_HIGH {
        pitch -= 12;
    }
    pitch
}

/// Two-hand reduction at 480 ticks per beat. The right hand is the top
/// skyline of the melody track; each non-empty bar gets the best matching
/// database entry on the left, rooted in `[36, 47]`.
pub fn reduce_dbm(orchestra: &Score, db: &AccompanimentDB, options: &DbmOptions) -> Result<Score, DbmError> {
    let template = Score::new(OUTPUT_PPQ).with_time_signatures(vec![TimeSignature::common_time(0)]);
    let merged = merge_to_single_channel(orchestra);
    if merged.note_count() == 0 {
        return Ok(two_hand_score(&template, Vec::new(), Vec::new()));
    }
    if db.is_empty() {
        return Err(DbmError::EmptyDatabase);
    }
    let bars = quantize(&merged)?;

    let melody_track = select_melody_track(orchestra, &options.melody)?;
    let melody: Vec<Note> = orchestra.tracks()[melody_track]
        .notes
        .iter()
        .filter(|n| !n.is_percussion())
        .copied()
        .collect();
    let line = Score::from_notes(orchestra.ppq(), skyline_top(&melody).into_notes()).rescaled(OUTPUT_PPQ);
    let right: Vec<Note> = skyline_top(&line.tracks()[0].notes)
        .into_notes()
        .into_iter()
        .map(|n| Note {
            pitch: fold_into_piano(n.pitch),
            ..n
        })
        .collect();

    let subbeat = u64::from(OUTPUT_PPQ) / 4;
    let bar_len = u64::from(SUBBEATS_PER_BAR);
    let mut left = Vec::new();
    for (b, bar) in bars.bars().iter().enumerate() {
        if bar.is_empty() {
            continue;
        }
        let chord = detect_bar_chord(bar.notes());
        let mut positions: Vec<u8> = bar.notes().iter().map(|n| n.position).collect();
        positions.dedup();
        let target = positions.len().min(MAX_TARGET_DENSITY);
        let entry = match_accompaniment(db, &chord, target, &options.matching)?;
        let root_pc = chord.root.unwrap_or(0);
        let root = LEFT_ROOT_LOW + (root_pc + 12 - LEFT_ROOT_LOW % 12) % 12;
        for (&(pos, dur), &degree) in entry.rhythm.iter().zip(&entry.degrees) {
            let pitch = fold_into_piano(root.saturating_add(degree));
            let onset = (b as u64 * bar_len + u64::from(pos)) * subbeat;
            left.push(Note::new(pitch, onset, u64::from(dur) * subbeat));
        }
    }

    let end = bars.bar_count() as u64 * bar_len * subbeat;
    Ok(two_hand_score(&template.with_end_tick(end), right, left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::Track;
    use crate::skyline::is_monophonic;

    fn q(position: u8, pitch: u8, duration: u8) -> QNote {
        QNote::new(position, pitch, duration)
    }

    fn entry(slots: &[(u8, u8, u8)], source: &str) -> AccompanimentEntry {
        AccompanimentEntry::from_slots(slots, source).unwrap()
    }

    fn triad_and_fifth() -> AccompanimentDB {
        AccompanimentDB::from_entries([
            entry(&[(0, 4, 36), (4, 4, 43), (8, 4, 36)], "fifth"),
            entry(&[(0, 4, 36), (4, 4, 40), (8, 4, 43)], "triad"),
        ])
    }

    #[test]
    fn chord_of_a_triad() {
        let bar = [q(0, 48, 16), q(0, 64, 8), q(8, 67, 8)];
        assert_eq!(
            detect_bar_chord(&bar),
            BarChord {
                root: Some(0),
                pcs: vec![0, 4, 7]
            }
        );
    }

    #[test]
    fn chord_of_an_empty_bar() {
        assert_eq!(detect_bar_chord(&[]), BarChord::default());
    }

    #[test]
    fn chromatic_run_has_no_chord_tones() {
        let bar: Vec<QNote> = (0..12).map(|i| q(i, 60 + i, 1)).collect();
        assert_eq!(
            detect_bar_chord(&bar),
            BarChord {
                root: Some(0),
                pcs: vec![]
            }
        );
    }

    #[test]
    fn root_falls_back_to_lowest_note() {
        let bar = [q(4, 50, 4), q(8, 45, 4)];
        assert_eq!(detect_bar_chord(&bar).root, Some(9));
    }

    #[test]
    fn triad_beats_fifth() {
        let chord = BarChord {
            root: Some(0),
            pcs: vec![0, 4, 7],
        };
        let db = triad_and_fifth();
        let best = match_accompaniment(&db, &chord, 3, &MatchWeights::default()).unwrap();
        assert_eq!(best.source_id, "triad");
    }

    #[test]
    fn matching_respects_root() {
        // G major: the fifth entry rooted on G realizes {7, 2}, the triad {7, 11, 2}
        let chord = BarChord {
            root: Some(7),
            pcs: vec![2, 7, 11],
        };
        let db = triad_and_fifth();
        let best = match_accompaniment(&db, &chord, 3, &MatchWeights::default()).unwrap();
        assert_eq!(best.source_id, "triad");
    }

    #[test]
    fn empty_chord_prefers_sparse_entry() {
        let db = AccompanimentDB::from_entries([
            entry(&[(0, 4, 36), (4, 4, 43), (8, 4, 36)], "busy"),
            entry(&[(0, 16, 36)], "sparse"),
        ]);
        let best = match_accompaniment(&db, &BarChord::default(), 0, &MatchWeights::default()).unwrap();
        assert_eq!(best.source_id, "sparse");
    }

    #[test]
    fn ties_prefer_count_then_source() {
        let a = entry(&[(0, 16, 36)], "b");
        let mut b = entry(&[(0, 8, 36)], "a");
        let chord = BarChord {
            root: Some(0),
            pcs: vec![0],
        };
        let db = AccompanimentDB::from_entries([a.clone(), b.clone()]);
        assert_eq!(
            match_accompaniment(&db, &chord, 1, &MatchWeights::default())
                .unwrap()
                .source_id,
            "a"
        );
        b.source_id = "c".into();
        let db = AccompanimentDB::from_entries([a.clone(), a, b]);
        assert_eq!(
            match_accompaniment(&db, &chord, 1, &MatchWeights::default())
                .unwrap()
                .source_id,
            "b"
        );
    }

    #[test]
    fn single_entry_and_empty_db() {
        let db = AccompanimentDB::from_entries([entry(&[(0, 4, 40)], "only")]);
        let chord = BarChord {
            root: Some(5),
            pcs: vec![1, 6],
        };
        assert_eq!(
            match_accompaniment(&db, &chord, 7, &MatchWeights::default())
                .unwrap()
                .source_id,
            "only"
        );
        assert_eq!(
            match_accompaniment(&AccompanimentDB::default(), &chord, 1, &MatchWeights::default()),
            Err(DbmError::EmptyDatabase)
        );
    }

    fn orchestra() -> Score {
        let ppq = 96;
        let melody: Vec<Note> = [72, 74, 76, 77, 79, 77, 76, 74]
            .iter()
            .enumerate()
            .map(|(i, &p)| Note::new(p, i as u64 * 96, 96))
            .collect();
        let strings = vec![
            Note::new(48, 0, 384),
            Note::new(52, 0, 384),
            Note::new(55, 0, 384),
            Note::new(43, 384, 384),
            Note::new(47, 384, 384),
            Note::new(50, 384, 384),
        ];
        let bass = vec![Note::new(36, 0, 384), Note::new(31, 384, 384)];
        Score::from_tracks(ppq, vec![Track::new(melody), Track::new(strings), Track::new(bass)])
    }

    #[test]
    fn reduces_to_two_hands() {
        let out = reduce_dbm(&orchestra(), &triad_and_fifth(), &DbmOptions::default()).unwrap();
        assert_eq!(out.ppq(), OUTPUT_PPQ);
        assert_eq!(out.tracks().len(), 2);
        let right = &out.tracks()[0].notes;
        assert!(is_monophonic(right));
        // the melody track is monophonic, so it comes through unchanged
        let pitches: Vec<u8> = right.iter().map(|n| n.pitch).collect();
        assert_eq!(pitches, vec![72, 74, 76, 77, 79, 77, 76, 74]);
        assert_eq!(right[1].onset, 480);
        // bar 0 is C major, bar 1 G major: triad rooted at C2 then G2
        let left: Vec<(u64, u8)> = out.tracks()[1].notes.iter().map(|n| (n.onset, n.pitch)).collect();
        assert_eq!(
            left,
            vec![(0, 36), (480, 40), (960, 43), (1920, 43), (2400, 47), (2880, 50)]
        );
        assert_eq!(out.end_tick(), 2 * 1920);
    }

    #[test]
    fn empty_bars_stay_empty() {
        let mut score = orchestra();
        let late: Vec<Note> = score.tracks()[2]
            .notes
            .iter()
            .map(|n| Note {
                onset: n.onset + 1536,
                ..*n
            })
            .collect();
        score = Score::from_tracks(96, vec![score.tracks()[0].clone(), Track::new(late)]);
        let out = reduce_dbm(&score, &triad_and_fifth(), &DbmOptions::default()).unwrap();
        let bar_ticks = 1920;
        let left_bars: Vec<u64> = out.tracks()[1].notes.iter().map(|n| n.onset / bar_ticks).collect();
        assert!(!left_bars.contains(&2));
        assert!(left_bars.contains(&4));
    }

    #[test]
    fn empty_orchestra() {
        let out = reduce_dbm(&Score::new(96), &AccompanimentDB::default(), &DbmOptions::default()).unwrap();
        assert_eq!(out.tracks().len(), 2);
        assert_eq!(out.note_count(), 0);
    }

    #[test]
    fn folds_into_piano_range() {
        assert_eq!(fold_into_piano(12), 24);
        assert_eq!(fold_into_piano(120), 108);
        assert_eq!(fold_into_piano(60), 60);
    }
}
