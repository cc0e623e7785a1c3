use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::DbmError;
use crate::score::{quantize, QuantizeError, Score, Track, SUBBEATS_PER_BAR};

/// One bar of left-hand material: rhythm slots with pitch offsets above the
/// bar's lowest note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccompanimentEntry {
    /// `(position, duration)` in sub-beats, parallel to `degrees`.
    pub rhythm: Vec<(u8, u8)>,
    /// Semitones above the root, per slot.
    pub degrees: Vec<u8>,
    /// Distinct `degree % 12`, ascending.
    #[serde(rename = "pcs")]
    pub pitch_classes: Vec<u8>,
    pub count: u32,
    #[serde(rename = "source")]
    pub source_id: String,
}

impl AccompanimentEntry {
    /// Builds an entry from `(position, duration, pitch)` slots.
    pub fn from_slots(slots: &[(u8, u8, u8)], source_id: impl Into<String>) -> Option<Self> {
        let root = slots.iter().map(|s| s.2).min()?;
        let mut slots = slots.to_vec();
        slots.sort_unstable();
        let degrees: Vec<u8> = slots.iter().map(|s| s.2 - root).collect();
        let mut pitch_classes: Vec<u8> = degrees.iter().map(|d| d % 12).collect();
        pitch_classes.sort_unstable();
        pitch_classes.dedup();
        Some(AccompanimentEntry {
            rhythm: slots.iter().map(|s| (s.0, s.1)).collect(),
            degrees,
            pitch_classes,
            count: 1,
            source_id: source_id.into(),
        })
    }

    pub fn density(&self) -> usize {
        self.rhythm.len()
    }

    /// Pitch classes as a 12-bit mask.
    pub fn pcs_mask(&self) -> u16 {
        self.pitch_classes.iter().fold(0, |m, &pc| m | 1 << pc)
    }

    fn validate(&self) -> Result<(), String> {
        if self.rhythm.is_empty() {
            return Err("entry has no slots".into());
        }
        if self.rhythm.len() != self.degrees.len() {
            return Err(format!(
                "{} rhythm slots but {} degrees",
                self.rhythm.len(),
                self.degrees.len()
            ));
        }
        let bar = SUBBEATS_PER_BAR;
        if let Some(&(pos, dur)) = self.rhythm.iter().find(|&&(p, d)| p >= bar || d == 0 || p + d > bar) {
            return Err(format!("slot ({pos}, {dur}) does not fit in a bar"));
        }
        if !self.degrees.contains(&0) {
            return Err("degrees must include the root (0)".into());
        }
        let mut pcs: Vec<u8> = self.degrees.iter().map(|d| d % 12).collect();
        pcs.sort_unstable();
        pcs.dedup();
        if pcs != self.pitch_classes {
            return Err(format!("pcs {:?} do not match degrees", self.pitch_classes));
        }
        if self.count == 0 {
            return Err("count must be positive".into());
        }
        Ok(())
    }
}

/// Rhythm and degrees: what makes two entries the same pattern.
type PatternKey = (Vec<(u8, u8)>, Vec<u8>);

/// Entry list plus an index by (density, pitch-class mask).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccompanimentDB {
    entries: Vec<AccompanimentEntry>,
    index: BTreeMap<(usize, u16), Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbDocument {
    entries: Vec<AccompanimentEntry>,
}

impl AccompanimentDB {
    /// Merges entries with identical rhythm and degrees, summing counts and
    /// keeping the first source id. Order of first appearance is kept.
    pub fn from_entries(entries: impl IntoIterator<Item = AccompanimentEntry>) -> Self {
        let mut merged: Vec<AccompanimentEntry> = Vec::new();
        let mut seen: HashMap<PatternKey, usize> = HashMap::new();
        for entry in entries {
            match seen.get(&(entry.rhythm.clone(), entry.degrees.clone())) {
                Some(&i) => merged[i].count += entry.count,
                None => {
                    seen.insert((entry.rhythm.clone(), entry.degrees.clone()), merged.len());
                    merged.push(entry);
                }
            }
        }
        let mut index: BTreeMap<(usize, u16), Vec<usize>> = BTreeMap::new();
        for (i, entry) in merged.iter().enumerate() {
            index.entry((entry.density(), entry.pcs_mask())).or_default().push(i);
        }
        AccompanimentDB { entries: merged, index }
    }

    pub fn entries(&self) -> &[AccompanimentEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index(&self) -> &BTreeMap<(usize, u16), Vec<usize>> {
        &self.index
    }

    /// Entries with exactly this density and pitch-class mask.
    pub fn lookup(&self, density: usize, pcs_mask: u16) -> impl Iterator<Item = &AccompanimentEntry> + '_ {
        self.index
            .get(&(density, pcs_mask))
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    pub fn to_json(&self) -> String {
        let doc = DbDocument {
            entries: self.entries.clone(),
        };
        serde_json::to_string(&doc).expect("entries serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DbmError> {
        let doc: DbDocument = serde_json::from_str(text).map_err(|e| DbmError::InvalidDatabase(e.to_string()))?;
        for (i, entry) in doc.entries.iter().enumerate() {
            entry
                .validate()
                .map_err(|e| DbmError::InvalidDatabase(format!("entry {i}: {e}")))?;
        }
        Ok(AccompanimentDB::from_entries(doc.entries))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    FewerThanTwoTracks(usize),
    Quantize(QuantizeError),
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::FewerThanTwoTracks(n) => write!(f, "needs two hand tracks, found {n}"),
            SkipReason::Quantize(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbSkip {
    pub source: String,
    pub reason: SkipReason,
}

/// Of the first two tracks with pitched notes, the one with the lower mean
/// pitch.
pub fn left_hand_track(score: &Score) -> Result<&Track, SkipReason> {
    let pitched: Vec<(&Track, f64)> = score
        .tracks()
        .iter()
        .filter_map(|t| t.mean_pitch().map(|m| (t, m)))
        .take(2)
        .collect();
    match pitched[..] {
        [(a, ma), (b, mb)] => Ok(if mb < ma { b } else { a }),
        _ => Err(SkipReason::FewerThanTwoTracks(pitched.len())),
    }
}

/// One entry per non-empty left-hand bar, before deduplication. Durations
/// are clipped at the bar line. Source ids are `<source>:<bar>`.
pub fn extract_entries(source: &str, piano: &Score) -> Result<Vec<AccompanimentEntry>, SkipReason> {
    let left = left_hand_track(piano)?;
    let notes = left.notes.iter().filter(|n| !n.is_percussion()).copied().collect();
    let hand = Score::from_notes(piano.ppq(), notes).with_time_signatures(piano.time_signatures().to_vec());
    let q = quantize(&hand).map_err(SkipReason::Quantize)?;
    Ok(q.bars()
        .iter()
        .enumerate()
        .filter_map(|(b, bar)| {
            let slots: Vec<(u8, u8, u8)> = bar
                .notes()
                .iter()
                .map(|n| (n.position, n.duration.min(SUBBEATS_PER_BAR - n.position), n.pitch))
                .collect();
            AccompanimentEntry::from_slots(&slots, format!("{source}:{b}"))
        })
        .collect())
}

/// Mines left-hand bars from hand-separated piano scores. Scores without two
/// pitched tracks or outside 4/4 are skipped and reported.
pub fn build_accomp_db<'a>(pianos: impl IntoIterator<Item = (&'a str, &'a Score)>) -> (AccompanimentDB, Vec<DbSkip>) {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (source, score) in pianos {
        match extract_entries(source, score) {
            Ok(found) => entries.extend(found),
            Err(reason) => skipped.push(DbSkip {
                source: source.to_string(),
                reason,
            }),
        }
    }
    (AccompanimentDB::from_entries(entries), skipped)
}
