//! In-memory score model: notes with tick timing grouped into tracks.
//!
//! A [`Score`] is what [`parse_midi`] produces and [`write_midi`] consumes.
//! [`quantize`] snaps it onto the sixteen-position bar grid used by the
//! tokenizer, and [`filter_corpus`] / [`merge_to_single_channel`] implement
//! the corpus preparation rules.

mod corpus;
mod midi;
mod quantize;

pub use corpus::{filter_corpus, merge_to_single_channel, CorpusFile, FilterOutcome, Rejection, RejectionReason, Role};
pub use midi::{parse_midi, parse_midi_with_warnings, write_midi, MidiError, MidiErrorKind, ParseWarning};
pub use quantize::{
    dequantize, quantize, quantize_with_sources, Bar, QNote, QuantizeError, QuantizedScore, MAX_DURATION_SUBBEATS,
    SUBBEATS_PER_BAR, SUBBEATS_PER_BEAT,
};

/// Zero-based MIDI channel reserved for unpitched percussion (channel 10).
pub const PERCUSSION_CHANNEL: u8 = 9;

/// Velocity given to notes synthesized without one.
pub const DEFAULT_VELOCITY: u8 = 64;

/// Tick resolution used for every score this crate writes out.
pub const OUTPUT_PPQ: u16 = 480;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Note {
    pub pitch: u8,
    pub onset: u64,
    pub duration: u64,
    pub velocity: u8,
    pub channel: u8,
    pub track_index: usize,
}

impl Note {
    pub fn new(pitch: u8, onset: u64, duration: u64) -> Self {
        Note {
            pitch,
            onset,
            duration,
            velocity: DEFAULT_VELOCITY,
            channel: 0,
            track_index: 0,
        }
    }

    pub fn with_channel(mut self, channel: u8) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_velocity(mut self, velocity: u8) -> Self {
        self.velocity = velocity;
        self
    }

    /// Exclusive end tick.
    pub fn end(&self) -> u64 {
        self.onset + self.duration
    }

    pub fn is_percussion(&self) -> bool {
        self.channel == PERCUSSION_CHANNEL
    }

    /// Whether the half-open intervals `[onset, end)` of the two notes intersect.
    pub fn overlaps(&self, other: &Note) -> bool {
        self.onset < other.end() && other.onset < self.end()
    }

    fn sort_key(&self) -> (u64, u8, u64, u8, u8) {
        (self.onset, self.pitch, self.duration, self.channel, self.velocity)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Track {
    pub name: Option<String>,
    pub notes: Vec<Note>,
}

impl Track {
    pub fn new(notes: Vec<Note>) -> Self {
        Track { name: None, notes }
    }

    pub fn named(name: impl Into<String>, notes: Vec<Note>) -> Self {
        Track {
            name: Some(name.into()),
            notes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Mean pitch over the track's pitched notes.
    pub fn mean_pitch(&self) -> Option<f64> {
        let pitched: Vec<f64> = self
            .notes
            .iter()
            .filter(|n| !n.is_percussion())
            .map(|n| f64::from(n.pitch))
            .collect();
        if pitched.is_empty() {
            None
        } else {
            Some(pitched.iter().sum::<f64>() / pitched.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub tick: u64,
    pub numerator: u8,
    pub denominator: u8,
}

impl TimeSignature {
    pub fn common_time(tick: u64) -> Self {
        TimeSignature {
            tick,
            numerator: 4,
            denominator: 4,
        }
    }

    pub fn is_common_time(&self) -> bool {
        self.numerator == 4 && self.denominator == 4
    }
}

/// A multi-track score with tick timing.
///
/// Construction normalizes the invariants: notes are sorted by
/// `(onset, pitch)` within each track and every note's `track_index` names
/// the track it lives in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    ppq: u16,
    tracks: Vec<Track>,
    time_signatures: Vec<TimeSignature>,
    end_tick: u64,
}

impl Score {
    pub fn new(ppq: u16) -> Self {
        assert!(ppq > 0, "ppq must be positive");
        Score {
            ppq,
            tracks: Vec::new(),
            time_signatures: Vec::new(),
            end_tick: 0,
        }
    }

    pub fn from_tracks(ppq: u16, tracks: Vec<Track>) -> Self {
        let mut score = Score::new(ppq);
        for track in tracks {
            score.push_track(track);
        }
        score
    }

    /// Single-track score from loose notes.
    pub fn from_notes(ppq: u16, notes: Vec<Note>) -> Self {
        Score::from_tracks(ppq, vec![Track::new(notes)])
    }

    pub fn push_track(&mut self, mut track: Track) {
        let index = self.tracks.len();
        for note in &mut track.notes {
            note.track_index = index;
        }
        track.notes.sort_by_key(Note::sort_key);
        self.tracks.push(track);
    }

    pub fn with_time_signatures(mut self, mut signatures: Vec<TimeSignature>) -> Self {
        signatures.sort_by_key(|ts| ts.tick);
        signatures.dedup();
        self.time_signatures = signatures;
        self
    }

    /// Sets the explicit end-of-piece marker. Notes may sustain past it.
    pub fn with_end_tick(mut self, end_tick: u64) -> Self {
        self.end_tick = end_tick;
        self
    }

    pub fn ppq(&self) -> u16 {
        self.ppq
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn time_signatures(&self) -> &[TimeSignature] {
        &self.time_signatures
    }

    pub fn end_tick(&self) -> u64 {
        self.end_tick
    }

    /// Ticks per 4/4 bar.
    pub fn bar_ticks(&self) -> u64 {
        u64::from(self.ppq) * 4
    }

    /// Last tick at which anything sounds or the end marker, whichever is later.
    pub fn extent(&self) -> u64 {
        self.notes().map(|n| n.end()).max().unwrap_or(0).max(self.end_tick)
    }

    pub fn notes(&self) -> impl Iterator<Item = &Note> + '_ {
        self.tracks.iter().flat_map(|t| t.notes.iter())
    }

    pub fn pitched_notes(&self) -> impl Iterator<Item = &Note> + '_ {
        self.notes().filter(|n| !n.is_percussion())
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(|t| t.notes.len()).sum()
    }

    /// Number of tracks that carry at least one note.
    pub fn note_track_count(&self) -> usize {
        self.tracks.iter().filter(|t| !t.is_empty()).count()
    }

    pub fn is_common_time(&self) -> bool {
        self.time_signatures.iter().all(TimeSignature::is_common_time)
    }

    /// Lowest and highest pitched note, if any.
    pub fn pitch_bounds(&self) -> Option<(u8, u8)> {
        let mut pitches = self.pitched_notes().map(|n| n.pitch);
        let first = pitches.next()?;
        Some(pitches.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p))))
    }

    /// Re-expresses all timing at a new tick resolution, rounding to the
    /// nearest tick. Durations never collapse below one tick.
    pub fn rescaled(&self, ppq: u16) -> Score {
        if ppq == self.ppq {
            return self.clone();
        }
        let scale = |t: u64| rescale_tick(t, self.ppq, ppq);
        let tracks = self
            .tracks
            .iter()
            .map(|t| Track {
                name: t.name.clone(),
                notes: t
                    .notes
                    .iter()
                    .map(|n| {
                        let onset = scale(n.onset);
                        let end = scale(n.end()).max(onset + 1);
                        Note {
                            onset,
                            duration: end - onset,
                            ..*n
                        }
                    })
                    .collect(),
            })
            .collect();
        let signatures = self
            .time_signatures
            .iter()
            .map(|ts| TimeSignature {
                tick: scale(ts.tick),
                ..*ts
            })
            .collect();
        Score::from_tracks(ppq, tracks)
            .with_time_signatures(signatures)
            .with_end_tick(scale(self.end_tick))
    }
}

fn rescale_tick(tick: u64, from: u16, to: u16) -> u64 {
    let num = u128::from(tick) * u128::from(to) * 2 + u128::from(from);
    (num / (u128::from(from) * 2)) as u64
}
