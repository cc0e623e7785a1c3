//! Standard MIDI File reader and writer.
//!
//! The reader accepts format 0 and 1 files with metrical (PPQ) timing and
//! resolves note-on/note-off pairs into [`Note`]s. Same-pitch overlaps on one
//! channel are closed first-in-first-out. The writer always emits format 1.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use super::{Note, Score, TimeSignature, Track};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid MIDI data at byte {offset}: {kind}")]
pub struct MidiError {
    pub offset: usize,
    pub kind: MidiErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MidiErrorKind {
    UnexpectedEof,
    BadChunkId { expected: [u8; 4], found: [u8; 4] },
    BadHeaderLength(u32),
    UnsupportedFormat(u16),
    SmpteTiming,
    ZeroDivision,
    VarLenTooLong,
    MissingRunningStatus,
    InvalidDataByte(u8),
    InvalidStatus(u8),
}

impl fmt::Display for MidiErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MidiErrorKind::UnexpectedEof => write!(f, "unexpected end of data"),
            MidiErrorKind::BadChunkId { expected, found } => write!(
                f,
                "expected chunk {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            ),
            MidiErrorKind::BadHeaderLength(len) => write!(f, "header chunk length {len} < 6"),
            MidiErrorKind::UnsupportedFormat(fmt) => write!(f, "unsupported SMF format {fmt}"),
            MidiErrorKind::SmpteTiming => write!(f, "SMPTE time division is not supported"),
            MidiErrorKind::ZeroDivision => write!(f, "ticks per quarter note is zero"),
            MidiErrorKind::VarLenTooLong => write!(f, "variable-length quantity exceeds 4 bytes"),
            MidiErrorKind::MissingRunningStatus => write!(f, "data byte without running status"),
            MidiErrorKind::InvalidDataByte(b) => write!(f, "data byte {b:#04x} has the high bit set"),
            MidiErrorKind::InvalidStatus(b) => write!(f, "status byte {b:#04x} is not allowed in a file"),
        }
    }
}

/// Non-fatal irregularities found while reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// Note-on never released; closed at the end of its track.
    DanglingNote {
        track: usize,
        channel: u8,
        pitch: u8,
        onset: u64,
    },
    /// Note-off without a pending note-on.
    UnmatchedNoteOff {
        track: usize,
        channel: u8,
        pitch: u8,
        tick: u64,
    },
    /// Note released on the tick it started; dropped.
    ZeroLengthNote {
        track: usize,
        channel: u8,
        pitch: u8,
        tick: u64,
    },
    /// Header announced a different number of track chunks.
    TrackCountMismatch { declared: u16, found: usize },
}

pub fn parse_midi(bytes: &[u8]) -> Result<Score, MidiError> {
    parse_midi_with_warnings(bytes).map(|(score, _)| score)
}

pub fn parse_midi_with_warnings(bytes: &[u8]) -> Result<(Score, Vec<ParseWarning>), MidiError> {
    let mut cur = Cursor::new(bytes);
    let mut warnings = Vec::new();

    cur.expect_id(b"MThd")?;
    let header_len = cur.u32()?;
    if header_len < 6 {
        return Err(cur.error_at(cur.pos - 4, MidiErrorKind::BadHeaderLength(header_len)));
    }
    let format_at = cur.pos;
    let format = cur.u16()?;
    if format > 1 {
        return Err(cur.error_at(format_at, MidiErrorKind::UnsupportedFormat(format)));
    }
    let declared_tracks = cur.u16()?;
    let division_at = cur.pos;
    let division = cur.u16()?;
    if division & 0x8000 != 0 {
        return Err(cur.error_at(division_at, MidiErrorKind::SmpteTiming));
    }
    if division == 0 {
        return Err(cur.error_at(division_at, MidiErrorKind::ZeroDivision));
    }
    cur.skip(header_len as usize - 6)?;

    let mut tracks = Vec::new();
    let mut signatures = Vec::new();
    let mut end_tick = 0u64;
    while !cur.at_end() {
        let chunk_at = cur.pos;
        let id = cur.array4()?;
        let len = cur.u32()? as usize;
        if cur.remaining() < len {
            return Err(cur.error_at(chunk_at, MidiErrorKind::UnexpectedEof));
        }
        let body_at = cur.pos;
        cur.skip(len)?;
        if &id != b"MTrk" {
            continue;
        }
        let parsed = parse_track(&bytes[body_at..body_at + len], body_at, tracks.len(), &mut warnings)?;
        signatures.extend(parsed.signatures);
        end_tick = end_tick.max(parsed.end_tick);
        tracks.push(Track {
            name: parsed.name,
            notes: parsed.notes,
        });
    }
    if tracks.len() != usize::from(declared_tracks) {
        warnings.push(ParseWarning::TrackCountMismatch {
            declared: declared_tracks,
            found: tracks.len(),
        });
    }

    let score = Score::from_tracks(division, tracks)
        .with_time_signatures(signatures)
        .with_end_tick(end_tick);
    Ok((score, warnings))
}

struct ParsedTrack {
    name: Option<String>,
    notes: Vec<Note>,
    signatures: Vec<TimeSignature>,
    end_tick: u64,
}

fn parse_track(
    data: &[u8],
    base: usize,
    track: usize,
    warnings: &mut Vec<ParseWarning>,
) -> Result<ParsedTrack, MidiError> {
    let mut cur = Cursor::with_base(data, base);
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut pending: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();
    let mut out = ParsedTrack {
        name: None,
        notes: Vec::new(),
        signatures: Vec::new(),
        end_tick: 0,
    };

    while !cur.at_end() {
        tick = tick.saturating_add(u64::from(cur.var_len()?));
        let status_at = cur.pos;
        let first = cur.u8()?;
        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            match running {
                Some(s) => (s, Some(first)),
                None => return Err(cur.error_at(status_at, MidiErrorKind::MissingRunningStatus)),
            }
        };

        match status {
            0x80..=0xEF => {
                running = Some(status);
                let a = match first_data {
                    Some(b) => b,
                    None => cur.data_byte()?,
                };
                let kind = status & 0xF0;
                let b = if kind == 0xC0 || kind == 0xD0 {
                    0
                } else {
                    cur.data_byte()?
                };
                let channel = status & 0x0F;
                match kind {
                    0x90 if b > 0 => {
                        pending.entry((channel, a)).or_default().push_back((tick, b));
                    }
                    0x80 | 0x90 => match pending.get_mut(&(channel, a)).and_then(VecDeque::pop_front) {
                        Some((onset, velocity)) if tick > onset => out.notes.push(Note {
                            pitch: a,
                            onset,
                            duration: tick - onset,
                            velocity,
                            channel,
                            track_index: track,
                        }),
                        Some(_) => warnings.push(ParseWarning::ZeroLengthNote {
                            track,
                            channel,
                            pitch: a,
                            tick,
                        }),
                        None => warnings.push(ParseWarning::UnmatchedNoteOff {
                            track,
                            channel,
                            pitch: a,
                            tick,
                        }),
                    },
                    _ => {}
                }
            }
            0xFF => {
                let meta_type = cur.u8()?;
                let len = cur.var_len()? as usize;
                let body = cur.take(len)?;
                match meta_type {
                    0x2F => {
                        out.end_tick = tick;
                        break;
                    }
                    0x03 if out.name.is_none() => {
                        out.name = Some(String::from_utf8_lossy(body).into_owned());
                    }
                    0x58 if body.len() >= 2 => out.signatures.push(TimeSignature {
                        tick,
                        numerator: body[0],
                        denominator: 1u8.checked_shl(u32::from(body[1])).unwrap_or(0),
                    }),
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = cur.var_len()? as usize;
                cur.skip(len)?;
            }
            other => return Err(cur.error_at(status_at, MidiErrorKind::InvalidStatus(other))),
        }
    }
    out.end_tick = out.end_tick.max(tick);

    let mut dangling: Vec<((u8, u8), (u64, u8))> = pending
        .into_iter()
        .flat_map(|(key, queue)| queue.into_iter().map(move |entry| (key, entry)))
        .collect();
    dangling.sort();
    for ((channel, pitch), (onset, velocity)) in dangling {
        warnings.push(ParseWarning::DanglingNote {
            track,
            channel,
            pitch,
            onset,
        });
        if out.end_tick > onset {
            out.notes.push(Note {
                pitch,
                onset,
                duration: out.end_tick - onset,
                velocity,
                channel,
                track_index: track,
            });
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor::with_base(data, 0)
    }

    fn with_base(data: &'a [u8], base: usize) -> Self {
        Cursor { data, pos: 0, base }
    }

    fn error_at(&self, pos: usize, kind: MidiErrorKind) -> MidiError {
        MidiError {
            offset: self.base + pos,
            kind,
        }
    }

    fn eof(&self) -> MidiError {
        self.error_at(self.pos, MidiErrorKind::UnexpectedEof)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.data.len()
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.remaining() < n {
            return Err(self.eof());
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn skip(&mut self, n: usize) -> Result<(), MidiError> {
        self.take(n).map(|_| ())
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        Ok(self.take(1)?[0])
    }

    fn data_byte(&mut self) -> Result<u8, MidiError> {
        let at = self.pos;
        let b = self.u8()?;
        if b & 0x80 != 0 {
            return Err(self.error_at(at, MidiErrorKind::InvalidDataByte(b)));
        }
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn array4(&mut self) -> Result<[u8; 4], MidiError> {
        let b = self.take(4)?;
        Ok([b[0], b[1], b[2], b[3]])
    }

    fn expect_id(&mut self, expected: &[u8; 4]) -> Result<(), MidiError> {
        let at = self.pos;
        let found = self.array4()?;
        if &found != expected {
            return Err(self.error_at(
                at,
                MidiErrorKind::BadChunkId {
                    expected: *expected,
                    found,
                },
            ));
        }
        Ok(())
    }

    fn var_len(&mut self) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(self.error_at(start, MidiErrorKind::VarLenTooLong))
    }
}

/// Serializes a score as a format-1 SMF at the score's own resolution.
///
/// Time signatures and the end-of-track marker go into the first track.
/// An empty score still produces one (empty) track chunk.
pub fn write_midi(score: &Score) -> Vec<u8> {
    let track_count = score.tracks().len().max(1);
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(track_count.min(usize::from(u16::MAX)) as u16).to_be_bytes());
    out.extend_from_slice(&score.ppq().to_be_bytes());

    let empty = Track::default();
    for index in 0..track_count {
        let track = score.tracks().get(index).unwrap_or(&empty);
        let body = encode_track(score, track, index == 0);
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    out
}

fn encode_track(score: &Score, track: &Track, first: bool) -> Vec<u8> {
    // (tick, class, bytes); class orders meta < note-off < note-on within a tick
    let mut events: Vec<(u64, u8, Vec<u8>)> = Vec::new();
    if let Some(name) = &track.name {
        let mut bytes = vec![0xFF, 0x03];
        push_var_len(&mut bytes, name.len() as u32);
        bytes.extend_from_slice(name.as_bytes());
        events.push((0, 0, bytes));
    }
    if first {
        for ts in score.time_signatures() {
            let exponent = ts.denominator.max(1).ilog2() as u8;
            events.push((ts.tick, 0, vec![0xFF, 0x58, 0x04, ts.numerator, exponent, 24, 8]));
        }
    }
    for note in &track.notes {
        let channel = note.channel & 0x0F;
        let pitch = note.pitch & 0x7F;
        events.push((note.onset, 2, vec![0x90 | channel, pitch, note.velocity.clamp(1, 127)]));
        events.push((note.end(), 1, vec![0x80 | channel, pitch, 0x40]));
    }
    events.sort_by_key(|(tick, class, _)| (*tick, *class));

    let mut body = Vec::new();
    let mut last = 0u64;
    for (tick, _, bytes) in &events {
        push_var_len(&mut body, delta(*tick, last));
        body.extend_from_slice(bytes);
        last = *tick;
    }
    let end = if first { score.end_tick().max(last) } else { last };
    push_var_len(&mut body, delta(end, last));
    body.extend_from_slice(&[0xFF, 0x2F, 0x00]);
    body
}

fn delta(tick: u64, last: u64) -> u32 {
    // a single delta cannot exceed the 28-bit VLQ range
    (tick - last).min(0x0FFF_FFFF) as u32
}

fn push_var_len(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut i = 3;
    buf[i] = (value & 0x7F) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = ((value & 0x7F) as u8) | 0x80;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smf(format: u16, division: u16, tracks: &[&[u8]]) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&division.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    #[test]
    fn single_quarter_note() {
        // delta 0 note-on C4, delta 480 (0x83 0x60) note-off, end of track
        let track = [0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00];
        let score = parse_midi(&smf(0, 480, &[&track])).unwrap();
        assert_eq!(score.ppq(), 480);
        let note = score.tracks()[0].notes[0];
        assert_eq!((note.pitch, note.onset, note.duration), (60, 0, 480));
        assert_eq!(note.velocity, 100);
    }

    #[test]
    fn running_status_and_velocity_zero_release() {
        let track = [
            0x00, 0x90, 60, 90, 0x60, 64, 90, 0x60, 60, 0, 0x00, 64, 0, 0x00, 0xFF, 0x2F, 0x00,
        ];
        let score = parse_midi(&smf(0, 96, &[&track])).unwrap();
        let notes: Vec<(u8, u64, u64)> = score.tracks()[0]
            .notes
            .iter()
            .map(|n| (n.pitch, n.onset, n.duration))
            .collect();
        assert_eq!(notes, vec![(60, 0, 192), (64, 96, 96)]);
    }

    #[test]
    fn overlapping_same_pitch_closes_first_in_first_out() {
        // on@0, on@240, off@480, off@960
        let track = [
            0x00, 0x90, 60, 80, 0x81, 0x70, 0x90, 60, 81, 0x81, 0x70, 0x80, 60, 0, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF,
            0x2F, 0x00,
        ];
        let score = parse_midi(&smf(0, 480, &[&track])).unwrap();
        let notes = &score.tracks()[0].notes;
        assert_eq!((notes[0].onset, notes[0].duration, notes[0].velocity), (0, 480, 80));
        assert_eq!((notes[1].onset, notes[1].duration, notes[1].velocity), (240, 720, 81));
    }

    #[test]
    fn dangling_note_closed_at_track_end() {
        let track = [0x00, 0x90, 60, 80, 0x83, 0x60, 0xFF, 0x2F, 0x00];
        let (score, warnings) = parse_midi_with_warnings(&smf(1, 480, &[&track])).unwrap();
        assert_eq!(score.tracks()[0].notes[0].duration, 480);
        assert!(matches!(warnings[0], ParseWarning::DanglingNote { pitch: 60, .. }));
    }

    #[test]
    fn truncated_chunk_reports_offset() {
        let track = [0x00, 0x90, 60, 80, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00];
        let mut bytes = smf(0, 480, &[&track]);
        bytes.truncate(bytes.len() - 4);
        let err = parse_midi(&bytes).unwrap_err();
        assert_eq!(err.kind, MidiErrorKind::UnexpectedEof);
        assert_eq!(err.offset, 14);
    }

    #[test]
    fn rejects_smpte_and_bad_magic() {
        let err = parse_midi(&smf(0, 0xE728, &[])).unwrap_err();
        assert_eq!(err.kind, MidiErrorKind::SmpteTiming);
        assert_eq!(err.offset, 12);
        let err = parse_midi(b"RIFF\0\0\0\x06").unwrap_err();
        assert!(matches!(err.kind, MidiErrorKind::BadChunkId { .. }));
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn missing_running_status_is_an_error() {
        let track = [0x00, 60, 80];
        let err = parse_midi(&smf(0, 480, &[&track])).unwrap_err();
        assert_eq!(err.kind, MidiErrorKind::MissingRunningStatus);
        assert_eq!(err.offset, 14 + 8 + 1);
    }

    #[test]
    fn empty_score_writes_valid_file() {
        let bytes = write_midi(&Score::new(480));
        let score = parse_midi(&bytes).unwrap();
        assert_eq!(score.note_count(), 0);
        assert_eq!(score.tracks().len(), 1);
    }

    #[test]
    fn var_len_encoding() {
        for (value, expected) in [
            (0u32, vec![0x00]),
            (0x7F, vec![0x7F]),
            (0x80, vec![0x81, 0x00]),
            (0x3FFF, vec![0xFF, 0x7F]),
            (0x0FFF_FFFF, vec![0xFF, 0xFF, 0xFF, 0x7F]),
        ] {
            let mut out = Vec::new();
            push_var_len(&mut out, value);
            assert_eq!(out, expected);
            assert_eq!(Cursor::new(&out).var_len().unwrap(), value);
        }
    }

    #[test]
    fn time_signature_round_trip() {
        let score = Score::from_notes(480, vec![Note::new(60, 0, 480)])
            .with_time_signatures(vec![
                TimeSignature::common_time(0),
                TimeSignature {
                    tick: 1920,
                    numerator: 3,
                    denominator: 8,
                },
            ])
            .with_end_tick(3840);
        let back = parse_midi(&write_midi(&score)).unwrap();
        assert_eq!(back, score);
    }
}
