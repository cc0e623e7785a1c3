use std::fmt;

use super::{Score, Track};

/// Piano files with more tracks than this are discarded.
pub const MAX_PIANO_TRACKS: usize = 3;
/// Orchestra files with fewer tracks than this are discarded.
pub const MIN_ORCHESTRA_TRACKS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Piano,
    Orchestra,
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "piano" => Ok(Role::Piano),
            "orchestra" => Ok(Role::Orchestra),
            other => Err(format!("unknown role {other:?} (expected piano or orchestra)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub path: String,
    pub role: Role,
    pub score: Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectionReason {
    TooManyPianoTracks(usize),
    TooFewOrchestraTracks(usize),
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectionReason::TooManyPianoTracks(n) => {
                write!(f, "piano file has {n} tracks (max {MAX_PIANO_TRACKS})")
            }
            RejectionReason::TooFewOrchestraTracks(n) => {
                write!(f, "orchestra file has {n} tracks (min {MIN_ORCHESTRA_TRACKS})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub path: String,
    pub reason: RejectionReason,
}

impl fmt::Display for Rejection {
    /// One line of the rejection report: `<path>\t<reason>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.path, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<CorpusFile>,
    pub rejected: Vec<Rejection>,
}

impl FilterOutcome {
    pub fn report(&self) -> String {
        self.rejected.iter().map(|r| format!("{r}\n")).collect()
    }
}

/// Applies the track-count rules. Only tracks carrying notes are counted.
pub fn filter_corpus(files: Vec<CorpusFile>) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for file in files {
        let tracks = file.score.note_track_count();
        let reason = match file.role {
            Role::Piano if tracks > MAX_PIANO_TRACKS => Some(RejectionReason::TooManyPianoTracks(tracks)),
            Role::Orchestra if tracks < MIN_ORCHESTRA_TRACKS => Some(RejectionReason::TooFewOrchestraTracks(tracks)),
            _ => None,
        };
        match reason {
            Some(reason) => outcome.rejected.push(Rejection {
                path: file.path,
                reason,
            }),
            None => outcome.kept.push(file),
        }
    }
    outcome
}

/// Collapses every pitched note into one track on channel 0. Percussion is dropped.
pub fn merge_to_single_channel(score: &Score) -> Score {
    let notes = score
        .pitched_notes()
        .map(|n| super::Note {
            channel: 0,
            track_index: 0,
            ..*n
        })
        .collect();
    Score::from_tracks(score.ppq(), vec![Track::new(notes)])
        .with_time_signatures(score.time_signatures().to_vec())
        .with_end_tick(score.end_tick())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::Note;

    fn with_tracks(n: usize) -> Score {
        let tracks = (0..n)
            .map(|i| Track::new(vec![Note::new(60 + i as u8, 0, 480)]))
            .collect();
        Score::from_tracks(480, tracks)
    }

    fn file(role: Role, tracks: usize) -> CorpusFile {
        CorpusFile {
            path: format!("{role:?}-{tracks}.mid"),
            role,
            score: with_tracks(tracks),
        }
    }

    #[test]
    fn track_count_rules() {
        let outcome = filter_corpus(vec![
            file(Role::Piano, 4),
            file(Role::Orchestra, 3),
            file(Role::Orchestra, 6),
            file(Role::Piano, 2),
        ]);
        let kept: Vec<&str> = outcome.kept.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(kept, vec!["Orchestra-6.mid", "Piano-2.mid"]);
        assert_eq!(outcome.rejected.len(), 2);
        assert_eq!(outcome.rejected[0].reason, RejectionReason::TooManyPianoTracks(4));
        assert_eq!(
            outcome.report().lines().nth(1).unwrap(),
            "Orchestra-3.mid\torchestra file has 3 tracks (min 4)"
        );
    }

    #[test]
    fn empty_tracks_do_not_count() {
        let mut score = with_tracks(3);
        score.push_track(Track::default());
        let outcome = filter_corpus(vec![CorpusFile {
            path: "x".into(),
            role: Role::Orchestra,
            score,
        }]);
        assert_eq!(outcome.rejected.len(), 1);
    }

    #[test]
    fn merge_drops_percussion_and_keeps_timing() {
        let score = Score::from_tracks(
            480,
            vec![
                Track::new(vec![Note::new(60, 480, 240).with_channel(2)]),
                Track::new(vec![Note::new(36, 0, 10).with_channel(9)]),
                Track::new(vec![Note::new(48, 0, 960).with_channel(1)]),
            ],
        );
        let merged = merge_to_single_channel(&score);
        assert_eq!(merged.tracks().len(), 1);
        let notes: Vec<(u8, u64, u64, u8)> = merged
            .notes()
            .map(|n| (n.pitch, n.onset, n.duration, n.channel))
            .collect();
        assert_eq!(notes, vec![(48, 0, 960, 0), (60, 480, 240, 0)]);
    }
}
