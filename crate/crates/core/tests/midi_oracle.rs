//! The hand-written SMF reader checked against `midly` as an independent decoder.

use std::collections::{HashMap, VecDeque};

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use proptest::prelude::*;

use reda::score::{parse_midi, write_midi, Note, Score, TimeSignature, Track};

type NoteKey = (u8, u64, u64, u8, u8);

fn key(n: &Note) -> NoteKey {
    (n.pitch, n.onset, n.duration, n.channel, n.velocity)
}

/// Notes per track as decoded from midly's event stream: FIFO pairing per
/// (channel, key), zero-length notes dropped, dangling notes closed at the
/// end of their track.
fn oracle_notes(bytes: &[u8]) -> Vec<Vec<NoteKey>> {
    let smf = Smf::parse(bytes).expect("midly accepts the file");
    smf.tracks
        .iter()
        .map(|events| {
            let mut tick = 0u64;
            let mut pending: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();
            let mut notes = Vec::new();
            let close = |notes: &mut Vec<NoteKey>, ch: u8, key: u8, onset: u64, vel: u8, at: u64| {
                if at > onset {
                    notes.push((key, onset, at - onset, ch, vel));
                }
            };
            for ev in events {
                tick += u64::from(ev.delta.as_int());
                if let TrackEventKind::Midi { channel, message } = ev.kind {
                    let ch = channel.as_int();
                    match message {
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                            pending
                                .entry((ch, key.as_int()))
                                .or_default()
                                .push_back((tick, vel.as_int()));
                        }
                        MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                            if let Some((onset, vel)) =
                                pending.get_mut(&(ch, key.as_int())).and_then(VecDeque::pop_front)
                            {
                                close(&mut notes, ch, key.as_int(), onset, vel, tick);
                            }
                        }
                        _ => {}
                    }
                }
                if matches!(ev.kind, TrackEventKind::Meta(MetaMessage::EndOfTrack)) {
                    break;
                }
            }
            for ((ch, key), queue) in pending {
                for (onset, vel) in queue {
                    close(&mut notes, ch, key, onset, vel, tick);
                }
            }
            notes.sort();
            notes
        })
        .collect()
}

fn ours(score: &Score) -> Vec<Vec<NoteKey>> {
    score
        .tracks()
        .iter()
        .map(|t| {
            let mut notes: Vec<NoteKey> = t.notes.iter().map(key).collect();
            notes.sort();
            notes
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Ev {
    On(u8, u8, u8),
    Off(u8, u8),
    Controller(u8, u8),
    Program(u8),
    TimeSig(u8, u8),
}

fn arb_event() -> impl Strategy<Value = (u32, Ev)> {
    let ev = prop_oneof![
        4 => (0u8..3, 58u8..66, 0u8..128).prop_map(|(c, k, v)| Ev::On(c, k, v)),
        4 => (0u8..3, 58u8..66).prop_map(|(c, k)| Ev::Off(c, k)),
        1 => (0u8..3, 0u8..128).prop_map(|(c, v)| Ev::Controller(c, v)),
        1 => (0u8..16).prop_map(Ev::Program),
        1 => (1u8..13, 1u8..4).prop_map(|(n, d)| Ev::TimeSig(n, d)),
    ];
    (prop_oneof![Just(0u32), 1u32..200, 1000u32..20_000], ev)
}

fn build(ppq: u16, tracks: &[Vec<(u32, Ev)>]) -> Vec<u8> {
    let tracks: Vec<Vec<TrackEvent>> = tracks
        .iter()
        .map(|events| {
            let mut out: Vec<TrackEvent> = events
                .iter()
                .map(|(delta, ev)| {
                    let kind = match *ev {
                        Ev::On(c, k, v) => TrackEventKind::Midi {
                            channel: u4::new(c),
                            message: MidiMessage::NoteOn {
                                key: u7::new(k),
                                vel: u7::new(v),
                            },
                        },
                        Ev::Off(c, k) => TrackEventKind::Midi {
                            channel: u4::new(c),
                            message: MidiMessage::NoteOff {
                                key: u7::new(k),
                                vel: u7::new(64),
                            },
                        },
                        Ev::Controller(c, v) => TrackEventKind::Midi {
                            channel: u4::new(c),
                            message: MidiMessage::Controller {
                                controller: u7::new(7),
                                value: u7::new(v),
                            },
                        },
                        Ev::Program(p) => TrackEventKind::Midi {
                            channel: u4::new(0),
                            message: MidiMessage::ProgramChange { program: u7::new(p) },
                        },
                        Ev::TimeSig(n, d) => TrackEventKind::Meta(MetaMessage::TimeSignature(n, d, 24, 8)),
                    };
                    TrackEvent {
                        delta: u28::new(*delta),
                        kind,
                    }
                })
                .collect();
            out.insert(
                0,
                TrackEvent {
                    delta: u28::new(0),
                    kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(500_000))),
                },
            );
            out.push(TrackEvent {
                delta: u28::new(0),
                kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
            });
            out
        })
        .collect();
    let smf = Smf {
        header: Header::new(Format::Parallel, Timing::Metrical(u15::new(ppq))),
        tracks,
    };
    let mut bytes = Vec::new();
    smf.write_std(&mut bytes).expect("in-memory write");
    bytes
}

fn arb_track_notes() -> impl Strategy<Value = Vec<Note>> {
    // distinct (channel, pitch) per note so pairing is unambiguous
    prop::collection::btree_map((0u8..16, 0u8..128), (0u64..5000, 1u64..2000, 1u8..128), 0..24).prop_map(|m| {
        m.into_iter()
            .map(|((ch, p), (on, dur, vel))| Note::new(p, on, dur).with_channel(ch).with_velocity(vel))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reader_agrees_with_midly(
        ppq in 1u16..2000,
        tracks in prop::collection::vec(prop::collection::vec(arb_event(), 0..40), 1..4),
    ) {
        let bytes = build(ppq, &tracks);
        let score = parse_midi(&bytes).unwrap();
        prop_assert_eq!(score.ppq(), ppq);
        prop_assert_eq!(ours(&score), oracle_notes(&bytes));

        let expected: Vec<(u64, u8, u8)> = {
            let smf = Smf::parse(&bytes).unwrap();
            let mut sigs = Vec::new();
            for events in &smf.tracks {
                let mut tick = 0u64;
                for ev in events {
                    tick += u64::from(ev.delta.as_int());
                    if let TrackEventKind::Meta(MetaMessage::TimeSignature(n, d, _, _)) = ev.kind {
                        sigs.push((tick, n, 1u8 << d));
                    }
                }
            }
            sigs.sort();
            sigs.dedup();
            sigs
        };
        let got: Vec<(u64, u8, u8)> = score.time_signatures().iter().map(|t| (t.tick, t.numerator, t.denominator)).collect();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        prop_assert_eq!(got_sorted, expected);
    }

    #[test]
    fn writer_output_decodes_identically_in_midly(
        ppq in 1u16..2000,
        tracks in prop::collection::vec(arb_track_notes(), 0..4),
        end in 0u64..10_000,
    ) {
        let score = Score::from_tracks(ppq, tracks.into_iter().map(Track::new).collect())
            .with_time_signatures(vec![TimeSignature::common_time(0)])
            .with_end_tick(end);
        let bytes = write_midi(&score);
        let oracle = oracle_notes(&bytes);
        let mut expected = ours(&score);
        if expected.is_empty() {
            expected.push(Vec::new());
        }
        prop_assert_eq!(&oracle, &expected);

        let back = parse_midi(&bytes).unwrap();
        let mut round = ours(&back);
        if round.is_empty() {
            round.push(Vec::new());
        }
        prop_assert_eq!(round, expected);
        prop_assert_eq!(back.time_signatures(), score.time_signatures());
        prop_assert_eq!(back.end_tick(), score.end_tick().max(score.notes().map(Note::end).max().unwrap_or(0)));
    }
}

#[test]
fn running_status_and_note_on_zero() {
    // one track: note-on, running-status note-on with velocity 0 as release
    let track: &[u8] = &[0x00, 0x90, 60, 100, 0x60, 60, 0, 0x00, 0xFF, 0x2F, 0x00];
    let mut bytes = b"MThd\0\0\0\x06\0\0\0\x01\x00\x60MTrk".to_vec();
    bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
    bytes.extend_from_slice(track);
    let score = parse_midi(&bytes).unwrap();
    assert_eq!(ours(&score), oracle_notes(&bytes));
    assert_eq!(ours(&score), vec![vec![(60, 0, 96, 0, 100)]]);
}
