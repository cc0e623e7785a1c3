#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reda::score::{Bar, Note, QNote, QuantizedScore, Score, TimeSignature, Track};

pub const PPQ: u16 = 480;
pub const BEAT: u64 = PPQ as u64;
pub const BAR: u64 = 4 * BEAT;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Triad pitch classes per bar: (root, third, fifth).
pub fn progression(seed: u64, bars: usize) -> Vec<[u8; 3]> {
    const DEGREES: [[u8; 3]; 6] = [[0, 4, 7], [5, 9, 0], [7, 11, 2], [9, 0, 4], [2, 5, 9], [4, 7, 11]];
    let mut rng = rng(seed);
    let key = rng.random_range(0..12u8);
    (0..bars)
        .map(|bar| {
            let degree = if bar == 0 || bar + 1 == bars {
                DEGREES[0]
            } else {
                DEGREES[rng.random_range(0..DEGREES.len())]
            };
            degree.map(|pc| (pc + key) % 12)
        })
        .collect()
}

/// Lowest pitch of class `pc` at or above `floor`.
pub fn at_or_above(pc: u8, floor: u8) -> u8 {
    floor + (pc + 12 - floor % 12) % 12
}

fn common_time(score: Score, bars: usize) -> Score {
    score
        .with_time_signatures(vec![TimeSignature::common_time(0)])
        .with_end_tick(bars as u64 * BAR)
}

/// Five-part 4/4 texture over a diatonic progression: a running melody,
/// two sustained inner voices, a cello on roots and a walking bass.
pub fn orchestra_fixture(seed: u64) -> Score {
    let bars = 8;
    let chords = progression(seed, bars);
    let mut rng = rng(seed ^ 0x5eed);
    let (mut melody, mut second, mut viola, mut cello, mut bass) = (vec![], vec![], vec![], vec![], vec![]);
    for (bar, chord) in chords.iter().enumerate() {
        let start = bar as u64 * BAR;
        let mut tick = 0;
        while tick < BAR {
            let len = if rng.random_bool(0.5) { BEAT } else { BEAT / 2 };
            let pc = chord[rng.random_range(0..3)];
            melody.push(Note::new(at_or_above(pc, 72), start + tick, len));
            tick += len;
        }
        for half in 0..2 {
            let onset = start + half * 2 * BEAT;
            second.push(Note::new(at_or_above(chord[1], 62), onset, 2 * BEAT).with_channel(1));
            viola.push(Note::new(at_or_above(chord[2], 55), onset, 2 * BEAT).with_channel(2));
        }
        cello.push(Note::new(at_or_above(chord[0], 48), start, BAR).with_channel(3));
        for beat in 0..4 {
            let pc = if beat % 2 == 0 { chord[0] } else { chord[2] };
            bass.push(Note::new(at_or_above(pc, 36), start + beat * BEAT, BEAT).with_channel(4));
        }
    }
    let tracks = vec![
        Track::named("Flute", melody),
        Track::named("Violin II", second),
        Track::named("Viola", viola),
        Track::named("Cello", cello),
        Track::named("Contrabass", bass),
    ];
    common_time(Score::from_tracks(PPQ, tracks), bars)
}

/// Two-hand piano texture: block chords in the right hand and one of three
/// left-hand figures.
pub fn piano_fixture(seed: u64) -> Score {
    let bars = 8;
    let chords = progression(seed, bars);
    let figure = seed % 3;
    let (mut right, mut left) = (vec![], vec![]);
    for (bar, chord) in chords.iter().enumerate() {
        let start = bar as u64 * BAR;
        for half in 0..2 {
            for pc in chord {
                right.push(Note::new(at_or_above(*pc, 60), start + half * 2 * BEAT, 2 * BEAT));
            }
        }
        let root = at_or_above(chord[0], 36);
        let fifth = at_or_above(chord[2], root);
        let third = at_or_above(chord[1], root);
        let hits: Vec<(u64, u8, u64)> = match figure {
            0 => vec![
                (0, root, BEAT),
                (BEAT, fifth, BEAT),
                (2 * BEAT, root + 12, BEAT),
                (3 * BEAT, fifth, BEAT),
            ],
            1 => vec![(0, root, BAR), (0, fifth, BAR)],
            _ => (0..8)
                .map(|i| (i * BEAT / 2, [root, fifth, third, fifth][i as usize % 4], BEAT / 2))
                .collect(),
        };
        left.extend(
            hits.into_iter()
                .map(|(at, p, len)| Note::new(p, start + at, len).with_channel(1)),
        );
    }
    let tracks = vec![Track::named("Right Hand", right), Track::named("Left Hand", left)];
    common_time(Score::from_tracks(PPQ, tracks), bars)
}

/// Random grid content with roughly a quarter of the bars left empty; the
/// final bar is always empty so trailing silence is exercised too.
pub fn quantized_fixture(seed: u64) -> QuantizedScore {
    let mut rng = rng(seed);
    let bar_count = rng.random_range(3..12);
    let bars = (0..bar_count)
        .map(|i| {
            if i + 1 == bar_count || rng.random_bool(0.25) {
                return Bar::empty();
            }
            let count = rng.random_range(1..10);
            Bar::new(
                (0..count)
                    .map(|_| {
                        QNote::new(
                            rng.random_range(0..16),
                            rng.random_range(22..=107),
                            rng.random_range(1..=16),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    QuantizedScore::new(bars)
}

/// `bars` bars where every odd bar is silent.
pub fn alternating_empty(bars: usize) -> QuantizedScore {
    QuantizedScore::new(
        (0..bars)
            .map(|i| {
                if i % 2 == 1 {
                    Bar::empty()
                } else {
                    Bar::new(vec![QNote::new(0, 60 + (i % 12) as u8, 4), QNote::new(8, 67, 8)])
                }
            })
            .collect(),
    )
}

/// Random polyphony on an arbitrary tick grid.
pub fn random_notes(rng: &mut impl Rng, count: usize, span: u64, max_len: u64) -> Vec<Note> {
    (0..count)
        .map(|_| {
            Note::new(
                rng.random_range(30..100),
                rng.random_range(0..span),
                rng.random_range(1..=max_len),
            )
        })
        .collect()
}
