//! Compound-word tokens: one four-field token per note.
//!
//! Fields are `(same_bar, position, pitch, duration)`. `same_bar` is 1 when
//! the note shares a bar with the previous token and 0 for the first token
//! of a bar. A bar without notes is written as a single ⟨ABS⟩ token so that
//! empty bars survive a round trip.

mod jsonl;
mod vocab;

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

use crate::score::{Bar, QNote, QuantizedScore};

pub use jsonl::{
    decode_token, encode_tokens, parse_jsonl, parse_token_records, write_token_records, JsonlError, RawToken,
    TokenRecord,
};
pub use vocab::{
    vocab_spec, Dimension, Special, VocabSpec, BAR_VOCAB, DURATION_VOCAB, PITCH_MAX, PITCH_OFFSET, PITCH_VOCAB,
    POSITION_VOCAB, REGULAR_SIZES, SPECIAL_COUNT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoteToken {
    pub same_bar: bool,
    pub position: u8,
    /// MIDI pitch minus [`PITCH_OFFSET`].
    pub pitch: u8,
    /// Sub-beats minus one.
    pub duration: u8,
}

impl NoteToken {
    pub fn from_qnote(note: &QNote, same_bar: bool) -> Self {
        NoteToken {
            same_bar,
            position: note.position,
            pitch: note.pitch.clamp(PITCH_OFFSET, PITCH_MAX) - PITCH_OFFSET,
            duration: note.duration - 1,
        }
    }

    pub fn to_qnote(self) -> QNote {
        QNote {
            position: self.position,
            pitch: self.pitch + PITCH_OFFSET,
            duration: self.duration + 1,
        }
    }

    pub fn midi_pitch(&self) -> u8 {
        self.pitch + PITCH_OFFSET
    }

    fn order_key(&self) -> (u8, u8) {
        (self.position, self.pitch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CpToken {
    Note(NoteToken),
    Special(Special),
}

impl CpToken {
    pub const BOS: CpToken = CpToken::Special(Special::Bos);
    pub const EOS: CpToken = CpToken::Special(Special::Eos);
    pub const PAD: CpToken = CpToken::Special(Special::Pad);
    pub const MASK: CpToken = CpToken::Special(Special::Mask);
    pub const ABS: CpToken = CpToken::Special(Special::Abs);

    pub fn note(same_bar: bool, position: u8, pitch: u8, duration: u8) -> CpToken {
        CpToken::Note(NoteToken {
            same_bar,
            position,
            pitch,
            duration,
        })
    }

    pub fn is_note(&self) -> bool {
        matches!(self, CpToken::Note(_))
    }

    pub fn is_pad(&self) -> bool {
        *self == CpToken::PAD
    }

    pub fn special(&self) -> Option<Special> {
        match self {
            CpToken::Special(s) => Some(*s),
            CpToken::Note(_) => None,
        }
    }

    /// The four encoded ids, specials using their reserved slot in every dimension.
    pub fn encode(&self) -> [u16; 4] {
        match self {
            CpToken::Note(n) => [
                u16::from(n.same_bar),
                u16::from(n.position),
                u16::from(n.pitch),
                u16::from(n.duration),
            ],
            CpToken::Special(s) => std::array::from_fn(|d| s.id_in(d)),
        }
    }
}

/// The token list for one piece.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream(Vec<CpToken>);

impl TokenStream {
    pub fn new(tokens: Vec<CpToken>) -> Self {
        TokenStream(tokens)
    }

    pub fn into_inner(self) -> Vec<CpToken> {
        self.0
    }
}

impl Deref for TokenStream {
    type Target = [CpToken];

    fn deref(&self) -> &[CpToken] {
        &self.0
    }
}

impl From<Vec<CpToken>> for TokenStream {
    fn from(tokens: Vec<CpToken>) -> Self {
        TokenStream(tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureErrorKind {
    /// A same-bar note appears before any bar was opened.
    NoOpenBar,
    /// A same-bar note follows an ⟨ABS⟩ token.
    NoteInEmptyBar,
    /// `(position, pitch)` decreased within a bar.
    OutOfOrder,
}

impl fmt::Display for StructureErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureErrorKind::NoOpenBar => "same-bar note before any bar start",
            StructureErrorKind::NoteInEmptyBar => "same-bar note after an empty-bar token",
            StructureErrorKind::OutOfOrder => "note sorts before its predecessor in the bar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed token stream at index {index}: {kind}")]
pub struct StructureError {
    pub index: usize,
    pub kind: StructureErrorKind,
}

pub fn tokenize(q: &QuantizedScore) -> TokenStream {
    let mut tokens = Vec::with_capacity(q.note_count() + q.bar_count());
    for bar in q.bars() {
        if bar.is_empty() {
            tokens.push(CpToken::ABS);
            continue;
        }
        for (i, note) in bar.notes().iter().enumerate() {
            tokens.push(CpToken::Note(NoteToken::from_qnote(note, i > 0)));
        }
    }
    TokenStream(tokens)
}

pub fn detokenize(tokens: &[CpToken]) -> Result<QuantizedScore, StructureError> {
    let mut builder = BarBuilder::default();
    for (index, token) in tokens.iter().enumerate() {
        builder.push(token).map_err(|kind| StructureError { index, kind })?;
    }
    Ok(builder.finish())
}

/// Lossy counterpart of [`detokenize`]: structurally invalid tokens are
/// dropped instead of failing. Returns the score and the number dropped.
pub fn detokenize_lossy(tokens: &[CpToken]) -> (QuantizedScore, usize) {
    let mut builder = BarBuilder::default();
    let dropped = tokens.iter().filter(|t| builder.push(t).is_err()).count();
    (builder.finish(), dropped)
}

#[derive(Default)]
struct BarBuilder {
    bars: Vec<Vec<QNote>>,
    state: BarState,
}

#[derive(Default, Clone, Copy)]
enum BarState {
    #[default]
    Closed,
    Empty,
    Open((u8, u8)),
}

impl BarBuilder {
    fn push(&mut self, token: &CpToken) -> Result<(), StructureErrorKind> {
        match token {
            CpToken::Special(Special::Abs) => {
                self.bars.push(Vec::new());
                self.state = BarState::Empty;
            }
            CpToken::Special(_) => {}
            CpToken::Note(note) if !note.same_bar => {
                self.bars.push(vec![note.to_qnote()]);
                self.state = BarState::Open(note.order_key());
            }
            CpToken::Note(note) => match self.state {
                BarState::Closed => return Err(StructureErrorKind::NoOpenBar),
                BarState::Empty => return Err(StructureErrorKind::NoteInEmptyBar),
                BarState::Open(last) if note.order_key() < last => return Err(StructureErrorKind::OutOfOrder),
                BarState::Open(_) => {
                    self.bars.last_mut().expect("open bar").push(note.to_qnote());
                    self.state = BarState::Open(note.order_key());
                }
            },
        }
        Ok(())
    }

    fn finish(self) -> QuantizedScore {
        QuantizedScore::new(self.bars.into_iter().map(Bar::new).collect())
    }
}
