use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{build_pretrain_sequences, ignore_token, DatasetError, TokenSequence};
use crate::tokenizer::{CpToken, NoteToken, DURATION_VOCAB, PITCH_VOCAB, POSITION_VOCAB};

pub const DEFAULT_MASK_PROB: f64 = 0.15;

const MASK_SHARE: f64 = 0.8;
const RANDOM_SHARE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSequence {
    pub masked: TokenSequence,
    /// Original token at every selected position, `None` elsewhere.
    pub target: Vec<Option<CpToken>>,
}

impl MaskedSequence {
    pub fn selected(&self) -> usize {
        self.target.iter().filter(|t| t.is_some()).count()
    }
}

/// Selects each note position with probability `mask_prob`. A selected
/// position becomes ⟨MASK⟩ 80% of the time, a uniformly random note token
/// 10% of the time, and is left as-is otherwise. Specials (including
/// ⟨ABS⟩ and padding) are never selected.
pub fn apply_mlm_masking(seq: &TokenSequence, mask_prob: f64, seed: u64) -> Result<MaskedSequence, DatasetError> {
    mask_with_stream(seq, mask_prob, seed, 0)
}

pub(crate) fn mask_with_stream(
    seq: &TokenSequence,
    mask_prob: f64,
    seed: u64,
    stream: u64,
) -> Result<MaskedSequence, DatasetError> {
    if !(0.0..=1.0).contains(&mask_prob) {
        return Err(DatasetError::InvalidMaskProb(mask_prob));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let mut tokens = seq.tokens().to_vec();
    let mut target = vec![None; tokens.len()];
    for (slot, token) in tokens.iter_mut().enumerate() {
        if !token.is_note() || rng.random::<f64>() >= mask_prob {
            continue;
        }
        target[slot] = Some(*token);
        let roll = rng.random::<f64>();
        if roll < MASK_SHARE {
            *token = CpToken::MASK;
        } else if roll < MASK_SHARE + RANDOM_SHARE {
            *token = random_note(&mut rng);
        }
    }
    let masked = TokenSequence::from_tokens(tokens).expect("masking keeps padding a suffix");
    Ok(MaskedSequence { masked, target })
}

fn random_note(rng: &mut impl Rng) -> CpToken {
    CpToken::Note(NoteToken {
        same_bar: rng.random(),
        position: rng.random_range(0..POSITION_VOCAB) as u8,
        pitch: rng.random_range(0..PITCH_VOCAB) as u8,
        duration: rng.random_range(0..DURATION_VOCAB) as u8,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretrainRecord {
    pub id: String,
    pub sample: MaskedSequence,
}

#[derive(Serialize)]
struct PretrainWire<'a> {
    id: &'a str,
    masked: Vec<[u16; 4]>,
    target: Vec<[i64; 4]>,
}

impl PretrainRecord {
    pub fn to_json_line(&self) -> String {
        let target = self
            .sample
            .target
            .iter()
            .map(|t| match t {
                Some(token) => token.encode().map(i64::from),
                None => ignore_token(),
            })
            .collect();
        let wire = PretrainWire {
            id: &self.id,
            masked: self.sample.masked.encode(),
            target,
        };
        serde_json::to_string(&wire).expect("record serializes")
    }
}

/// Chunks every piece and masks each window; window `i` draws from RNG
/// stream `i` of `seed`, so output is reproducible and order-independent.
pub fn build_pretrain_dataset<'a>(
    pieces: impl IntoIterator<Item = (&'a str, &'a [CpToken])>,
    mask_prob: f64,
    seed: u64,
) -> Result<Vec<PretrainRecord>, DatasetError> {
    build_pretrain_sequences(pieces)
        .into_iter()
        .enumerate()
        .map(|(i, chunk)| {
            Ok(PretrainRecord {
                sample: mask_with_stream(&chunk.sequence, mask_prob, seed, i as u64)?,
                id: chunk.id,
            })
        })
        .collect()
}
