use serde::Deserialize;

use super::BridgeError;
use crate::dataset::{R2fLimits, TokenSequence};
use crate::score::{dequantize, Score, OUTPUT_PPQ};
use crate::tokenizer::{
    decode_token, detokenize_lossy, parse_jsonl, CpToken, JsonlError, RawToken, TokenRecord, TokenStream,
};

/// Supplies the next output token given the encoder input and the output so
/// far (⟨BOS⟩ plus generated tokens, padded to the window length).
pub trait Predictor: Sync {
    fn next_token(&self, input: &TokenSequence, partial: &TokenSequence) -> Result<CpToken, String>;
}

/// Number of generated tokens visible in `partial` (everything after ⟨BOS⟩).
pub fn generated_len(partial: &TokenSequence) -> usize {
    partial.content_len().saturating_sub(1)
}

/// Emits a fixed token list in order and fails once it runs out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedPredictor {
    pub script: Vec<CpToken>,
}

impl Predictor for ScriptedPredictor {
    fn next_token(&self, _input: &TokenSequence, partial: &TokenSequence) -> Result<CpToken, String> {
        let round = generated_len(partial);
        self.script
            .get(round)
            .copied()
            .ok_or_else(|| format!("script of {} tokens exhausted", self.script.len()))
    }
}

/// Replays a previously generated stream, then ⟨EOS⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayPredictor {
    pub tokens: Vec<CpToken>,
}

impl Predictor for ReplayPredictor {
    fn next_token(&self, _input: &TokenSequence, partial: &TokenSequence) -> Result<CpToken, String> {
        Ok(self.tokens.get(generated_len(partial)).copied().unwrap_or(CpToken::EOS))
    }
}

/// Adapts a closure.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&TokenSequence, &TokenSequence) -> Result<CpToken, String> + Sync,
{
    fn next_token(&self, input: &TokenSequence, partial: &TokenSequence) -> Result<CpToken, String> {
        (self.0)(input, partial)
    }
}

/// Greedy generation. The output starts as a lone ⟨BOS⟩ and grows one
/// predicted token per round until ⟨EOS⟩ (or ⟨PAD⟩) is predicted or it holds
/// `max_output_tokens` tokens including ⟨BOS⟩. Returns the generated tokens
/// without ⟨BOS⟩/⟨EOS⟩.
pub fn decode_r2f(
    input: &TokenSequence,
    predictor: &dyn Predictor,
    limits: &R2fLimits,
) -> Result<TokenStream, BridgeError> {
    if input.content_len() > limits.max_input_tokens {
        return Err(BridgeError::InputTooLong {
            tokens: input.content_len(),
            max: limits.max_input_tokens,
        });
    }
    let cap = limits.max_output_tokens.min(crate::dataset::SEQUENCE_LEN);
    let mut output = vec![CpToken::BOS];
    while output.len() < cap {
        let round = output.len() - 1;
        let partial = TokenSequence::from_content(&output).expect("output below window length");
        let token = predictor
            .next_token(input, &partial)
            .map_err(|message| BridgeError::Predictor { round, message })?;
        if token == CpToken::EOS || token.is_pad() {
            break;
        }
        output.push(token);
    }
    output.remove(0);
    Ok(TokenStream::new(output))
}

/// Detokenizes generated tokens at 480 ticks per beat, dropping tokens that
/// break bar structure. Returns the score and the number of dropped tokens.
pub fn r2f_to_score(tokens: &[CpToken]) -> (Score, usize) {
    let (q, dropped) = detokenize_lossy(tokens);
    (dequantize(&q, OUTPUT_PPQ), dropped)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputWire {
    id: String,
    #[serde(default)]
    input: Option<Vec<RawToken>>,
    #[serde(default)]
    tokens: Option<Vec<RawToken>>,
    #[serde(default)]
    #[allow(dead_code)]
    output: Option<Vec<RawToken>>,
}

/// Reads encoder inputs from JSON lines carrying either `input` (dataset
/// records) or `tokens`. Short token lists are padded.
pub fn parse_r2f_inputs(text: &str) -> Result<Vec<TokenRecord>, JsonlError> {
    let wires: Vec<InputWire> = parse_jsonl(text)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    wires
        .into_iter()
        .map(|wire| {
            let line = lines.next().unwrap_or(0);
            let err = |message: String| JsonlError { line, message };
            let raw = match (wire.input, wire.tokens) {
                (Some(raw), None) | (None, Some(raw)) => raw,
                _ => return Err(err("expected exactly one of `input` or `tokens`".into())),
            };
            let tokens = raw
                .into_iter()
                .enumerate()
                .map(|(k, r)| decode_token(r).map_err(|m| err(format!("token {k}: {m}"))))
                .collect::<Result<Vec<_>, _>>()?;
            TokenSequence::from_content(&tokens).map_err(|e| err(e.to_string()))?;
            Ok(TokenRecord { id: wire.id, tokens })
        })
        .collect()
}
