//! Properties checked on every fuzz input. Shared by the fuzz targets and by
//! the seed-corpus test in the core crate.

#![allow(dead_code)]

use reda::bridge::{parse_keep_masks, parse_r2f_inputs, r2f_to_score};
use reda::config::PipelineConfig;
use reda::dataset::R2fRecord;
use reda::dbm::AccompanimentDB;
use reda::metrics::{parse_responses, parse_survey_csv, survey_means};
use reda::score::{parse_midi, quantize, write_midi};
use reda::tokenizer::{
    decode_token, detokenize, detokenize_lossy, parse_token_records, tokenize, write_token_records, CpToken,
};

/// Accepted files re-encode to bytes that parse back to the same score.
pub fn midi(data: &[u8]) {
    let Ok(score) = parse_midi(data) else { return };
    let again = parse_midi(&write_midi(&score)).expect("writer output parses");
    assert_eq!(again.ppq(), score.ppq());
    assert_eq!(again.note_count(), score.note_count());
    if let Ok(q) = quantize(&score) {
        assert_eq!(detokenize(&tokenize(&q)).expect("own tokens decode"), q);
    }
}

/// Accepted token files serialize back byte-for-byte after one normalization.
pub fn token_records(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(records) = parse_token_records(text) else { return };
    let written = write_token_records(&records);
    let again = parse_token_records(&written).expect("written records parse");
    assert_eq!(again, records);
    assert_eq!(write_token_records(&again), written);
}

/// Arbitrary token streams, four little-endian u16 fields per token.
pub fn detokenize_stream(data: &[u8]) {
    let tokens: Vec<CpToken> = data
        .chunks_exact(8)
        .filter_map(|c| {
            let field = |i: usize| i64::from(u16::from_le_bytes([c[2 * i], c[2 * i + 1]]) % 128);
            decode_token([field(0), field(1), field(2), field(3)]).ok()
        })
        .collect();
    let (lossy, _) = detokenize_lossy(&tokens);
    if let Ok(strict) = detokenize(&tokens) {
        assert_eq!(strict, lossy);
    }
    let _ = r2f_to_score(&tokens);
}

pub fn accomp_db(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(db) = AccompanimentDB::from_json(text) else {
        return;
    };
    let again = AccompanimentDB::from_json(&db.to_json()).expect("own output loads");
    assert_eq!(again.entries(), db.entries());
}

pub fn keep_masks(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(masks) = parse_keep_masks(text) {
        assert!(masks.iter().all(|m| m.keep.len() == 512));
    }
}

pub fn r2f_inputs(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_r2f_inputs(text);
    if let Ok(records) = R2fRecord::parse_jsonl(text) {
        let lines: String = records.iter().map(|r| r.to_json_line() + "\n").collect();
        assert_eq!(R2fRecord::parse_jsonl(&lines).expect("own output parses"), records);
    }
}

pub fn survey(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_survey_csv(text) {
        let _ = survey_means(&table.rows);
    }
    let _ = parse_responses(text);
}

pub fn config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = PipelineConfig::from_toml_str(text) {
        assert!(config.validate().is_ok());
    }
}

pub type Check = fn(&[u8]);

/// Target name, corpus directory and check, in one table.
pub const TARGETS: [(&str, Check); 8] = [
    ("parse_midi", midi),
    ("token_records", token_records),
    ("detokenize", detokenize_stream),
    ("accomp_db", accomp_db),
    ("keep_masks", keep_masks),
    ("r2f_jsonl", r2f_inputs),
    ("survey", survey),
    ("config", config),
];
