//! Piano reduction toolkit.

pub mod bridge;
pub mod config;
pub mod dataset;
pub mod dbm;
pub mod metrics;
pub mod postprocess;
pub mod score;
pub mod skyline;
pub mod tokenizer;
