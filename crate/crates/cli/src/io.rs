use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use reda::score::{parse_midi_with_warnings, write_midi, Score, OUTPUT_PPQ};

pub struct Piece {
    pub id: String,
    pub path: PathBuf,
    pub score: Score,
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_midi(path: &Path) -> Result<Score> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (score, warnings) = parse_midi_with_warnings(&bytes).with_context(|| path.display().to_string())?;
    for warning in warnings {
        eprintln!("warning\t{}\t{warning:?}", path.display());
    }
    Ok(score)
}

/// Writes at 480 ticks per beat.
pub fn write_midi_file(path: &Path, score: &Score) -> Result<()> {
    std::fs::write(path, write_midi(&score.rescaled(OUTPUT_PPQ))).with_context(|| format!("writing {}", path.display()))
}

fn is_midi(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
}

/// A file as given, or the MIDI files directly inside a directory, sorted.
pub fn collect_midi(input: &Path) -> Result<Vec<PathBuf>> {
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(input).with_context(|| format!("listing {}", input.display()))? {
        let path = entry?.path();
        if path.is_file() && is_midi(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn piece_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(String::from)
        .with_context(|| format!("{} has no usable file name", path.display()))
}

/// Reads every MIDI file under `inputs` in parallel. Pieces are named by
/// file stem, which must be unique.
pub fn load_pieces(inputs: &[PathBuf]) -> Result<Vec<Piece>> {
    let mut paths = Vec::new();
    for input in inputs {
        paths.extend(collect_midi(input)?);
    }
    let mut seen = BTreeSet::new();
    for path in &paths {
        let id = piece_id(path)?;
        if !seen.insert(id.clone()) {
            bail!("two inputs share the piece name {id}");
        }
    }
    paths
        .into_par_iter()
        .map(|path| {
            Ok(Piece {
                id: piece_id(&path)?,
                score: read_midi(&path)?,
                path,
            })
        })
        .collect()
}
