use serde::Serialize;

use super::MetricsError;
use crate::score::Score;

pub const WINDOW_BEATS: usize = 2;
pub const HOP_BEATS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    /// Cosine similarity per compared window, in window order.
    pub windows: Vec<f64>,
    pub mean: f64,
    pub window_beats: usize,
    pub hop_beats: usize,
    /// Windows where neither score sounds.
    pub skipped: usize,
}

/// Duration-weighted pitch-class histogram per beat.
fn beat_histograms(score: &Score, beats: usize) -> Vec<[f64; 12]> {
    let ppq = f64::from(score.ppq());
    let mut hist = vec![[0.0; 12]; beats];
    for note in score.pitched_notes() {
        let (start, end) = (note.onset as f64 / ppq, note.end() as f64 / ppq);
        let pc = usize::from(note.pitch % 12);
        let first = start.floor() as usize;
        let last = (end.ceil() as usize).min(beats);
        for (beat, bins) in hist.iter_mut().enumerate().take(last).skip(first) {
            let overlap = end.min(beat as f64 + 1.0) - start.max(beat as f64);
            if overlap > 0.0 {
                bins[pc] += overlap;
            }
        }
    }
    hist
}

fn extent_beats(score: &Score) -> usize {
    let end = score.pitched_notes().map(|n| n.end()).max().unwrap_or(0);
    end.div_ceil(u64::from(score.ppq())) as usize
}

/// Pitch-class histogram of `score` over the beat range `[from, to)`.
pub fn pitch_class_histogram(score: &Score, from: usize, to: usize) -> [f64; 12] {
    let hist = beat_histograms(score, to);
    let mut out = [0.0; 12];
    for bins in &hist[from.min(to)..] {
        for (o, b) in out.iter_mut().zip(bins) {
            *o += b;
        }
    }
    out
}

fn cosine(a: &[f64; 12], b: &[f64; 12]) -> Option<f64> {
    let norm = |v: &[f64; 12]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    match (na > 0.0, nb > 0.0) {
        (false, false) => None,
        (true, true) => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            Some((dot / (na * nb)).clamp(0.0, 1.0))
        }
        _ => Some(0.0),
    }
}

/// Slides a two-beat window with a one-beat hop over both scores and
/// compares their pitch-class histograms by cosine similarity. Windows where
/// both are silent are skipped; where only one is silent they score 0.
pub fn tonal_similarity(original: &Score, reduced: &Score) -> Result<SimilarityReport, MetricsError> {
    let beats = extent_beats(original).max(extent_beats(reduced));
    if beats == 0 {
        return Err(MetricsError::NoWindows);
    }
    let window_count = beats.saturating_sub(WINDOW_BEATS - 1).max(1);
    let padded = window_count + WINDOW_BEATS - 1;
    let (a, b) = (beat_histograms(original, padded), beat_histograms(reduced, padded));

    let mut windows = Vec::with_capacity(window_count);
    let mut skipped = 0;
    for start in (0..window_count).step_by(HOP_BEATS) {
        let sum = |h: &[[f64; 12]]| {
            let mut acc = [0.0; 12];
            for bins in &h[start..start + WINDOW_BEATS] {
                for (x, y) in acc.iter_mut().zip(bins) {
                    *x += y;
                }
            }
            acc
        };
        match cosine(&sum(&a), &sum(&b)) {
            Some(value) => windows.push(value),
            None => skipped += 1,
        }
    }
    if windows.is_empty() {
        return Err(MetricsError::NoWindows);
    }
    let mean = windows.iter().sum::<f64>() / windows.len() as f64;
    Ok(SimilarityReport {
        windows,
        mean,
        window_beats: WINDOW_BEATS,
        hop_beats: HOP_BEATS,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::Note;

    fn chords(roots: &[u8], ppq: u16) -> Score {
        let beat = u64::from(ppq);
        let notes = roots
            .iter()
            .enumerate()
            .flat_map(|(i, &r)| [0, 4, 7].map(|iv| Note::new(r + iv, i as u64 * beat, beat)))
            .collect();
        Score::from_notes(ppq, notes)
    }

    #[test]
    fn identical_scores_score_one() {
        let a = chords(&[60, 65, 67, 60], 480);
        let report = tonal_similarity(&a, &a).unwrap();
        assert_eq!(report.windows.len(), 3);
        assert!((report.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_classes_score_zero() {
        let c = chords(&[60, 60, 60], 480);
        let f_sharp = chords(&[66, 66, 66], 480);
        assert_eq!(tonal_similarity(&c, &f_sharp).unwrap().mean, 0.0);
    }

    #[test]
    fn one_of_two_classes() {
        let original = Score::from_notes(480, vec![Note::new(60, 0, 960), Note::new(64, 0, 960)]);
        let reduced = Score::from_notes(480, vec![Note::new(48, 0, 960)]);
        let report = tonal_similarity(&original, &reduced).unwrap();
        assert_eq!(report.windows.len(), 1);
        assert!((report.mean - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn silent_windows() {
        // beat 0 and beats 4-5 sound in the original; the reduction only at beat 0
        let original = Score::from_notes(480, vec![Note::new(60, 0, 480), Note::new(62, 4 * 480, 960)]);
        let reduced = Score::from_notes(480, vec![Note::new(60, 0, 480)]);
        let report = tonal_similarity(&original, &reduced).unwrap();
        // windows starting at beats 0..=4: [0,2) both, [1,3) and [2,4) silent, [3,5) and [4,6) one-sided
        assert_eq!(report.skipped, 2);
        assert_eq!(report.windows, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            tonal_similarity(&Score::new(480), &Score::new(480)),
            Err(MetricsError::NoWindows)
        ));
    }

    #[test]
    fn resolution_independent() {
        let a = chords(&[60, 62, 64], 480);
        let b = chords(&[60, 62, 64], 96);
        assert!((tonal_similarity(&a, &b).unwrap().mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_weights_by_duration() {
        let score = Score::from_notes(480, vec![Note::new(60, 0, 720), Note::new(61, 240, 240)]);
        let h = pitch_class_histogram(&score, 0, 1);
        assert_eq!((h[0], h[1]), (1.0, 0.5));
    }
}
