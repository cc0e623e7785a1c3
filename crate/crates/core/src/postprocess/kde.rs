//! Two-centre clustering of one beat's pitches by shrinking-bandwidth KDE.

use serde::{Deserialize, Serialize};

/// Pitch at or above which a single unsplit cluster goes to the right hand.
pub const SINGLE_CLUSTER_SPLIT: f64 = 60.0;

/// Bisection steps spent when one decay step skips over the two-peak range.
const REFINE_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdeParams {
    /// Starting Gaussian bandwidth, in semitones.
    pub initial_bandwidth: f64,
    /// Multiplier applied to the bandwidth each step, in `(0, 1)`.
    pub decay: f64,
    /// Search stops once the bandwidth falls below this.
    pub floor: f64,
    /// Spacing of the evaluation grid, in semitones.
    pub grid_step: f64,
}

impl Default for KdeParams {
    fn default() -> Self {
        KdeParams {
            initial_bandwidth: 32.0,
            decay: 0.9,
            floor: 0.5,
            grid_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Hand {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeatClusters {
    pub left_centre: f64,
    pub right_centre: f64,
    /// Hand per input pitch, in input order.
    pub hands: Vec<Hand>,
    /// Bandwidth at which two peaks appeared; `None` for a single cluster.
    pub bandwidth: Option<f64>,
}

impl BeatClusters {
    pub fn centre(&self, hand: Hand) -> f64 {
        match hand {
            Hand::Left => self.left_centre,
            Hand::Right => self.right_centre,
        }
    }
}

/// Unnormalized Gaussian density of `pitches` on the grid
/// `lo, lo + step, ...` with `len` points.
fn density(pitches: &[u8], bandwidth: f64, lo: f64, step: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let x = lo + i as f64 * step;
            pitches
                .iter()
                .map(|&p| {
                    let z = (x - f64::from(p)) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum()
        })
        .collect()
}

fn strict_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

/// Shrinks the bandwidth from `initial_bandwidth` by `decay` until the
/// density shows exactly two strict peaks. If a single step goes from fewer
/// than two peaks to more than two, the interval between the two bandwidths
/// is bisected for a two-peak bandwidth. The lower peak becomes the left
/// centre and each pitch joins its nearest centre (ties go right). Without
/// two peaks everything forms one cluster, assigned left when its peak lies
/// below middle C.
pub fn cluster_beat(pitches: &[u8], params: &KdeParams) -> Option<BeatClusters> {
    let lo_pitch = f64::from(*pitches.iter().min()?);
    let hi_pitch = f64::from(*pitches.iter().max()?);
    let lo = lo_pitch - 1.0;
    let len = ((hi_pitch - lo_pitch + 2.0) / params.grid_step).round() as usize + 1;
    let at = |i: usize| lo + i as f64 * params.grid_step;

    let maxima = |bandwidth: f64| strict_maxima(&density(pitches, bandwidth, lo, params.grid_step, len));
    let split = |bandwidth: f64, peaks: &[usize]| {
        let (left_centre, right_centre) = (at(peaks[0]), at(peaks[1]));
        let hands = pitches
            .iter()
            .map(|&p| {
                let p = f64::from(p);
                if (p - left_centre).abs() < (p - right_centre).abs() {
                    Hand::Left
                } else {
                    Hand::Right
                }
            })
            .collect();
        BeatClusters {
            left_centre,
            right_centre,
            hands,
            bandwidth: Some(bandwidth),
        }
    };

    let mut bandwidth = params.initial_bandwidth;
    let mut wider: Option<f64> = None;
    while bandwidth >= params.floor {
        let peaks = maxima(bandwidth);
        match peaks.len() {
            2 => return Some(split(bandwidth, &peaks)),
            0 | 1 => wider = Some(bandwidth),
            _ => {
                // one step jumped past two peaks; look between the two bandwidths
                if let Some(mut hi) = wider.take() {
                    let mut lo_bw = bandwidth;
                    for _ in 0..REFINE_STEPS {
                        let mid = 0.5 * (lo_bw + hi);
                        let peaks = maxima(mid);
                        match peaks.len() {
                            2 => return Some(split(mid, &peaks)),
                            0 | 1 => hi = mid,
                            _ => lo_bw = mid,
                        }
                    }
                }
            }
        }
        bandwidth *= params.decay;
    }

    let values = density(pitches, params.initial_bandwidth, lo, params.grid_step, len);
    let peak = values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    let centre = at(peak);
    let hand = if centre < SINGLE_CLUSTER_SPLIT {
        Hand::Left
    } else {
        Hand::Right
    };
    Some(BeatClusters {
        left_centre: centre,
        right_centre: centre,
        hands: vec![hand; pitches.len()],
        bandwidth: None,
    })
}
