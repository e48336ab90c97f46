use serde::Serialize;

use crate::model::LayerId;
use crate::probe::OpponencyClass;

use super::summary::{Modality, PopulationSummary};

/// Class fraction per probed layer of one depth, input side first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthProfile {
    pub depth: usize,
    pub layers: Vec<LayerId>,
    /// Layers between this one and the last conv layer (0 = last).
    pub distance_from_output: Vec<usize>,
    pub mean: Vec<f64>,
}

/// Rank agreement between depth `d` and `d + 1` profiles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftCorrelation {
    pub shallow: usize,
    pub deep: usize,
    /// Layers paired by position from the input.
    pub unshifted: Option<f64>,
    /// Layers paired by distance from the output (the deeper profile moved one layer).
    pub shifted: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthAblation {
    pub bottleneck: usize,
    pub modality: Modality,
    pub class: OpponencyClass,
    pub profiles: Vec<DepthProfile>,
    pub shifts: Vec<ShiftCorrelation>,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either side is constant or shorter than two.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

pub fn depth_profile(
    summary: &PopulationSummary,
    bottleneck: usize,
    depth: usize,
    modality: Modality,
    class: OpponencyClass,
) -> Option<DepthProfile> {
    let layers = summary.layers(depth);
    let mean: Option<Vec<f64>> = layers
        .iter()
        .map(|&l| summary.get(bottleneck, depth, l, modality, class).map(|s| s.mean))
        .collect();
    let mean = mean.filter(|m| !m.is_empty())?;
    let last = layers.iter().map(|l| l.position()).max().unwrap_or(0);
    Some(DepthProfile {
        depth,
        distance_from_output: layers.iter().map(|l| last - l.position()).collect(),
        layers,
        mean,
    })
}

/// Compare each depth's profile with the next deeper one, both aligned and shifted by one layer.
pub fn depth_ablation(summary: &PopulationSummary, bottleneck: usize, modality: Modality, class: OpponencyClass) -> DepthAblation {
    let profiles: Vec<DepthProfile> = summary
        .depths()
        .into_iter()
        .filter_map(|d| depth_profile(summary, bottleneck, d, modality, class))
        .collect();
    let mut shifts = Vec::new();
    for pair in profiles.windows(2) {
        let (p, q) = (&pair[0], &pair[1]);
        if q.depth != p.depth + 1 {
            continue;
        }
        let n = p.mean.len();
        shifts.push(ShiftCorrelation {
            shallow: p.depth,
            deep: q.depth,
            unshifted: spearman(&p.mean, &q.mean[..n]),
            shifted: spearman(&p.mean, &q.mean[1..=n]),
        });
    }
    DepthAblation {
        bottleneck,
        modality,
        class,
        profiles,
        shifts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::summary::{SummaryKey, Stat};

    fn summary(profiles: &[(usize, &[f64])]) -> PopulationSummary {
        let mut s = PopulationSummary::default();
        for &(depth, values) in profiles {
            for (i, &v) in values.iter().enumerate() {
                s.rows.insert(
                    SummaryKey {
                        bottleneck: 4,
                        depth,
                        layer: LayerId::from_position(i + 1),
                        modality: Modality::Spectral,
                        class: OpponencyClass::Opponent,
                    },
                    Stat { mean: v, std: 0.0, trials: 1 },
                );
            }
        }
        s
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[0.3, 0.1, 0.3, 0.2]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn self_correlation_is_one() {
        let p = [0.9, 0.4, 0.1, 0.6];
        assert!((spearman(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = p.iter().map(|v| -v).collect();
        assert!((spearman(&p, &rev).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0], &[0.0, 2.0]), None);
    }

    #[test]
    fn shifted_pattern_is_detected() {
        // deeper net repeats the pattern one layer later
        let s = summary(&[(2, &[0.8, 0.5, 0.1]), (3, &[0.3, 0.9, 0.5, 0.1])]);
        let a = depth_ablation(&s, 4, Modality::Spectral, OpponencyClass::Opponent);
        assert_eq!(a.profiles.len(), 2);
        assert_eq!(a.profiles[0].distance_from_output, vec![2, 1, 0]);
        let sh = &a.shifts[0];
        assert!((sh.shifted.unwrap() - 1.0).abs() < 1e-12);
        assert!(sh.shifted.unwrap() > sh.unshifted.unwrap());
    }

    #[test]
    fn single_depth_degenerates_to_one_profile() {
        let s = summary(&[(2, &[0.8, 0.5, 0.1])]);
        let a = depth_ablation(&s, 4, Modality::Spectral, OpponencyClass::Opponent);
        assert_eq!(a.profiles.len(), 1);
        assert!(a.shifts.is_empty());
    }
}
