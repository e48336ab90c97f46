use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stimulus::{StimulusSweep, SweepGrid};

const SELECTIVITY_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationTuning {
    pub best_frequency: f64,
    pub best_frequency_index: usize,
    pub orientations: Vec<f64>,
    /// Response at the best frequency, averaged over phase, per orientation.
    pub curve: Vec<f64>,
    /// `(max − min)/(max + min + 1e-9)` of `curve`.
    pub selectivity: f64,
}

/// Reduce grating responses (in sweep order) to an orientation tuning curve.
///
/// The best frequency maximises the peak response over orientation and phase;
/// equal peaks resolve to the lower frequency.
pub fn orientation_tuning(sweep: &StimulusSweep, responses: &[f64]) -> Result<OrientationTuning> {
    let SweepGrid::Gratings {
        orientations,
        frequencies,
        phases,
    } = &sweep.grid
    else {
        return Err(Error::InvalidConfig("orientation tuning needs a grating sweep".into()));
    };
    let (no, nf, np) = (orientations.len(), frequencies.len(), phases.len());
    if responses.len() != no * nf * np {
        return Err(Error::Shape(format!(
            "{} responses for a {no}×{nf}×{np} grating lattice",
            responses.len()
        )));
    }
    let at = |o: usize, f: usize, p: usize| responses[(o * nf + f) * np + p];

    let mut best = 0;
    let mut best_peak = f64::NEG_INFINITY;
    for f in 0..nf {
        let peak = (0..no)
            .flat_map(|o| (0..np).map(move |p| (o, p)))
            .map(|(o, p)| at(o, f, p))
            .fold(f64::NEG_INFINITY, f64::max);
        if peak > best_peak || (peak == best_peak && frequencies[f] < frequencies[best]) {
            best = f;
            best_peak = peak;
        }
    }

    let curve: Vec<f64> = (0..no)
        .map(|o| (0..np).map(|p| at(o, best, p)).sum::<f64>() / np as f64)
        .collect();
    let max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(OrientationTuning {
        best_frequency: frequencies[best],
        best_frequency_index: best,
        orientations: orientations.clone(),
        curve,
        selectivity: (max - min) / (max + min + SELECTIVITY_FLOOR),
    })
}

impl OrientationTuning {
    /// Orientation of the largest tuning-curve value (first on ties).
    pub fn preferred_orientation(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.curve.iter().enumerate() {
            if v > self.curve[best] {
                best = i;
            }
        }
        self.orientations[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::grating_sweep;

    #[test]
    fn picks_frequency_and_averages_phase() {
        let sweep = grating_sweep(&[0.0, 90.0], &[0.1, 0.2], &[0.0, 1.0]).unwrap();
        // order: (o, f, p)
        let r = [
            1.0, 3.0, // 0°, 0.1
            0.0, 0.0, // 0°, 0.2
            0.0, 0.0, // 90°, 0.1
            5.0, 1.0, // 90°, 0.2
        ];
        let t = orientation_tuning(&sweep, &r).unwrap();
        assert_eq!(t.best_frequency_index, 1);
        assert_eq!(t.curve, vec![0.0, 3.0]);
        assert!((t.selectivity - 1.0).abs() < 1e-6);
        assert_eq!(t.preferred_orientation(), 90.0);
    }

    #[test]
    fn ties_go_to_lower_frequency() {
        let sweep = grating_sweep(&[0.0, 45.0], &[0.3, 0.1], &[0.0]).unwrap();
        let t = orientation_tuning(&sweep, &[2.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.best_frequency, 0.1);
    }

    #[test]
    fn flat_or_silent_cells_have_zero_selectivity() {
        let sweep = grating_sweep(&[0.0, 45.0, 90.0], &[0.5], &[0.0, 2.0]).unwrap();
        let t = orientation_tuning(&sweep, &[0.0; 6]).unwrap();
        assert_eq!(t.selectivity, 0.0);
        let t = orientation_tuning(&sweep, &[0.4; 6]).unwrap();
        assert_eq!(t.selectivity, 0.0);
    }

    #[test]
    fn rejects_wrong_lengths() {
        let sweep = grating_sweep(&[0.0], &[0.5], &[0.0, 2.0]).unwrap();
        assert!(orientation_tuning(&sweep, &[1.0]).is_err());
    }
}
