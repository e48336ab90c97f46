use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::cifar::SIDE;
use crate::data::ColourSpace;
use crate::error::{Error, Result};
use crate::ndnum::Tensor;

use super::grating::grating;
use super::hsl::probe_hue_rgb;

pub const DEFAULT_HUES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StimulusKind {
    Hue { degrees: f64 },
    Grating { theta_deg: f64, frequency: f64, phase: f64 },
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stimulus {
    pub kind: StimulusKind,
    /// `32×32×3`.
    pub image: Tensor,
}

/// The parameter lattice a sweep was generated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepGrid {
    Hues(Vec<f64>),
    /// Row-major: orientation outermost, phase innermost.
    Gratings {
        orientations: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StimulusSweep {
    pub grid: SweepGrid,
    pub stimuli: Vec<Stimulus>,
}

/// Uniform patch of one colour.
pub fn uniform_patch(rgb: [f32; 3]) -> Tensor {
    Tensor::from_fn(&[SIDE, SIDE, 3], |i| rgb[i % 3])
}

/// All-zero input. Never colour-space converted.
pub fn zero_stimulus() -> Stimulus {
    Stimulus {
        kind: StimulusKind::Zero,
        image: Tensor::zeros(&[SIDE, SIDE, 3]),
    }
}

/// `n` equally spaced hues `360·i/n`, as fully saturated equiluminant patches.
pub fn hue_sweep(n: usize) -> Result<StimulusSweep> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("hue sweep needs at least 2 hues, got {n}")));
    }
    let hues: Vec<f64> = (0..n).map(|i| 360.0 * i as f64 / n as f64).collect();
    let stimuli = hues
        .iter()
        .map(|&h| {
            Ok(Stimulus {
                kind: StimulusKind::Hue { degrees: h },
                image: uniform_patch(probe_hue_rgb(h)?),
            })
        })
        .collect::<Result<_>>()?;
    Ok(StimulusSweep {
        grid: SweepGrid::Hues(hues),
        stimuli,
    })
}

/// Full Cartesian lattice of gratings, orientation outer, phase inner.
pub fn grating_sweep(orientations: &[f64], frequencies: &[f64], phases: &[f64]) -> Result<StimulusSweep> {
    if orientations.is_empty() || frequencies.is_empty() || phases.is_empty() {
        return Err(Error::InvalidConfig("grating sweep lists must be non-empty".into()));
    }
    let mut stimuli = Vec::with_capacity(orientations.len() * frequencies.len() * phases.len());
    for &theta in orientations {
        for &f in frequencies {
            for &phi in phases {
                stimuli.push(Stimulus {
                    kind: StimulusKind::Grating {
                        theta_deg: theta,
                        frequency: f,
                        phase: phi,
                    },
                    image: grating(theta, f, phi, SIDE),
                });
            }
        }
    }
    Ok(StimulusSweep {
        grid: SweepGrid::Gratings {
            orientations: orientations.to_vec(),
            frequencies: frequencies.to_vec(),
            phases: phases.to_vec(),
        },
        stimuli,
    })
}

/// 36 orientations in 5° steps.
pub fn default_orientations() -> Vec<f64> {
    (0..36).map(|i| 5.0 * i as f64).collect()
}

/// Whole cycles per image width, `2πk/32` for k = 1..16.
pub fn default_frequencies() -> Vec<f64> {
    (1..=16).map(|k| 2.0 * PI * k as f64 / SIDE as f64).collect()
}

/// Eight phases in π/4 steps.
pub fn default_phases() -> Vec<f64> {
    (0..8).map(|i| PI / 4.0 * i as f64).collect()
}

pub fn default_grating_sweep() -> StimulusSweep {
    grating_sweep(&default_orientations(), &default_frequencies(), &default_phases()).expect("non-empty defaults")
}

impl StimulusSweep {
    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    /// Mixed-radix decode of a grating index into (orientation, frequency, phase) indices.
    pub fn grating_indices(&self, index: usize) -> Option<(usize, usize, usize)> {
        match &self.grid {
            SweepGrid::Gratings {
                orientations,
                frequencies,
                phases,
            } if index < orientations.len() * frequencies.len() * phases.len() => {
                let p = index % phases.len();
                let f = (index / phases.len()) % frequencies.len();
                let o = index / (phases.len() * frequencies.len());
                Some((o, f, p))
            }
            _ => None,
        }
    }

    /// Present the sweep in a model's input space.
    ///
    /// Gratings are already grey, so only the Lab conversion changes them.
    pub fn in_colour_space(&self, space: ColourSpace) -> StimulusSweep {
        StimulusSweep {
            grid: self.grid.clone(),
            stimuli: self
                .stimuli
                .iter()
                .map(|s| Stimulus {
                    kind: s.kind,
                    image: match s.kind {
                        StimulusKind::Zero => s.image.clone(),
                        _ => space.convert(&s.image),
                    },
                })
                .collect(),
        }
    }

    /// All images stacked into one `N×32×32×3` batch.
    pub fn batch(&self, start: usize, end: usize) -> Result<Tensor> {
        let images: Vec<&Tensor> = self.stimuli[start..end].iter().map(|s| &s.image).collect();
        Tensor::stack(&images)
    }

    /// Scalar parameter per stimulus: hue in degrees, or orientation for gratings.
    pub fn parameters(&self) -> Vec<f64> {
        self.stimuli
            .iter()
            .map(|s| match s.kind {
                StimulusKind::Hue { degrees } => degrees,
                StimulusKind::Grating { theta_deg, .. } => theta_deg,
                StimulusKind::Zero => 0.0,
            })
            .collect()
    }
}
