use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ColourSpace;
use crate::error::{Error, Result};
use crate::ndnum::OptimizerKind;

pub const KERNEL: usize = 9;
pub const WIDTH: usize = 32;
pub const HIDDEN: usize = 1024;
pub const MAX_BOTTLENECK: usize = 32;
pub const MAX_DEPTH: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Channels of the second retina convolution.
    pub bottleneck: usize,
    /// Number of ventral convolutions between the retina and the MLP.
    pub ventral_depth: usize,
    pub colour_space: ColourSpace,
    pub shuffle_channels: bool,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub weight_decay: f32,
    pub optimizer: OptimizerKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            bottleneck: 32,
            ventral_depth: 2,
            colour_space: ColourSpace::Rgb,
            shuffle_channels: false,
            seed: 0,
            epochs: 20,
            batch_size: 128,
            lr: 1e-4,
            weight_decay: 1e-6,
            optimizer: OptimizerKind::adam(),
        }
    }
}

impl ModelConfig {
    pub fn new(bottleneck: usize, ventral_depth: usize) -> Self {
        Self {
            bottleneck,
            ventral_depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BOTTLENECK).contains(&self.bottleneck) {
            return Err(Error::InvalidConfig(format!(
                "bottleneck {} outside 1..={MAX_BOTTLENECK}",
                self.bottleneck
            )));
        }
        if self.ventral_depth > MAX_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "ventral depth {} above {MAX_DEPTH}",
                self.ventral_depth
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 || !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lr {} / weight decay {} must be finite and non-negative",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }

    /// Convolutional layers in forward order.
    pub fn conv_layers(&self) -> Vec<LayerId> {
        let mut layers = vec![LayerId::Retina1, LayerId::Retina2];
        layers.extend((1..=self.ventral_depth).map(LayerId::Ventral));
        layers
    }

    /// Layers whose cells enter the population statistics.
    pub fn probed_layers(&self) -> Vec<LayerId> {
        self.conv_layers().into_iter().skip(1).collect()
    }

    pub fn channels(&self, layer: LayerId) -> usize {
        match layer {
            LayerId::Retina2 => self.bottleneck,
            _ => WIDTH,
        }
    }

    pub fn contains(&self, layer: LayerId) -> bool {
        match layer {
            LayerId::Retina1 | LayerId::Retina2 => true,
            LayerId::Ventral(k) => (1..=self.ventral_depth).contains(&k),
        }
    }
}

/// A convolutional layer, named as in the figures: "Retina 1", "Retina 2", "Ventral k".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayerId {
    Retina1,
    Retina2,
    Ventral(usize),
}

impl LayerId {
    /// Zero-based position in the convolution stack.
    pub fn position(self) -> usize {
        match self {
            LayerId::Retina1 => 0,
            LayerId::Retina2 => 1,
            LayerId::Ventral(k) => 1 + k,
        }
    }

    pub fn from_position(position: usize) -> Self {
        match position {
            0 => LayerId::Retina1,
            1 => LayerId::Retina2,
            p => LayerId::Ventral(p - 1),
        }
    }

    /// Side of the input window a single centre unit can see: `(K-1)·(position+1)+1`.
    pub fn receptive_field(self) -> usize {
        (KERNEL - 1) * (self.position() + 1) + 1
    }

    pub(crate) fn param_prefix(self) -> String {
        match self {
            LayerId::Retina1 => "retina1".into(),
            LayerId::Retina2 => "retina2".into(),
            LayerId::Ventral(k) => format!("ventral{k}"),
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerId::Retina1 => f.write_str("Retina 1"),
            LayerId::Retina2 => f.write_str("Retina 2"),
            LayerId::Ventral(k) => write!(f, "Ventral {k}"),
        }
    }
}

impl FromStr for LayerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
        let lower = compact.to_ascii_lowercase();
        let parse_num = |rest: &str| rest.parse::<usize>().ok();
        match lower.as_str() {
            "retina1" => Ok(LayerId::Retina1),
            "retina2" => Ok(LayerId::Retina2),
            _ => lower
                .strip_prefix("ventral")
                .and_then(parse_num)
                .filter(|&k| k >= 1)
                .map(LayerId::Ventral)
                .ok_or_else(|| Error::InvalidCell(format!("unknown layer '{s}'"))),
        }
    }
}
