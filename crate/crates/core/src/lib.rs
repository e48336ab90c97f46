//! Anatomically constrained CNN workbench: a retina-net with a channel
//! bottleneck feeding a ventral-stream network, trained on CIFAR-10 and
//! probed cell-by-cell with hue patches, gratings, and a zero-image baseline.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod ndnum;
pub mod probe;
pub mod stimulus;

pub use error::{Error, Result};
