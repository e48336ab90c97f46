use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::cifar::SIDE;
use crate::error::{Error, Result};
use crate::model::{ForwardOptions, LayerId, VisualSystemModel};
use crate::ndnum::{Graph, Tensor};
use crate::stimulus::{zero_stimulus, StimulusSweep};

/// Row and column of the unit read out in every channel.
pub const CENTRE: usize = SIDE / 2;

const CHUNK: usize = 64;

/// One channel of one convolutional layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub layer: LayerId,
    pub channel: usize,
}

impl CellId {
    pub fn new(model: &VisualSystemModel, layer: LayerId, channel: usize) -> Result<Self> {
        let config = &model.config;
        if !config.contains(layer) {
            return Err(Error::InvalidCell(format!(
                "{layer} does not exist in a depth-{} model",
                config.ventral_depth
            )));
        }
        if channel >= config.channels(layer) {
            return Err(Error::InvalidCell(format!(
                "{layer} has {} channels, asked for channel {channel}",
                config.channels(layer)
            )));
        }
        Ok(Self { layer, channel })
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} #{}", self.layer, self.channel)
    }
}

/// Centre-unit responses of every channel of some layers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerResponses {
    pub layer: LayerId,
    /// `[channel][stimulus]`.
    pub by_channel: Vec<Vec<f64>>,
}

fn check_layers(model: &VisualSystemModel, layers: &[LayerId]) -> Result<LayerId> {
    for &l in layers {
        if !model.config.contains(l) {
            return Err(Error::InvalidCell(format!("model has no layer {l}")));
        }
    }
    layers
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidConfig("no layers requested".into()))
}

/// Centre responses of all channels in `layers` to a batch of images, one forward pass per chunk.
pub fn centre_responses(model: &VisualSystemModel, layers: &[LayerId], images: &Tensor) -> Result<Vec<LayerResponses>> {
    let deepest = check_layers(model, layers)?;
    let images = if images.rank() == 3 {
        images.reshape(&[1, SIDE, SIDE, 3])?
    } else {
        images.clone()
    };
    let n = images.dims()[0];
    let mut out: Vec<LayerResponses> = layers
        .iter()
        .map(|&layer| LayerResponses {
            layer,
            by_channel: vec![Vec::with_capacity(n); model.config.channels(layer)],
        })
        .collect();
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let mut g = Graph::new();
        let f = model.forward(
            &mut g,
            images.slice_outer(start, end)?,
            ForwardOptions {
                stop_after: Some(deepest),
                ..Default::default()
            },
        )?;
        for lr in out.iter_mut() {
            let act = g.value(f.conv_outputs[lr.layer.position()]);
            let c = act.dims()[3];
            for i in 0..end - start {
                let base = ((i * SIDE + CENTRE) * SIDE + CENTRE) * c;
                for (ch, resp) in lr.by_channel.iter_mut().enumerate() {
                    resp.push(act.data()[base + ch] as f64);
                }
            }
        }
    }
    Ok(out)
}

/// Centre responses to every stimulus of a sweep, already in the model's input space.
pub fn sweep_responses(model: &VisualSystemModel, layers: &[LayerId], sweep: &StimulusSweep) -> Result<Vec<LayerResponses>> {
    if sweep.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let mut parts: Option<Vec<LayerResponses>> = None;
    for start in (0..sweep.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(sweep.len());
        let chunk = centre_responses(model, layers, &sweep.batch(start, end)?)?;
        match parts.as_mut() {
            None => parts = Some(chunk),
            Some(acc) => {
                for (a, c) in acc.iter_mut().zip(chunk) {
                    for (x, y) in a.by_channel.iter_mut().zip(c.by_channel) {
                        x.extend(y);
                    }
                }
            }
        }
    }
    Ok(parts.expect("non-empty sweep"))
}

/// Response of one cell to one `32×32×3` image.
pub fn cell_response(model: &VisualSystemModel, cell: CellId, image: &Tensor) -> Result<f64> {
    let r = centre_responses(model, &[cell.layer], image)?;
    Ok(r[0].by_channel[cell.channel][0])
}

/// Response to the all-zero image.
pub fn baseline_rate(model: &VisualSystemModel, cell: CellId) -> Result<f64> {
    cell_response(model, cell, &zero_stimulus().image)
}

/// Single-step gradient approximation of a cell's receptive field.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceptiveField {
    /// Raw input gradient at the zero image, `32×32×3`.
    pub gradient: Tensor,
    /// `0.5 + 0.5·g/max|g|`, in [0, 1] with 0.5 meaning no influence.
    pub image: Tensor,
    /// Gradient identically zero (the unit is not active at the zero image).
    pub dead: bool,
}

pub fn rf_approx(model: &VisualSystemModel, cell: CellId) -> Result<ReceptiveField> {
    let mut g = Graph::new();
    let f = model.forward(
        &mut g,
        zero_stimulus().image,
        ForwardOptions {
            input_grad: true,
            stop_after: Some(cell.layer),
            ..Default::default()
        },
    )?;
    let act = f.conv_outputs[cell.layer.position()];
    let out = g.pick(act, &[0, CENTRE, CENTRE, cell.channel])?;
    g.backward(out)?;
    let gradient = g
        .grad(f.input)
        .unwrap_or_else(|| Tensor::zeros(&[1, SIDE, SIDE, 3]))
        .reshape(&[SIDE, SIDE, 3])?;
    let peak = gradient.data().iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let dead = peak == 0.0;
    let image = if dead {
        Tensor::filled(&[SIDE, SIDE, 3], 0.5)
    } else {
        Tensor::from_fn(&[SIDE, SIDE, 3], |i| 0.5 + 0.5 * gradient.data()[i] / peak)
    };
    Ok(ReceptiveField { gradient, image, dead })
}
