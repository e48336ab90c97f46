use crate::data::cifar::{CHANNELS, CLASSES, SIDE};
use crate::error::{Error, Result};
use crate::ndnum::{glorot_uniform, Graph, NodeId, Rng, Tensor};

use super::config::{LayerId, ModelConfig, HIDDEN, KERNEL};

/// Stream id for weight initialisation draws.
pub(crate) const INIT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub layer: LayerId,
    /// `K×K×Cin×Cout`
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    /// `In×Out`
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    pub epochs_completed: usize,
    pub train_accuracy: Option<f32>,
    pub test_accuracy: Option<f32>,
    /// Test accuracy with channel-shuffled test images; only for shuffle-trained models.
    pub shuffled_test_accuracy: Option<f32>,
}

/// Retina-net (two convs) + ventral stream (D convs + two-layer MLP).
#[derive(Clone, Debug, PartialEq)]
pub struct VisualSystemModel {
    pub config: ModelConfig,
    pub convs: Vec<ConvParams>,
    pub hidden: DenseParams,
    pub output: DenseParams,
    pub meta: TrainingMeta,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ForwardOptions {
    pub input_grad: bool,
    pub param_grad: bool,
    /// Stop after this conv layer's ReLU; no logits are produced.
    pub stop_after: Option<LayerId>,
}

/// Node ids of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub input: NodeId,
    /// Post-ReLU outputs in layer order (truncated by `stop_after`).
    pub conv_outputs: Vec<NodeId>,
    pub logits: Option<NodeId>,
    /// Same order as [`VisualSystemModel::parameters`].
    pub params: Vec<NodeId>,
}

/// Shapes of every parameter tensor, with names, for a configuration.
pub fn parameter_layout(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut layout = Vec::new();
    let mut cin = CHANNELS;
    for layer in config.conv_layers() {
        let cout = config.channels(layer);
        let prefix = layer.param_prefix();
        layout.push((format!("{prefix}.kernels"), vec![KERNEL, KERNEL, cin, cout]));
        layout.push((format!("{prefix}.bias"), vec![cout]));
        cin = cout;
    }
    layout.push(("hidden.weights".into(), vec![SIDE * SIDE * cin, HIDDEN]));
    layout.push(("hidden.bias".into(), vec![HIDDEN]));
    layout.push(("output.weights".into(), vec![HIDDEN, CLASSES]));
    layout.push(("output.bias".into(), vec![CLASSES]));
    layout
}

pub fn build_model(config: &ModelConfig) -> Result<VisualSystemModel> {
    let mut rng = Rng::derived(config.seed, INIT_STREAM);
    build_model_with_rng(config, &mut rng)
}

/// Glorot-uniform weights, zero biases.
pub fn build_model_with_rng(config: &ModelConfig, rng: &mut Rng) -> Result<VisualSystemModel> {
    config.validate()?;
    let mut convs = Vec::new();
    let mut cin = CHANNELS;
    for layer in config.conv_layers() {
        let cout = config.channels(layer);
        let area = KERNEL * KERNEL;
        convs.push(ConvParams {
            layer,
            kernels: glorot_uniform(&[KERNEL, KERNEL, cin, cout], area * cin, area * cout, rng),
            bias: Tensor::zeros(&[cout]),
        });
        cin = cout;
    }
    let flat = SIDE * SIDE * cin;
    let hidden = DenseParams {
        weights: glorot_uniform(&[flat, HIDDEN], flat, HIDDEN, rng),
        bias: Tensor::zeros(&[HIDDEN]),
    };
    let output = DenseParams {
        weights: glorot_uniform(&[HIDDEN, CLASSES], HIDDEN, CLASSES, rng),
        bias: Tensor::zeros(&[CLASSES]),
    };
    Ok(VisualSystemModel {
        config: config.clone(),
        convs,
        hidden,
        output,
        meta: TrainingMeta::default(),
    })
}

fn as_batch(images: Tensor) -> Result<Tensor> {
    match images.dims() {
        [h, w, c] if (*h, *w, *c) == (SIDE, SIDE, CHANNELS) => images.reshape(&[1, SIDE, SIDE, CHANNELS]),
        [_, h, w, c] if (*h, *w, *c) == (SIDE, SIDE, CHANNELS) => Ok(images),
        d => Err(Error::Shape(format!("model input must be [N,]32×32×3, got {d:?}"))),
    }
}

impl VisualSystemModel {
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for c in &self.convs {
            out.push(&c.kernels);
            out.push(&c.bias);
        }
        out.extend([&self.hidden.weights, &self.hidden.bias, &self.output.weights, &self.output.bias]);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
        }
        out.extend([
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]);
        out
    }

    pub fn conv(&self, layer: LayerId) -> Result<&ConvParams> {
        self.convs
            .iter()
            .find(|c| c.layer == layer)
            .ok_or_else(|| Error::InvalidCell(format!("model has no layer {layer}")))
    }

    /// Record a forward pass on `N×32×32×3` (or a single `32×32×3`) input.
    pub fn forward(&self, g: &mut Graph, images: Tensor, opts: ForwardOptions) -> Result<Forward> {
        if let Some(layer) = opts.stop_after {
            if !self.config.contains(layer) {
                return Err(Error::InvalidCell(format!("model has no layer {layer}")));
            }
        }
        let images = as_batch(images)?;
        let input = g.leaf(images, opts.input_grad);
        let mut params = Vec::new();
        let mut conv_outputs = Vec::new();
        let mut x = input;
        for c in &self.convs {
            let k = g.leaf(c.kernels.clone(), opts.param_grad);
            let b = g.leaf(c.bias.clone(), opts.param_grad);
            params.extend([k, b]);
            let pre = g.conv2d_same(x, k, b)?;
            x = g.relu(pre)?;
            conv_outputs.push(x);
            if opts.stop_after == Some(c.layer) {
                return Ok(Forward {
                    input,
                    conv_outputs,
                    logits: None,
                    params,
                });
            }
        }
        let flat = g.flatten(x)?;
        let (w1, b1) = (
            g.leaf(self.hidden.weights.clone(), opts.param_grad),
            g.leaf(self.hidden.bias.clone(), opts.param_grad),
        );
        let h = g.linear(flat, w1, b1)?;
        let h = g.relu(h)?;
        let (w2, b2) = (
            g.leaf(self.output.weights.clone(), opts.param_grad),
            g.leaf(self.output.bias.clone(), opts.param_grad),
        );
        let logits = g.linear(h, w2, b2)?;
        params.extend([w1, b1, w2, b2]);
        Ok(Forward {
            input,
            conv_outputs,
            logits: Some(logits),
            params,
        })
    }

    /// `N×10` logits, evaluated in chunks without gradient tracking.
    pub fn logits(&self, images: &Tensor, chunk: usize) -> Result<Tensor> {
        let images = as_batch(images.clone())?;
        let n = images.dims()[0];
        let mut out = Vec::with_capacity(n * CLASSES);
        for start in (0..n).step_by(chunk.max(1)) {
            let end = (start + chunk.max(1)).min(n);
            let mut g = Graph::new();
            let f = self.forward(&mut g, images.slice_outer(start, end)?, ForwardOptions::default())?;
            out.extend_from_slice(g.value(f.logits.expect("full forward")).data());
        }
        Tensor::new(&[n, CLASSES], out)
    }

    /// Post-ReLU activations of one conv layer, `N×32×32×C`.
    pub fn activations(&self, images: &Tensor, layer: LayerId) -> Result<Tensor> {
        let mut g = Graph::new();
        let f = self.forward(
            &mut g,
            images.clone(),
            ForwardOptions {
                stop_after: Some(layer),
                ..Default::default()
            },
        )?;
        Ok(g.value(*f.conv_outputs.last().expect("at least one conv")).clone())
    }
}
