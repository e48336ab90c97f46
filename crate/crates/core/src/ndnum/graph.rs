use crate::error::{Error, Result};

use super::kernels::{self, ConvShape};
use super::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    /// inputs: image batch, kernels, bias
    Conv2dSame,
    Relu,
    Reshape,
    /// inputs: x, weights, bias
    Linear,
    /// input: logits; caches the softmax for the backward pass
    SoftmaxXent { labels: Vec<usize>, probs: Vec<f32> },
    Pick { offset: usize },
    WeightedSum { weights: Vec<f32> },
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2dSame => "conv2d_same",
            Op::Relu => "relu",
            Op::Reshape => "reshape",
            Op::Linear => "linear",
            Op::SoftmaxXent { .. } => "softmax_xent",
            Op::Pick { .. } => "pick",
            Op::WeightedSum { .. } => "weighted_sum",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only computation record. A node's inputs always precede it, so
/// insertion order is a topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f32>>>,
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = logits.iter().map(|&z| ((z - max) as f64).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| (e / total) as f32).collect()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op_tag(&self, id: NodeId) -> &'static str {
        self.nodes[id.0].op.tag()
    }

    /// Gradient of the last `backward` loss with respect to `id`, if it was tracked.
    pub fn grad(&self, id: NodeId) -> Option<Tensor> {
        let g = self.grads.get(id.0)?.as_ref()?;
        Some(Tensor::new(self.nodes[id.0].value.dims(), g.clone()).expect("grad shape"))
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> Result<NodeId> {
        let value = value.ensure_finite(op.tag())?;
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            inputs,
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// `H×W×Cin` or `N×H×W×Cin` input, `K×K×Cin×Cout` kernels, `Cout` bias.
    pub fn conv2d_same(&mut self, input: NodeId, kernels: NodeId, bias: NodeId) -> Result<NodeId> {
        let shape = conv_shape(self.value(input), self.value(kernels), self.value(bias))?;
        let x = self.value(input);
        let out = kernels::conv_forward(&shape, x.data(), self.value(kernels).data(), self.value(bias).data());
        let mut dims = x.dims().to_vec();
        *dims.last_mut().unwrap() = shape.cout;
        let value = Tensor::new(&dims, out)?;
        self.push(Op::Conv2dSame, vec![input, kernels, bias], value)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let out: Vec<f32> = v.data().iter().map(|&a| if a < 0.0 { 0.0 } else { a }).collect();
        let value = Tensor::new(v.dims(), out)?;
        self.push(Op::Relu, vec![x], value)
    }

    pub fn reshape(&mut self, x: NodeId, dims: &[usize]) -> Result<NodeId> {
        let value = self.value(x).reshape(dims)?;
        self.push(Op::Reshape, vec![x], value)
    }

    /// Collapse everything after the leading (batch) axis.
    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId> {
        let dims = self.value(x).dims();
        let batch = dims[0];
        let rest = dims[1..].iter().product::<usize>().max(1);
        self.reshape(x, &[batch, rest])
    }

    /// `x` is `N` or `B×N`; `weights` is `N×M`; `bias` is `M`.
    pub fn linear(&mut self, x: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(weights), self.value(bias));
        let (rows, inner) = match xv.dims() {
            [n] => (1, *n),
            [b, n] => (*b, *n),
            d => return Err(Error::Shape(format!("linear input must be rank 1 or 2, got {d:?}"))),
        };
        let &[w_in, w_out] = wv.dims() else {
            return Err(Error::Shape(format!("linear weights must be rank 2, got {:?}", wv.dims())));
        };
        if w_in != inner || bv.dims() != [w_out] {
            return Err(Error::Shape(format!(
                "linear: x {:?}, W {:?}, b {:?}",
                xv.dims(),
                wv.dims(),
                bv.dims()
            )));
        }
        let mut out: Vec<f32> = bv.data().iter().copied().cycle().take(rows * w_out).collect();
        kernels::gemm(rows, inner, w_out, xv.data(), (inner, 1), wv.data(), (w_out, 1), 1.0, &mut out, (w_out, 1));
        let dims: Vec<usize> = if xv.rank() == 1 { vec![w_out] } else { vec![rows, w_out] };
        let value = Tensor::new(&dims, out)?;
        self.push(Op::Linear, vec![x, weights, bias], value)
    }

    /// Mean cross-entropy of softmax(logits) against integer labels.
    ///
    /// `logits` is `C` (one label) or `B×C` (one label per row).
    pub fn softmax_xent(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lv = self.value(logits);
        let (rows, classes) = match lv.dims() {
            [c] => (1, *c),
            [b, c] => (*b, *c),
            d => return Err(Error::Shape(format!("logits must be rank 1 or 2, got {d:?}"))),
        };
        if labels.len() != rows {
            return Err(Error::Shape(format!("{} labels for {rows} logit rows", labels.len())));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let mut probs = Vec::with_capacity(rows * classes);
        let mut total = 0.0f64;
        for (row, &label) in lv.data().chunks_exact(classes).zip(labels) {
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let log_sum: f64 = row.iter().map(|&z| ((z - max) as f64).exp()).sum::<f64>().ln();
            total += log_sum - (row[label] - max) as f64;
            probs.extend(softmax(row));
        }
        let value = Tensor::scalar((total / rows as f64) as f32);
        self.push(
            Op::SoftmaxXent {
                labels: labels.to_vec(),
                probs,
            },
            vec![logits],
            value,
        )
    }

    /// Scalar equal to one element of `x`.
    pub fn pick(&mut self, x: NodeId, index: &[usize]) -> Result<NodeId> {
        let v = self.value(x);
        let offset = v.offset(index)?;
        let value = Tensor::scalar(v.data()[offset]);
        self.push(Op::Pick { offset }, vec![x], value)
    }

    /// Scalar `Σ wᵢ·xᵢ` with constant weights.
    pub fn weighted_sum(&mut self, x: NodeId, weights: &Tensor) -> Result<NodeId> {
        let v = self.value(x);
        if v.dims() != weights.dims() {
            return Err(Error::Shape(format!("weighted_sum {:?} vs {:?}", v.dims(), weights.dims())));
        }
        let s: f64 = v.data().iter().zip(weights.data()).map(|(&a, &b)| a as f64 * b as f64).sum();
        let value = Tensor::scalar(s as f32);
        self.push(
            Op::WeightedSum {
                weights: weights.data().to_vec(),
            },
            vec![x],
            value,
        )
    }

    /// Reverse sweep from a scalar node, filling gradient buffers of every
    /// node that depends on a `requires_grad` leaf.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let n = self.value(loss).len();
        if n != 1 {
            return Err(Error::NonScalarLoss(n));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || node.inputs.is_empty() {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let wants: Vec<bool> = node.inputs.iter().map(|i| self.nodes[i.0].requires_grad).collect();
            let contributions = self.local_backward(node, &g, &wants)?;
            grads[idx] = Some(g);
            for (input, contribution) in node.inputs.iter().zip(contributions) {
                let Some(c) = contribution else { continue };
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        for (idx, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        op: self.nodes[idx].op.tag(),
                    });
                }
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn local_backward(&self, node: &Node, g: &[f32], wants: &[bool]) -> Result<Vec<Option<Vec<f32>>>> {
        let input = |i: usize| &self.nodes[node.inputs[i].0].value;
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv2dSame => {
                let (x, k, b) = (input(0), input(1), input(2));
                let shape = conv_shape(x, k, b)?;
                let grads = kernels::conv_backward(&shape, x.data(), k.data(), g, (wants[0], wants[1], wants[2]));
                vec![grads.input, grads.kernels, grads.bias]
            }
            Op::Relu => {
                let x = input(0);
                let dx = x.data().iter().zip(g).map(|(&a, &d)| if a > 0.0 { d } else { 0.0 }).collect();
                vec![Some(dx)]
            }
            Op::Reshape => vec![Some(g.to_vec())],
            Op::Linear => {
                let (x, w) = (input(0), input(1));
                let (rows, inner) = match x.dims() {
                    [n] => (1, *n),
                    [b, n] => (*b, *n),
                    _ => unreachable!(),
                };
                let out = w.dims()[1];
                let dx = wants[0].then(|| {
                    let mut dx = vec![0.0f32; rows * inner];
                    kernels::gemm(rows, out, inner, g, (out, 1), w.data(), (1, out), 0.0, &mut dx, (inner, 1));
                    dx
                });
                let dw = wants[1].then(|| {
                    let mut dw = vec![0.0f32; inner * out];
                    kernels::gemm(inner, rows, out, x.data(), (1, inner), g, (out, 1), 0.0, &mut dw, (out, 1));
                    dw
                });
                let db = wants[2].then(|| {
                    let mut acc = vec![0.0f64; out];
                    for row in g.chunks_exact(out) {
                        acc.iter_mut().zip(row).for_each(|(a, &v)| *a += v as f64);
                    }
                    acc.into_iter().map(|a| a as f32).collect()
                });
                vec![dx, dw, db]
            }
            Op::SoftmaxXent { labels, probs } => {
                let classes = probs.len() / labels.len();
                let scale = g[0] / labels.len() as f32;
                let mut d = probs.clone();
                for (row, &label) in d.chunks_exact_mut(classes).zip(labels) {
                    row[label] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                vec![Some(d)]
            }
            Op::Pick { offset } => {
                let mut d = vec![0.0f32; input(0).len()];
                d[*offset] = g[0];
                vec![Some(d)]
            }
            Op::WeightedSum { weights } => vec![Some(weights.iter().map(|w| w * g[0]).collect())],
        })
    }
}

fn conv_shape(x: &Tensor, k: &Tensor, b: &Tensor) -> Result<ConvShape> {
    let (batch, h, w, cin) = match x.dims() {
        [h, w, c] => (1, *h, *w, *c),
        [n, h, w, c] => (*n, *h, *w, *c),
        d => return Err(Error::Shape(format!("conv input must be rank 3 or 4, got {d:?}"))),
    };
    let &[kh, kw, kcin, cout] = k.dims() else {
        return Err(Error::Shape(format!("conv kernels must be rank 4, got {:?}", k.dims())));
    };
    if kh != kw || kh % 2 == 0 {
        return Err(Error::Shape(format!("conv kernels must be square and odd, got {kh}×{kw}")));
    }
    if kcin != cin {
        return Err(Error::Shape(format!("kernel expects {kcin} input channels, input has {cin}")));
    }
    if b.dims() != [cout] {
        return Err(Error::Shape(format!("bias {:?} does not match {cout} output channels", b.dims())));
    }
    Ok(ConvShape {
        batch,
        h,
        w,
        cin,
        cout,
        k: kh,
    })
}
