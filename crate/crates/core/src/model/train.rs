use serde::Serialize;

use crate::data::augment::{augment, permute_channels, shuffle_channels, CHANNEL_PERMUTATIONS};
use crate::data::cifar::{Cifar10Set, CHANNELS, CLASSES, SIDE};
use crate::error::{Error, Result};
use crate::ndnum::{Graph, Optimizer, Rng, Tensor};

use super::network::{ForwardOptions, VisualSystemModel};

pub(crate) const TRAIN_STREAM: u64 = 2;
const EVAL_SHUFFLE_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy on the augmented training batches as they were seen.
    pub train_accuracy: f64,
    pub batch_losses: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

/// Fraction of rows whose argmax matches the label; ties go to the lower class.
pub fn accuracy_from_logits(logits: &[f32], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = logits
        .chunks_exact(CLASSES)
        .zip(labels)
        .filter(|(row, &label)| argmax(row) == label as usize)
        .count();
    correct as f64 / labels.len() as f64
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Train in place for `model.config.epochs` epochs.
///
/// Each batch is drawn from a seeded permutation; every image is randomly
/// flipped and shifted, and channel-shuffled when the config asks for it.
pub fn train(
    model: &mut VisualSystemModel,
    train_set: &Cifar10Set,
    progress: &mut dyn FnMut(&EpochStats),
) -> Result<TrainLog> {
    let config = model.config.clone();
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let mut rng = Rng::derived(config.seed, TRAIN_STREAM);
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, config.weight_decay);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainLog::default();
    let image_len = SIDE * SIDE * CHANNELS;

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0f64;
        let mut correct = 0.0f64;
        let mut batch_losses = Vec::new();
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let mut pixels = Vec::with_capacity(batch.len() * image_len);
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut img = augment(train_set.image(i), SIDE, SIDE, &mut rng);
                if config.shuffle_channels {
                    img = shuffle_channels(&img, &mut rng);
                }
                pixels.extend(img);
                labels.push(train_set.labels[i]);
            }
            let images = Tensor::new(&[batch.len(), SIDE, SIDE, CHANNELS], pixels)?;
            let targets: Vec<usize> = labels.iter().map(|&l| l as usize).collect();

            let diverged = |e: Error| match e {
                Error::NonFinite { op } => {
                    Error::Diverged(format!("epoch {epoch} batch {batch_index}: non-finite value in {op}"))
                }
                other => other,
            };
            let mut g = Graph::new();
            let fwd = model
                .forward(
                    &mut g,
                    images,
                    ForwardOptions {
                        param_grad: true,
                        ..Default::default()
                    },
                )
                .map_err(diverged)?;
            let logits = fwd.logits.expect("full forward");
            let loss = g.softmax_xent(logits, &targets).map_err(diverged)?;
            let loss_value = g.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::Diverged(format!("epoch {epoch} batch {batch_index}: loss {loss_value}")));
            }
            correct += accuracy_from_logits(g.value(logits).data(), &labels) * batch.len() as f64;
            loss_sum += loss_value as f64 * batch.len() as f64;
            batch_losses.push(loss_value);

            g.backward(loss).map_err(diverged)?;
            let grads: Vec<Tensor> = fwd
                .params
                .iter()
                .map(|&p| g.grad(p).expect("parameter gradient"))
                .collect();
            drop(g);
            optimizer.step(&mut model.parameters_mut(), &grads)?;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct / train_set.len() as f64,
            batch_losses,
        };
        model.meta.epochs_completed = epoch + 1;
        model.meta.train_accuracy = Some(stats.train_accuracy as f32);
        progress(&stats);
        log.epochs.push(stats);
    }
    Ok(log)
}

/// Clean-image accuracy.
pub fn evaluate(model: &VisualSystemModel, set: &Cifar10Set, batch_size: usize) -> Result<f64> {
    let logits = model.logits(&set.images, batch_size)?;
    Ok(accuracy_from_logits(logits.data(), &set.labels))
}

/// Accuracy when every test image has its channels permuted at random.
pub fn evaluate_shuffled(model: &VisualSystemModel, set: &Cifar10Set, batch_size: usize, seed: u64) -> Result<f64> {
    let mut rng = Rng::derived(seed, EVAL_SHUFFLE_STREAM);
    let pixels: Vec<f32> = (0..set.len())
        .flat_map(|i| permute_channels(set.image(i), CHANNEL_PERMUTATIONS[rng.below(6) as usize]))
        .collect();
    let images = Tensor::new(set.images.dims(), pixels)?;
    let logits = model.logits(&images, batch_size)?;
    Ok(accuracy_from_logits(logits.data(), &set.labels))
}
