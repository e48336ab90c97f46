//! The retina-net + VVS-net model: construction, training, evaluation and checkpoints.

mod checkpoint;
mod config;
mod network;
mod train;

pub use checkpoint::{decode as decode_checkpoint, encode as encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{LayerId, ModelConfig, HIDDEN, KERNEL, MAX_BOTTLENECK, MAX_DEPTH, WIDTH};
pub use network::{
    build_model, build_model_with_rng, parameter_layout, ConvParams, DenseParams, Forward, ForwardOptions,
    TrainingMeta, VisualSystemModel,
};
pub use train::{accuracy_from_logits, evaluate, evaluate_shuffled, train, EpochStats, TrainLog};
