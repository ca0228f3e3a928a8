//! Reference encoder-decoder segmenter.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use network::{
    backward, forward, predict_mask, soft_dice_loss, Gradients, Network, Probabilities, SegmenterParams,
};
pub use train::{fit, EarlyStopping, TrainConfig, TrainLog};
