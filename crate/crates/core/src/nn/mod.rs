//! Mini-CNN with hand-written reverse-mode gradients and the transfer-learning
//! loop: pretext pretraining, head replacement, L2-SP fine-tuning with Adam,
//! early stopping and progressive unfreezing.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use loss::{loss_ce_l2sp, softmax, LossOutput};
pub use model::{ArchSpec, CnnModel, ForwardCache, Layer, LayerKind};
pub use tensor::Tensor;
pub use train::{evaluate_set, train, train_monitored, EpochRecord, TrainConfig, TrainExample, TrainHistory};

use crate::error::Result;

/// Trains a binary lesion/no-lesion model from scratch, then swaps in a fresh
/// `n_classes` head anchored at the pretext weights.
pub fn pretrain_pretext(
    arch: &ArchSpec,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    cfg: &TrainConfig,
    n_classes: usize,
) -> Result<(CnnModel, TrainHistory)> {
    let base = CnnModel::new(arch.clone().with_classes(2), cfg.seed)?;
    let pretext_cfg = TrainConfig { lambda: 0.0, ..cfg.clone() };
    let (pre, hist) = train(&base, train_set, val_set, &pretext_cfg)?;
    Ok((pre.replace_head(n_classes, cfg.seed ^ 0x5eed)?, hist))
}
