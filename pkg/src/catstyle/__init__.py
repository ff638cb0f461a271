"""Unsupervised image clustering with a disentangled category/style latent."""

from .augment import AugmentSpec, augment_batch
from .config import ExperimentConfig, config_hash, default_beta_aug, load_config
from .data import Dataset, ImageBatch, load_idx_dataset, make_synthetic_blocks, minibatches
from .losses import (
    LossBreakdown,
    adv_c_loss,
    adv_q_loss,
    aug_kl,
    combine_objectives,
    gradient_penalty,
    mi_loss,
    negative_pairing,
)
from .metrics import MetricsReport, accuracy, ari, evaluate, kmeans, nmi
from .nets import build_models, encode, load_checkpoint, save_checkpoint
from .prior import PriorSample, interpolate, sample_prior
from .trainer import TrainState, assign_clusters, critic_step, encoder_step, init_state, train

__version__ = "0.1.0"

__all__ = [
    "AugmentSpec",
    "Dataset",
    "ExperimentConfig",
    "ImageBatch",
    "LossBreakdown",
    "MetricsReport",
    "PriorSample",
    "TrainState",
    "accuracy",
    "adv_c_loss",
    "adv_q_loss",
    "ari",
    "assign_clusters",
    "aug_kl",
    "augment_batch",
    "build_models",
    "combine_objectives",
    "config_hash",
    "critic_step",
    "default_beta_aug",
    "encode",
    "encoder_step",
    "evaluate",
    "gradient_penalty",
    "init_state",
    "interpolate",
    "kmeans",
    "load_checkpoint",
    "load_config",
    "load_idx_dataset",
    "make_synthetic_blocks",
    "mi_loss",
    "minibatches",
    "negative_pairing",
    "nmi",
    "sample_prior",
    "save_checkpoint",
    "train",
]
