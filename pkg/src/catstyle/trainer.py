"""Alternating training loop: n_critic critic updates per joint
encoder+discriminator update, with JSONL metrics logging and checkpoints.

The critic path encodes un-augmented batches, matches them against prior
draws and penalizes the critic's input gradients at interpolates. The
encoder path pairs each image's features with its own latent (positive) and
a shifted partner's latent (negative), and penalizes KL between the
category distributions of an image and its augmented view.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import torch

from .augment import augment_batch
from .config import ExperimentConfig, config_hash
from .data import (
    Dataset,
    ImageBatch,
    load_cifar10,
    load_idx_dataset,
    load_image_folder,
    make_synthetic_blocks,
    minibatches,
)
from .losses import (
    LossBreakdown,
    adv_c_loss,
    adv_q_loss,
    aug_kl,
    combine_objectives,
    mi_loss,
    negative_pairing,
    scalar,
)
from .metrics import evaluate
from .nets import build_models, encode, encode_dataset, save_checkpoint
from .prior import interpolate, sample_prior

SYNTHETIC_BLOCKS_PER_CLASS = 1000
NEG_CRITIC_WINDOW = 50


class TrainingError(RuntimeError):
    """Non-finite loss or other unrecoverable training failure."""


@dataclass
class RngStreams:
    """Independent seeded streams for every stochastic choice in training."""

    data: np.random.Generator
    augment: np.random.Generator
    prior: np.random.Generator
    pairing: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.default_rng(s) for s in children))


@dataclass
class TrainState:
    """Everything the loop owns: models, optimizers, rng streams, counters."""

    config: ExperimentConfig
    dataset: Dataset
    encoder: torch.nn.Module
    discriminator: torch.nn.Module
    critic: torch.nn.Module
    opt_encoder: torch.optim.Optimizer
    opt_discriminator: torch.optim.Optimizer
    opt_critic: torch.optim.Optimizer
    rngs: RngStreams
    step: int = 0
    critic_updates: int = 0
    neg_critic_trace: list[float] = field(default_factory=list)  # one per encoder step
    l_q_trace: list[float] = field(default_factory=list)  # one per encoder step
    _pending_critic: list[float] = field(default_factory=list)
    _last_l_adv_c: float = 0.0
    _last_gp: float = 0.0

    @property
    def device(self) -> torch.device:
        return next(self.encoder.parameters()).device


def load_dataset(config: ExperimentConfig) -> Dataset:
    """Resolve the configured dataset to a loaded, preprocessed Dataset."""
    root = Path(config.data_path)
    if config.dataset_name == "synthetic_blocks":
        ds = make_synthetic_blocks(
            SYNTHETIC_BLOCKS_PER_CLASS, config.image_size, noise_std=0.1, seed=config.seed
        )
    elif config.dataset_name in ("mnist", "fashion_mnist"):
        candidates = [root / config.dataset_name, root]
        found = next(
            (
                c
                for c in candidates
                if (c / "train-images-idx3-ubyte").exists()
                or (c / "train-images-idx3-ubyte.gz").exists()
            ),
            None,
        )
        if found is None:
            raise FileNotFoundError(
                f"no IDX files for {config.dataset_name} under {root} "
                f"(looked in {', '.join(str(c) for c in candidates)})"
            )
        ds = load_idx_dataset(found, merge_train_test=True, name=config.dataset_name)
    elif config.dataset_name == "cifar10":
        ds = load_cifar10(root)
    elif config.dataset_name == "image_folder":
        ds = load_image_folder(root, config.image_size, grayscale=config.grayscale)
    else:
        raise ValueError(f"no loader for dataset {config.dataset_name!r}")
    if ds.image_size != tuple(config.image_size):
        raise ValueError(
            f"dataset images are {ds.image_size}, config expects {tuple(config.image_size)}"
        )
    return ds


def init_state(
    config: ExperimentConfig,
    dataset: Dataset | None = None,
    device: str | torch.device = "cpu",
) -> TrainState:
    """Build models, optimizers and rng streams for a fresh run."""
    if dataset is None:
        dataset = load_dataset(config)
    encoder, discriminator, critic = build_models(config, device)
    encoder.train()
    discriminator.train()
    critic.train()
    betas = (config.adam_beta1, config.adam_beta2)
    lr = config.learning_rate
    return TrainState(
        config=config,
        dataset=dataset,
        encoder=encoder,
        discriminator=discriminator,
        critic=critic,
        opt_encoder=torch.optim.Adam(encoder.parameters(), lr=lr, betas=betas),
        opt_discriminator=torch.optim.Adam(discriminator.parameters(), lr=lr, betas=betas),
        opt_critic=torch.optim.Adam(critic.parameters(), lr=lr, betas=betas),
        rngs=RngStreams.from_seed(config.seed),
    )


def _latent(z_c: torch.Tensor, z_s: torch.Tensor) -> torch.Tensor:
    return torch.cat([z_c, z_s], dim=1)


def _check_finite(value: torch.Tensor, context: str, parts: dict[str, float]) -> None:
    if not bool(torch.isfinite(value).all()):
        dump = ", ".join(f"{k}={v:.6g}" for k, v in parts.items())
        raise TrainingError(f"non-finite {context} (parts: {dump})")


def critic_step(state: TrainState, batch: ImageBatch) -> float:
    """One critic update on a fresh batch; touches no other parameters.

    Returns the critic objective value l_c_total.
    """
    cfg = state.config
    with torch.no_grad():
        z_c, z_s, _ = encode(state.encoder, batch.images)
        z = _latent(z_c, z_s)
    prior_batch = sample_prior(
        len(batch.images), cfg.num_clusters, cfg.style_dim, cfg.sigma, state.rngs.prior
    )
    z_tilde = torch.from_numpy(prior_batch.as_matrix()).to(state.device)
    eps = state.rngs.prior.uniform(size=len(batch.images)).astype(np.float32)
    z_hat_np = interpolate(z.cpu().numpy(), prior_batch.as_matrix(), eps)
    z_hat = torch.from_numpy(z_hat_np).to(state.device).requires_grad_(True)

    try:
        parts = adv_c_loss(state.critic, z, z_tilde, z_hat, cfg.gp_lambda)
    except ValueError as exc:
        raise TrainingError(f"critic step {state.critic_updates + 1} failed: {exc}") from exc
    l_c_total = cfg.beta_adv * parts.total
    _check_finite(
        l_c_total,
        "critic loss",
        {"gap": scalar(parts.wasserstein_gap), "gp_term": scalar(parts.gp_term)},
    )
    state.opt_critic.zero_grad(set_to_none=True)
    l_c_total.backward()
    state.opt_critic.step()

    state.critic_updates += 1
    state._last_l_adv_c = scalar(parts.total)
    state._last_gp = scalar(parts.gp_term)
    value = scalar(l_c_total)
    state._pending_critic.append(-value)
    return value


def encoder_step(state: TrainState, batch: ImageBatch) -> LossBreakdown:
    """One joint encoder+discriminator update; the critic is untouched."""
    cfg = state.config
    z_c, z_s, features = encode(state.encoder, batch.images)
    z = _latent(z_c, z_s)

    if cfg.augmentation.enabled:
        augmented = augment_batch(state.dataset, batch.indices, cfg.augmentation, state.rngs.augment)
        z_c_aug, _, _ = encode(state.encoder, augmented)
    else:
        z_c_aug = z_c
    l_aug = aug_kl(z_c, z_c_aug)

    partners = negative_pairing(len(batch.images), state.rngs.pairing)
    pos_logits = state.discriminator(features, z)
    neg_logits = state.discriminator(features, z[partners])
    l_mi = mi_loss(pos_logits, neg_logits)
    l_adv_q = adv_q_loss(state.critic(z))

    loss_parts = {"l_mi": scalar(l_mi), "l_aug": scalar(l_aug), "l_adv_q": scalar(l_adv_q)}
    try:
        breakdown = combine_objectives(
            l_mi,
            l_aug,
            l_adv_q,
            l_adv_c=state._last_l_adv_c,
            gp_term=state._last_gp,
            beta_mi=cfg.beta_mi,
            beta_aug=cfg.beta_aug,
            beta_adv=cfg.beta_adv,
        )
    except ValueError as exc:
        dump = ", ".join(f"{k}={v:.6g}" for k, v in loss_parts.items())
        raise TrainingError(f"encoder step {state.step + 1} failed: {exc} ({dump})") from exc
    _check_finite(breakdown.l_q_total, "encoder loss", loss_parts)
    state.opt_encoder.zero_grad(set_to_none=True)
    state.opt_discriminator.zero_grad(set_to_none=True)
    # l_adv_q deposits gradients on the critic; they are cleared, not applied
    state.opt_critic.zero_grad(set_to_none=True)
    breakdown.l_q_total.backward()
    state.opt_encoder.step()
    state.opt_discriminator.step()

    state.step += 1
    recorded = breakdown.as_floats()
    state.l_q_trace.append(recorded.l_q_total)
    if state._pending_critic:
        state.neg_critic_trace.append(float(np.mean(state._pending_critic)))
        state._pending_critic.clear()
    return recorded


def assign_clusters(encoder, dataset: Dataset | np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax cluster per image in evaluation mode; ties go to the lowest index."""
    images = dataset.images if isinstance(dataset, Dataset) else dataset
    z_c, _ = encode_dataset(encoder, images, batch_size=batch_size)
    return z_c.argmax(axis=1).astype(np.int64)


@dataclass
class TrainResult:
    """Artifacts of one training run."""

    checkpoint_path: Path
    metrics_path: Path
    records: list[dict]
    neg_critic_trace: list[float]
    l_q_trace: list[float]
    final_reports: dict
    state: TrainState


def train(
    config: ExperimentConfig,
    out_dir: str | Path,
    dataset: Dataset | None = None,
    device: str | torch.device = "cpu",
    strict_deterministic: bool = False,
    log_fn: Callable[[str], None] | None = None,
) -> TrainResult:
    """Run the full schedule and leave a checkpoint, JSONL metrics log and
    final evaluation behind."""
    if strict_deterministic:
        torch.use_deterministic_algorithms(True)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = init_state(config, dataset, device)
    dataset = state.dataset
    stream: Iterator[ImageBatch] = minibatches(
        dataset, config.batch_size, seed=state.rngs.data, drop_last=True
    )
    metrics_path = out / "metrics.jsonl"
    checkpoint_path = out / "checkpoint.pt"
    records: list[dict] = []
    if log_fn:
        log_fn(
            f"training {config.dataset_name}: {config.total_encoder_steps} encoder steps, "
            f"config hash {config_hash(config)}, seed {config.seed}"
        )
    with open(metrics_path, "w") as metrics_file:
        for _ in range(config.total_encoder_steps):
            for _ in range(config.n_critic):
                critic_step(state, next(stream))
            breakdown = encoder_step(state, next(stream))
            if state.step % config.eval_every == 0 or state.step == config.total_encoder_steps:
                window = state.neg_critic_trace[-NEG_CRITIC_WINDOW:]
                record = {
                    "step": state.step,
                    "l_mi": breakdown.l_mi,
                    "l_aug": breakdown.l_aug,
                    "l_adv_q": breakdown.l_adv_q,
                    "l_c": breakdown.l_c_total,
                    "neg_critic_loss": float(np.mean(window)),
                }
                reports = evaluate(state.encoder, dataset, seed=config.seed)
                record["acc"] = reports["argmax"].acc
                record["nmi"] = reports["argmax"].nmi
                record["ari"] = reports["argmax"].ari
                records.append(record)
                metrics_file.write(json.dumps(record) + "\n")
                metrics_file.flush()
                _save(state, checkpoint_path)
                if log_fn:
                    log_fn(
                        f"step {record['step']}: acc={record['acc']:.4f} "
                        f"nmi={record['nmi']:.4f} neg_critic={record['neg_critic_loss']:.4f}"
                    )
    _save(state, checkpoint_path)
    final_reports = evaluate(state.encoder, dataset, seed=config.seed)
    return TrainResult(
        checkpoint_path=checkpoint_path,
        metrics_path=metrics_path,
        records=records,
        neg_critic_trace=list(state.neg_critic_trace),
        l_q_trace=list(state.l_q_trace),
        final_reports=final_reports,
        state=state,
    )


def _save(state: TrainState, path: Path) -> None:
    save_checkpoint(
        path,
        state.config,
        state.encoder,
        state.discriminator,
        state.critic,
        state.step,
        optimizer_states={
            "encoder": state.opt_encoder.state_dict(),
            "discriminator": state.opt_discriminator.state_dict(),
            "critic": state.opt_critic.state_dict(),
        },
    )
