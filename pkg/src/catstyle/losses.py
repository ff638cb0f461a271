"""Loss terms of the clustering objective and their combinations.

Three players share these pieces: the encoder minimizes the weighted sum of
the mutual-information, augmentation-invariance and adversarial terms; the
discriminator minimizes the mutual-information term alone; the critic
minimizes the Wasserstein estimate with a one-centered gradient penalty.

All functions accept torch tensors (the training path, gradients intact) or
plain array-likes (tests), returning 0-dim tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Callable

import numpy as np
import torch
import torch.nn.functional as F

Q_CLAMP = 1e-12


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return torch.as_tensor(arr)


def scalar(value) -> float:
    """Plain float of a python number or 0-dim tensor, grad-safe."""
    if isinstance(value, torch.Tensor):
        return float(value.detach())
    return float(value)


def mi_loss(pos_logits, neg_logits) -> torch.Tensor:
    """Binary-discrimination estimate of the image/latent mutual information.

    -mean(log S(pos)) - mean(log(1 - S(neg))) with S the logistic sigmoid,
    computed via softplus so finite logits never produce NaN.
    """
    pos = _as_tensor(pos_logits)
    neg = _as_tensor(neg_logits)
    if pos.numel() == 0 or neg.numel() == 0:
        raise ValueError("mi_loss requires nonempty logit batches")
    if pos.shape != neg.shape:
        raise ValueError(f"logit batches differ in shape: {tuple(pos.shape)} vs {tuple(neg.shape)}")
    return F.softplus(-pos).mean() + F.softplus(neg).mean()


def negative_pairing(m: int, rng: np.random.Generator) -> np.ndarray:
    """Within-batch partner positions j(i) != i for the negative pairs.

    A cyclic shift by a random offset drawn uniformly from [1, m-1]; the
    identity pairing can never occur.
    """
    if m < 2:
        raise ValueError(f"negative pairing needs a batch of >= 2, got {m}")
    offset = int(rng.integers(1, m))
    return (np.arange(m) + offset) % m


def aug_kl(p, q) -> torch.Tensor:
    """KL divergence between category distributions of an image and its
    augmented view, averaged over the batch.

    Terms with p_k = 0 contribute 0; q is clamped below at 1e-12.
    """
    p = _as_tensor(p)
    q = _as_tensor(q)
    if p.shape != q.shape:
        raise ValueError(f"simplex shapes differ: {tuple(p.shape)} vs {tuple(q.shape)}")
    log_ratio = torch.log(p.clamp_min(Q_CLAMP)) - torch.log(q.clamp_min(Q_CLAMP))
    kl = (p * log_ratio).sum(dim=-1)
    return kl.mean()


def adv_q_loss(critic_out) -> torch.Tensor:
    """Encoder side of the adversarial matching: -mean critic score."""
    c = _as_tensor(critic_out)
    if c.numel() == 0:
        raise ValueError("adv_q_loss requires a nonempty batch")
    return -c.mean()


def gradient_penalty(critic: Callable, z_hat: torch.Tensor, gp_lambda: float) -> torch.Tensor:
    """One-centered gradient penalty at interpolated latents.

    gp_lambda * mean((||d critic / d z_hat||_2 - 1)^2); the inner gradient
    keeps its graph so the penalty is differentiable w.r.t. critic weights.
    """
    if not z_hat.requires_grad:
        z_hat = z_hat.detach().clone().requires_grad_(True)
    scores = critic(z_hat)
    (grads,) = torch.autograd.grad(scores.sum(), z_hat, create_graph=True)
    finite = torch.isfinite(grads).all(dim=1)
    if not bool(finite.all()):
        bad = int((~finite).nonzero()[0, 0])
        raise ValueError(f"non-finite critic gradient at sample {bad}")
    norms = grads.norm(2, dim=1)
    return gp_lambda * ((norms - 1.0) ** 2).mean()


@dataclass
class CriticLoss:
    """Critic objective pieces for one batch."""

    total: torch.Tensor
    wasserstein_gap: torch.Tensor  # mean C(encoded) - mean C(prior)
    gp_term: torch.Tensor
    neg_critic_loss: torch.Tensor  # -total, the Wasserstein-distance monitor


def adv_c_loss(
    critic: Callable,
    z_encoded: torch.Tensor,
    z_prior: torch.Tensor,
    z_hat: torch.Tensor,
    gp_lambda: float,
) -> CriticLoss:
    """Critic side of the adversarial matching plus gradient penalty."""
    if not (len(z_encoded) == len(z_prior) == len(z_hat)):
        raise ValueError(
            f"batch sizes differ: {len(z_encoded)}, {len(z_prior)}, {len(z_hat)}"
        )
    gap = critic(z_encoded).mean() - critic(z_prior).mean()
    gp = gradient_penalty(critic, z_hat, gp_lambda)
    total = gap + gp
    return CriticLoss(total=total, wasserstein_gap=gap, gp_term=gp, neg_critic_loss=-total)


@dataclass
class LossBreakdown:
    """Every loss term and the three player totals for one training iteration.

    Fields hold tensors while a graph is alive and floats once recorded;
    neg_critic_loss is -l_c_total, the convergence monitor.
    """

    l_mi: Any
    l_aug: Any
    l_adv_q: Any
    l_adv_c: Any
    gp_term: Any
    l_q_total: Any
    l_d_total: Any
    l_c_total: Any
    neg_critic_loss: Any

    def as_floats(self) -> "LossBreakdown":
        return LossBreakdown(**{f.name: scalar(getattr(self, f.name)) for f in fields(self)})


def combine_objectives(
    l_mi,
    l_aug,
    l_adv_q,
    l_adv_c,
    gp_term,
    beta_mi: float,
    beta_aug: float,
    beta_adv: float,
) -> LossBreakdown:
    """Weighted totals for encoder, discriminator and critic.

    l_q_total = beta_mi*l_mi + beta_aug*l_aug + beta_adv*l_adv_q;
    l_d_total = beta_mi*l_mi; l_c_total = beta_adv*l_adv_c.
    """
    for name, value in (("l_mi", l_mi), ("l_aug", l_aug), ("l_adv_q", l_adv_q),
                        ("l_adv_c", l_adv_c), ("gp_term", gp_term)):
        if not math.isfinite(scalar(value)):
            raise ValueError(f"non-finite loss input {name}={scalar(value)}")
    l_q_total = beta_mi * l_mi + beta_aug * l_aug + beta_adv * l_adv_q
    l_d_total = beta_mi * l_mi
    l_c_total = beta_adv * l_adv_c
    return LossBreakdown(
        l_mi=l_mi,
        l_aug=l_aug,
        l_adv_q=l_adv_q,
        l_adv_c=l_adv_c,
        gp_term=gp_term,
        l_q_total=l_q_total,
        l_d_total=l_d_total,
        l_c_total=l_c_total,
        neg_critic_loss=-l_c_total,
    )
