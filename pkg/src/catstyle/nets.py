"""Model definitions: encoder, discriminator and critic.

The encoder variant is selected by input size (28, 32 or 96 square). Every
encoder yields a softmax category head, a linear style head and the flat
intermediate feature vector the discriminator shares. Leaky-ReLU slopes are
0.2 throughout; the discriminator and critic are plain 3-layer perceptrons
and the discriminator output stays a raw logit (sigmoid lives in the loss).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ExperimentConfig

LRELU_SLOPE = 0.2

SUPPORTED_IMAGE_SIZES = ((28, 28), (32, 32), (96, 96))


class ResBlock(nn.Module):
    """Pre-activation residual block: BN-ReLU-conv3x3 twice.

    2x2 average pooling after the second convolution when downsampling;
    the shortcut uses a learned 1x1 convolution when channel counts differ.
    """

    def __init__(self, in_ch: int, out_ch: int, down: bool = False):
        super().__init__()
        self.down = down
        self.bn1 = nn.BatchNorm2d(in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.shortcut = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x):
        h = self.conv1(F.relu(self.bn1(x)))
        h = self.conv2(F.relu(self.bn2(h)))
        if self.down:
            h = F.avg_pool2d(h, 2)
            x = F.avg_pool2d(x, 2)
        return h + self.shortcut(x)


class LatentHeads(nn.Module):
    """Category (softmax) and style (linear) projections of a shared vector."""

    def __init__(self, in_dim: int, num_clusters: int, style_dim: int):
        super().__init__()
        self.category = nn.Linear(in_dim, num_clusters)
        self.style = nn.Linear(in_dim, style_dim)

    def forward(self, h):
        return F.softmax(self.category(h), dim=1), self.style(h)


class ConvEncoder28(nn.Module):
    """Encoder for 28x28 inputs: two stride-2 convolutions then a dense layer.

    The discriminator's shared feature is the flattened output of the last
    convolutional stage.
    """

    def __init__(self, num_clusters: int, style_dim: int):
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(1, 64, 4, stride=2, padding=1),
            nn.BatchNorm2d(64),
            nn.LeakyReLU(LRELU_SLOPE),
            nn.Conv2d(64, 128, 4, stride=2, padding=1),
            nn.BatchNorm2d(128),
            nn.LeakyReLU(LRELU_SLOPE),
        )
        self.feature_dim = 128 * 7 * 7
        self.dense = nn.Sequential(
            nn.Linear(self.feature_dim, 1024),
            nn.BatchNorm1d(1024),
            nn.LeakyReLU(LRELU_SLOPE),
        )
        self.heads = LatentHeads(1024, num_clusters, style_dim)

    def forward(self, x):
        feat = self.conv(x).flatten(1)
        z_c, z_s = self.heads(self.dense(feat))
        return z_c, z_s, feat


class ResNetEncoder(nn.Module):
    """Residual encoder for 32x32 and 96x96 inputs, ending in global pooling.

    The discriminator's shared feature is the flattened output of the
    second-to-last residual block.
    """

    def __init__(self, num_clusters: int, style_dim: int, image_size: int):
        super().__init__()
        if image_size == 32:
            channels = [128, 256, 512]
        elif image_size == 96:
            channels = [64, 128, 256, 512]
        else:
            raise ValueError(f"no residual encoder for {image_size}x{image_size}")
        blocks = []
        in_ch = 1
        side = image_size
        for ch in channels:
            blocks.append(ResBlock(in_ch, ch, down=True))
            in_ch = ch
            side //= 2
        self.down_blocks = nn.Sequential(*blocks)
        self.last_block = ResBlock(in_ch, in_ch)
        self.feature_dim = in_ch * side * side
        self.tail = nn.Sequential(nn.BatchNorm2d(in_ch), nn.ReLU())
        self.heads = LatentHeads(in_ch, num_clusters, style_dim)

    def forward(self, x):
        h = self.down_blocks(x)
        feat = h.flatten(1)
        h = self.tail(self.last_block(h))
        pooled = h.mean(dim=(2, 3))
        z_c, z_s = self.heads(pooled)
        return z_c, z_s, feat


class Discriminator(nn.Module):
    """Scores (feature, latent) pairs; output is the pre-sigmoid logit."""

    def __init__(self, feature_dim: int, latent_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(feature_dim + latent_dim, 1024),
            nn.LeakyReLU(LRELU_SLOPE),
            nn.Linear(1024, 512),
            nn.LeakyReLU(LRELU_SLOPE),
            nn.Linear(512, 1),
        )

    def forward(self, features, z):
        return self.net(torch.cat([features, z], dim=1)).squeeze(1)


class Critic(nn.Module):
    """Scalar score of a latent vector for the Wasserstein matching."""

    def __init__(self, latent_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(latent_dim, 1024),
            nn.LeakyReLU(LRELU_SLOPE),
            nn.Linear(1024, 512),
            nn.LeakyReLU(LRELU_SLOPE),
            nn.Linear(512, 1),
        )

    def forward(self, z):
        return self.net(z).squeeze(1)


def build_models(
    config: ExperimentConfig, device: str | torch.device = "cpu"
) -> tuple[nn.Module, Discriminator, Critic]:
    """Instantiate encoder, discriminator and critic for the configured
    input size, with seeded random initialization."""
    torch.manual_seed(config.seed)
    h, w = config.image_size
    if (h, w) not in SUPPORTED_IMAGE_SIZES or h != w:
        supported = ", ".join(f"{a}x{b}" for a, b in SUPPORTED_IMAGE_SIZES)
        raise ValueError(f"unsupported image size {h}x{w}; supported: {supported}")
    if h == 28:
        encoder: nn.Module = ConvEncoder28(config.num_clusters, config.style_dim)
    else:
        encoder = ResNetEncoder(config.num_clusters, config.style_dim, h)
    latent_dim = config.num_clusters + config.style_dim
    discriminator = Discriminator(encoder.feature_dim, latent_dim)
    critic = Critic(latent_dim)
    return encoder.to(device), discriminator.to(device), critic.to(device)


def encode(encoder: nn.Module, images: np.ndarray | torch.Tensor):
    """Run the encoder on a (m, H, W) batch.

    Returns (z_c, z_s, features) tensors; z_c rows live on the probability
    simplex.
    """
    device = next(encoder.parameters()).device
    if isinstance(images, np.ndarray):
        images = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32))
    if images.dim() == 3:
        images = images.unsqueeze(1)
    return encoder(images.to(device))


def encode_dataset(
    encoder: nn.Module, images: np.ndarray, batch_size: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation-mode encoding of a full image array into (z_c, z_s) numpy
    matrices; batch statistics are frozen."""
    was_training = encoder.training
    encoder.eval()
    zcs, zss = [], []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            z_c, z_s, _ = encode(encoder, images[start : start + batch_size])
            zcs.append(z_c.cpu().numpy())
            zss.append(z_s.cpu().numpy())
    if was_training:
        encoder.train()
    return np.concatenate(zcs), np.concatenate(zss)


def arch_hash(config: ExperimentConfig) -> str:
    """Hash of the architecture-determining fields; used to reject
    checkpoint/config mismatches."""
    key = json.dumps(
        {
            "image_size": list(config.image_size),
            "num_clusters": config.num_clusters,
            "style_dim": config.style_dim,
        },
        sort_keys=True,
    )
    return hashlib.sha256(key.encode()).hexdigest()[:12]


def save_checkpoint(
    path: str | Path,
    config: ExperimentConfig,
    encoder: nn.Module,
    discriminator: Discriminator,
    critic: Critic,
    step: int,
    optimizer_states: dict[str, Any] | None = None,
) -> None:
    """Persist all parameters keyed by path, with the config embedded."""
    payload = {
        "config": config.to_dict(),
        "arch_hash": arch_hash(config),
        "step": step,
        "encoder": encoder.state_dict(),
        "discriminator": discriminator.state_dict(),
        "critic": critic.state_dict(),
        "optimizers": optimizer_states or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path, device: str | torch.device = "cpu") -> dict[str, Any]:
    """Rebuild models from a checkpoint; evaluation outputs reproduce the
    saved model bit for bit."""
    payload = torch.load(Path(path), map_location=device, weights_only=True)
    config = ExperimentConfig.from_dict(payload["config"])
    encoder, discriminator, critic = build_models(config, device)
    encoder.load_state_dict(payload["encoder"])
    discriminator.load_state_dict(payload["discriminator"])
    critic.load_state_dict(payload["critic"])
    return {
        "config": config,
        "arch_hash": payload["arch_hash"],
        "step": payload["step"],
        "encoder": encoder,
        "discriminator": discriminator,
        "critic": critic,
        "optimizers": payload.get("optimizers", {}),
    }
