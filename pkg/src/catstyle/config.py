"""Experiment configuration: definition, validation, JSON persistence.

A config file is a single JSON document; every omitted field takes the
default below, so a one-line file selecting a dataset is a complete
experiment. `CATSTYLE_DATA_PATH` may override data_path (nothing else).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .augment import AugmentSpec

KNOWN_DATASETS = ("mnist", "fashion_mnist", "cifar10", "image_folder", "synthetic_blocks")

DATA_PATH_ENV_VAR = "CATSTYLE_DATA_PATH"

_DEFAULT_IMAGE_SIZES = {
    "mnist": (28, 28),
    "fashion_mnist": (28, 28),
    "cifar10": (32, 32),
    "image_folder": (96, 96),
    "synthetic_blocks": (28, 28),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


def default_beta_aug(dataset_name: str) -> float:
    """Augmentation-loss weight by dataset: 2 for the MNIST pair, 4 otherwise."""
    if dataset_name not in KNOWN_DATASETS:
        raise ConfigError(
            "dataset_name", f"unknown dataset {dataset_name!r}; known: {', '.join(KNOWN_DATASETS)}"
        )
    return 2.0 if dataset_name in ("mnist", "fashion_mnist") else 4.0


def default_augment_spec(dataset_name: str) -> AugmentSpec:
    """Per-dataset augmentation defaults; digits are never flipped."""
    hflip = 0.0 if dataset_name == "mnist" else 0.5
    return AugmentSpec(hflip_prob=hflip)


@dataclass
class ExperimentConfig:
    """All hyperparameters of one clustering experiment."""

    dataset_name: str = "mnist"
    data_path: str = "./data"
    num_clusters: int = 10
    style_dim: int = 50
    sigma: float = 0.1
    gp_lambda: float = 10.0
    beta_mi: float = 0.5
    beta_aug: float | None = None  # resolved per dataset when left unset
    beta_adv: float = 1.0
    n_critic: int = 4
    batch_size: int = 64
    learning_rate: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    total_encoder_steps: int = 20000
    eval_every: int = 500
    seed: int = 0
    grayscale: bool = True
    image_size: tuple[int, int] | None = None  # resolved per dataset when left unset
    augmentation: AugmentSpec | None = None  # resolved per dataset when left unset

    def __post_init__(self):
        if self.dataset_name not in KNOWN_DATASETS:
            raise ConfigError(
                "dataset_name",
                f"unknown dataset {self.dataset_name!r}; known: {', '.join(KNOWN_DATASETS)}",
            )
        if self.beta_aug is None:
            self.beta_aug = default_beta_aug(self.dataset_name)
        if self.image_size is None:
            self.image_size = _DEFAULT_IMAGE_SIZES[self.dataset_name]
        self.image_size = (int(self.image_size[0]), int(self.image_size[1]))
        if self.augmentation is None:
            self.augmentation = default_augment_spec(self.dataset_name)
        self.validate()

    def validate(self) -> None:
        def require(cond: bool, field_name: str, message: str) -> None:
            if not cond:
                raise ConfigError(field_name, message)

        require(self.num_clusters >= 2, "num_clusters", f"must be >= 2, got {self.num_clusters}")
        require(self.style_dim >= 0, "style_dim", f"must be >= 0, got {self.style_dim}")
        require(self.sigma > 0, "sigma", f"must be > 0, got {self.sigma}")
        require(self.gp_lambda >= 0, "gp_lambda", f"must be >= 0, got {self.gp_lambda}")
        require(self.beta_mi >= 0, "beta_mi", f"must be >= 0, got {self.beta_mi}")
        require(self.beta_aug >= 0, "beta_aug", f"must be >= 0, got {self.beta_aug}")
        require(self.beta_adv >= 0, "beta_adv", f"must be >= 0, got {self.beta_adv}")
        require(self.n_critic >= 1, "n_critic", f"must be >= 1, got {self.n_critic}")
        require(self.batch_size >= 2, "batch_size", f"must be >= 2, got {self.batch_size}")
        require(self.learning_rate > 0, "learning_rate", f"must be > 0, got {self.learning_rate}")
        require(
            0 <= self.adam_beta1 < self.adam_beta2 < 1,
            "adam_beta1",
            f"need 0 <= adam_beta1 < adam_beta2 < 1, got ({self.adam_beta1}, {self.adam_beta2})",
        )
        require(
            self.total_encoder_steps >= 1,
            "total_encoder_steps",
            f"must be >= 1, got {self.total_encoder_steps}",
        )
        require(self.eval_every >= 1, "eval_every", f"must be >= 1, got {self.eval_every}")
        require(
            self.image_size[0] >= 1 and self.image_size[1] >= 1,
            "image_size",
            f"must be positive, got {self.image_size}",
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "augmentation":
                value = value.to_dict()
            elif f.name == "image_size":
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        kwargs = dict(raw)
        if kwargs.get("augmentation") is not None:
            try:
                kwargs["augmentation"] = AugmentSpec.from_dict(kwargs["augmentation"])
            except (TypeError, ValueError) as exc:
                raise ConfigError("augmentation", str(exc)) from exc
        if kwargs.get("image_size") is not None:
            kwargs["image_size"] = tuple(kwargs["image_size"])
        return cls(**kwargs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON config file, applying defaults and the
    data_path environment override."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<file>", f"{path} must contain a JSON object")
    config = ExperimentConfig.from_dict(raw)
    env_path = os.environ.get(DATA_PATH_ENV_VAR)
    if env_path:
        config.data_path = env_path
    return config


def config_hash(config: ExperimentConfig) -> str:
    """Stable short hash of the full configuration."""
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
