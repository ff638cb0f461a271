"""Stochastic image augmentation: crop-resize, flip, color jitter, channel shuffle.

Operates on float arrays in [0, 1], either (H, W) grayscale or (H, W, 3) RGB.
Channel shuffling only applies to color inputs and always runs before the
grayscale conversion, which `augment_batch` performs at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, resize_bilinear, rgb_to_gray

_CROP_ATTEMPTS = 10


@dataclass
class AugmentSpec:
    """Parameters of the augmentation function.

    hflip_prob should be 0 for direction-sensitive data (digits) and 0.5
    otherwise.
    """

    crop_area_range: tuple[float, float] = (0.40, 1.00)
    crop_aspect_range: tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)
    hflip_prob: float = 0.5
    brightness_range: tuple[float, float] = (0.6, 1.4)
    contrast_range: tuple[float, float] = (0.6, 1.4)
    saturation_range: tuple[float, float] = (0.6, 1.4)
    hue_range: tuple[float, float] = (0.875, 1.125)
    channel_shuffle: bool = True
    enabled: bool = True

    def __post_init__(self):
        for name in (
            "crop_area_range",
            "crop_aspect_range",
            "brightness_range",
            "contrast_range",
            "saturation_range",
            "hue_range",
        ):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name}: low {lo} must be <= high {hi}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError(f"hflip_prob must be in [0, 1], got {self.hflip_prob}")

    def to_dict(self) -> dict:
        return {
            "crop_area_range": list(self.crop_area_range),
            "crop_aspect_range": list(self.crop_aspect_range),
            "hflip_prob": self.hflip_prob,
            "brightness_range": list(self.brightness_range),
            "contrast_range": list(self.contrast_range),
            "saturation_range": list(self.saturation_range),
            "hue_range": list(self.hue_range),
            "channel_shuffle": self.channel_shuffle,
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AugmentSpec":
        kwargs = dict(raw)
        for name in (
            "crop_area_range",
            "crop_aspect_range",
            "brightness_range",
            "contrast_range",
            "saturation_range",
            "hue_range",
        ):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


def _random_crop_resize(image: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Crop a random area/aspect rectangle and resize back to the input size.

    Ceil-rounded crop dimensions keep the realized area fraction at or above
    the sampled one; rectangles that do not fit are resampled, falling back
    to the full image.
    """
    h, w = image.shape[:2]
    for _ in range(_CROP_ATTEMPTS):
        area_frac = rng.uniform(*spec.crop_area_range)
        aspect = rng.uniform(*spec.crop_aspect_range)
        target = area_frac * h * w
        ch = math.ceil(math.sqrt(target / aspect))
        cw = math.ceil(math.sqrt(target * aspect))
        if 1 <= ch <= h and 1 <= cw <= w:
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            crop = image[top : top + ch, left : left + cw]
            return resize_bilinear(crop, h, w)
    return image.astype(np.float32, copy=True)


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    from matplotlib.colors import rgb_to_hsv

    return rgb_to_hsv(np.clip(rgb, 0.0, 1.0))


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    from matplotlib.colors import hsv_to_rgb

    return hsv_to_rgb(hsv)


def _color_jitter(image: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Scale brightness, contrast, saturation and hue by random factors.

    All four factors are always drawn so the rng stream does not depend on
    the image's channel count; saturation/hue are no-ops on grayscale.
    """
    b = rng.uniform(*spec.brightness_range)
    c = rng.uniform(*spec.contrast_range)
    s = rng.uniform(*spec.saturation_range)
    hue = rng.uniform(*spec.hue_range)
    color = image.ndim == 3

    out = image * b
    mean = rgb_to_gray(out).mean() if color else out.mean()
    out = mean + (out - mean) * c
    if color:
        gray = rgb_to_gray(out)[..., None]
        out = gray + (out - gray) * s
        hsv = _rgb_to_hsv(out)
        hsv[..., 0] = (hsv[..., 0] * hue) % 1.0
        out = _hsv_to_rgb(hsv)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def augment(image: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply the full augmentation chain to one [0, 1] image.

    Order: channel shuffle (color only), random crop-and-resize, horizontal
    flip, color jitter. Identity when spec.enabled is False. Same rng state
    yields the identical output.
    """
    if image.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {image.shape}")
    if not spec.enabled:
        return image.astype(np.float32, copy=True)
    out = np.asarray(image, dtype=np.float32)
    if out.ndim == 3 and spec.channel_shuffle:
        out = out[..., rng.permutation(3)]
    out = _random_crop_resize(out, spec, rng)
    if rng.uniform() < spec.hflip_prob:
        out = out[:, ::-1].copy()
    return _color_jitter(out, spec, rng)


def augment_batch(
    dataset: Dataset,
    indices: np.ndarray,
    spec: AugmentSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Augmented training views for a batch of dataset positions.

    Color sources are augmented in RGB (channel shuffle included) and grayed
    afterwards; grayscale sources are augmented directly. Returns
    (m, H, W) float32 in [-1, 1].
    """
    out = np.empty((len(indices),) + dataset.image_size, dtype=np.float32)
    for row, i in enumerate(indices):
        if dataset.color_images is not None:
            aug = augment(dataset.color_images[i], spec, rng)
            gray = rgb_to_gray(aug)
        else:
            gray = augment((dataset.images[i] + 1.0) * 0.5, spec, rng)
        out[row] = 2.0 * gray - 1.0
    return out
