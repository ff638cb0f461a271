"""Dataset ingestion, deterministic preprocessing and minibatch streaming.

Images are stored as float32 grayscale arrays in [-1, 1]. Labels are kept
on the dataset for evaluation only; nothing on the training path reads them.
For color sources the original RGB frames (float32 in [0, 1]) are retained
so that augmentation can run before the grayscale conversion.
"""

from __future__ import annotations

import gzip
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

# ITU-R BT.601 luminance weights, also the common "L" conversion.
LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)

IDX_MAGIC_IMAGES = 2051
IDX_MAGIC_LABELS = 2049

_IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tif", ".tiff", ".webp"}


class DataError(ValueError):
    """Raised for malformed dataset files or inconsistent inputs."""


@dataclass
class Dataset:
    """A fully preprocessed dataset held in memory.

    images:       (N, H, W) float32 in [-1, 1], grayscale.
    labels:       (N,) int64 ground-truth labels, evaluation only.
    color_images: optional (N, H, W, 3) float32 in [0, 1]; present when the
                  source was color, used only to augment before graying.
    """

    images: np.ndarray
    labels: np.ndarray
    color_images: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        if self.images.ndim != 3:
            raise DataError(f"images must be (N, H, W), got shape {self.images.shape}")
        if len(self.labels) != len(self.images):
            raise DataError(
                f"length mismatch: {len(self.images)} images vs {len(self.labels)} labels"
            )
        if self.color_images is not None and len(self.color_images) != len(self.images):
            raise DataError("length mismatch between color_images and images")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_size(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


@dataclass
class ImageBatch:
    """One training minibatch: preprocessed images plus their source indices."""

    images: np.ndarray  # (m, H, W) float32 in [-1, 1]
    indices: np.ndarray  # (m,) int64 positions in the source Dataset


def rgb_to_gray(image: np.ndarray) -> np.ndarray:
    """Luminance-weighted grayscale of an (..., 3) RGB array."""
    r, g, b = LUMINANCE_WEIGHTS
    return (r * image[..., 0] + g * image[..., 1] + b * image[..., 2]).astype(np.float32)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W) or (H, W, C) float array.

    Uses pixel-center alignment; convex interpolation keeps the value range.
    """
    h, w = image.shape[:2]
    if (h, w) == (out_h, out_w):
        return image.astype(np.float32, copy=True)
    ys = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(np.float32)
    wx = (xs - x0).astype(np.float32)
    if image.ndim == 3:
        wy = wy[:, None, None]
        wx = wx[None, :, None]
    else:
        wy = wy[:, None]
        wx = wx[None, :]
    top = image[y0][:, x0] * (1 - wx) + image[y0][:, x1] * wx
    bot = image[y1][:, x0] * (1 - wx) + image[y1][:, x1] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def _to_signed_range(gray01: np.ndarray) -> np.ndarray:
    """Affine map [0, 1] -> [-1, 1]."""
    return (2.0 * gray01 - 1.0).astype(np.float32)


def _read_idx(path: Path, expected_magic: int) -> np.ndarray:
    """Parse one big-endian IDX file of unsigned bytes (optionally gzipped)."""
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expected_magic:
        raise DataError(f"{path}: bad magic number {magic}, expected {expected_magic}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    dims = struct.unpack(f">{ndim}i", raw[4:header_len])
    count = int(np.prod(dims))
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_len)
    if data.size != count:
        raise DataError(f"{path}: payload shorter than header dimensions {dims}")
    return data.reshape(dims)


def _find_idx_file(root: Path, stem: str) -> Path:
    for candidate in (root / stem, root / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no {stem}[.gz] under {root}")


def load_idx_dataset(path: str | Path, merge_train_test: bool = True, name: str = "idx") -> Dataset:
    """Load an IDX-format dataset (MNIST / Fashion-MNIST layout).

    Expects train-images-idx3-ubyte / train-labels-idx1-ubyte and, when
    merging, the matching t10k files. Pixel bytes map affinely to [-1, 1].
    """
    root = Path(path)
    images = _read_idx(_find_idx_file(root, "train-images-idx3-ubyte"), IDX_MAGIC_IMAGES)
    labels = _read_idx(_find_idx_file(root, "train-labels-idx1-ubyte"), IDX_MAGIC_LABELS)
    if merge_train_test:
        images = np.concatenate(
            [images, _read_idx(_find_idx_file(root, "t10k-images-idx3-ubyte"), IDX_MAGIC_IMAGES)]
        )
        labels = np.concatenate(
            [labels, _read_idx(_find_idx_file(root, "t10k-labels-idx1-ubyte"), IDX_MAGIC_LABELS)]
        )
    if len(images) != len(labels):
        raise DataError(f"length mismatch: {len(images)} images vs {len(labels)} labels")
    gray = _to_signed_range(images.astype(np.float32) / 255.0)
    return Dataset(images=gray, labels=labels.astype(np.int64), name=name)


def load_cifar10(path: str | Path, merge_train_test: bool = True) -> Dataset:
    """Load CIFAR-10 from the binary batch distribution.

    Each record is 1 label byte + 3072 channel-planar pixel bytes. Color
    frames are kept for augmentation; training images are grayscale.
    """
    root = Path(path)
    if (root / "cifar-10-batches-bin").is_dir():
        root = root / "cifar-10-batches-bin"
    files = [root / f"data_batch_{i}.bin" for i in range(1, 6)]
    if merge_train_test:
        files.append(root / "test_batch.bin")
    records = []
    for f in files:
        if not f.exists():
            raise FileNotFoundError(f"missing CIFAR-10 batch {f}")
        buf = np.frombuffer(f.read_bytes(), dtype=np.uint8)
        if buf.size % 3073 != 0:
            raise DataError(f"{f}: size {buf.size} is not a multiple of 3073")
        records.append(buf.reshape(-1, 3073))
    recs = np.concatenate(records)
    labels = recs[:, 0].astype(np.int64)
    color = recs[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).astype(np.float32) / 255.0
    gray = _to_signed_range(rgb_to_gray(color))
    return Dataset(images=gray, labels=labels, color_images=color, name="cifar10")


def load_image_folder(
    path: str | Path, image_size: tuple[int, int], grayscale: bool = True
) -> Dataset:
    """Load a `root/<class>/<file>` image tree.

    Decodes with Pillow, resizes bilinearly, converts to luminance grayscale
    and scales to [-1, 1]. Unreadable files are skipped with a warning.
    """
    from PIL import Image

    root = Path(path)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise DataError(f"{root}: no class subdirectories found")
    if not grayscale:
        raise DataError("color-input training is not supported; set grayscale=true")
    out_h, out_w = image_size
    grays, colors, labels = [], [], []
    skipped = 0
    for label, class_dir in enumerate(class_dirs):
        for f in sorted(class_dir.iterdir()):
            if f.suffix.lower() not in _IMAGE_EXTENSIONS:
                continue
            try:
                with Image.open(f) as im:
                    rgb = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
            except Exception as exc:  # noqa: BLE001 - any decode failure is a skip
                warnings.warn(f"skipping unreadable image {f}: {exc}", stacklevel=2)
                skipped += 1
                continue
            rgb = resize_bilinear(rgb, out_h, out_w)
            colors.append(rgb)
            grays.append(_to_signed_range(rgb_to_gray(rgb)))
            labels.append(label)
    if not grays:
        raise DataError(f"{root}: no readable images (skipped {skipped})")
    if skipped:
        warnings.warn(f"{root}: skipped {skipped} unreadable files", stacklevel=2)
    return Dataset(
        images=np.stack(grays),
        labels=np.asarray(labels, dtype=np.int64),
        color_images=np.stack(colors),
        name=root.name,
    )


def make_synthetic_blocks(
    n_per_class: int,
    image_size: tuple[int, int] = (28, 28),
    noise_std: float = 0.1,
    seed: int = 0,
) -> Dataset:
    """Two-class desk-scale fixture: bright square on dark ground and its inverse.

    Gaussian pixel noise is added and the result clipped to [-1, 1].
    """
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    h, w = image_size
    proto = np.full((h, w), -0.8, dtype=np.float32)
    y0, y1 = h // 4, h - h // 4
    x0, x1 = w // 4, w - w // 4
    proto[y0:y1, x0:x1] = 0.8
    prototypes = np.stack([proto, -proto])
    rng = np.random.default_rng(seed)
    images = np.repeat(prototypes, n_per_class, axis=0)
    if noise_std > 0:
        images = images + rng.normal(0.0, noise_std, size=images.shape).astype(np.float32)
    images = np.clip(images, -1.0, 1.0).astype(np.float32)
    labels = np.repeat(np.arange(2, dtype=np.int64), n_per_class)
    return Dataset(images=images, labels=labels, name="synthetic_blocks")


def block_prototypes(image_size: tuple[int, int] = (28, 28)) -> np.ndarray:
    """The two noiseless class prototypes of `make_synthetic_blocks`."""
    return make_synthetic_blocks(1, image_size, noise_std=0.0).images


def minibatches(
    dataset: Dataset,
    m: int,
    seed: int | np.random.Generator = 0,
    drop_last: bool = True,
    epochs: int | None = None,
) -> Iterator[ImageBatch]:
    """Stream epoch-shuffled minibatches of size m.

    Each epoch is a fresh uniform shuffle of all indices; with
    drop_last=False a trailing short batch covers the remainder.
    epochs=None streams forever (the training loop's mode).
    """
    if m > len(dataset):
        raise DataError(f"batch size {m} exceeds dataset size {len(dataset)}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    epoch = 0
    while epochs is None or epoch < epochs:
        order = rng.permutation(len(dataset))
        stop = len(order) - (len(order) % m) if drop_last else len(order)
        for start in range(0, stop, m):
            idx = order[start : start + m]
            yield ImageBatch(images=dataset.images[idx], indices=idx)
        epoch += 1
