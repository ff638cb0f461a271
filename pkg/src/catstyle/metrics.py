"""Clustering evaluation: optimal-assignment accuracy, NMI, ARI, K-means.

NMI uses the geometric-mean normalization (natural logs); reports carry the
convention label so numbers stay comparable across tools. Degenerate
partitions (everything in one cluster) appear early in training, so the
zero-entropy conventions are explicit: NMI is 1 when both partitions are a
single cluster and 0 when exactly one of them is.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import Dataset

NMI_NORMALIZATION = "geometric"


@dataclass
class MetricsReport:
    """Scores of one labeled evaluation pass."""

    acc: float
    nmi: float
    ari: float
    confusion: np.ndarray  # (K_pred, K_true) counts
    mapping: dict[int, int]  # predicted cluster -> true label used for acc
    n: int

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "nmi": self.nmi,
            "ari": self.ari,
            "n": self.n,
            "nmi_normalization": NMI_NORMALIZATION,
            "mapping": {str(k): int(v) for k, v in self.mapping.items()},
        }


def _check_pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"label arrays differ: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty label arrays")
    return y_true, y_pred


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """(K_pred, K_true) count table."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    k_pred = int(y_pred.max()) + 1
    k_true = int(y_true.max()) + 1
    counts = np.zeros((k_pred, k_true), dtype=np.int64)
    np.add.at(counts, (y_pred, y_true), 1)
    return counts


def accuracy(y_true, y_pred) -> tuple[float, dict[int, int]]:
    """Best labeled accuracy over one-to-one cluster-to-label mappings.

    Solved by optimal assignment on the negated confusion matrix, padded
    square with zeros when cluster counts differ. Returns the score and the
    predicted-cluster -> label map realizing it.
    """
    counts = confusion_matrix(y_true, y_pred)
    k = max(counts.shape)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(-padded)
    matched = padded[rows, cols].sum()
    mapping = {int(r): int(c) for r, c in zip(rows, cols) if r < counts.shape[0]}
    return float(matched) / float(len(np.asarray(y_true))), mapping


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(y_true, y_pred) -> float:
    """Normalized mutual information, I / sqrt(H_true * H_pred), natural logs."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    counts = confusion_matrix(y_true, y_pred).astype(np.float64)
    n = counts.sum()
    h_pred = _entropy(counts.sum(axis=1))
    h_true = _entropy(counts.sum(axis=0))
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0  # both single-cluster: identical partition structure
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    pij = counts / n
    pi = pij.sum(axis=1, keepdims=True)
    pj = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / (pi @ pj)[nz])).sum())
    return mi / math.sqrt(h_true * h_pred)


def ari(y_true, y_pred) -> float:
    """Adjusted Rand index from exact integer pair counts."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    if y_true.size < 2:
        raise ValueError("ari needs at least 2 points")
    counts = confusion_matrix(y_true, y_pred)
    sum_cells = int(sum(math.comb(int(c), 2) for c in counts.ravel()))
    sum_pred = int(sum(math.comb(int(c), 2) for c in counts.sum(axis=1)))
    sum_true = int(sum(math.comb(int(c), 2) for c in counts.sum(axis=0)))
    total = math.comb(y_true.size, 2)
    expected = sum_pred * sum_true / total
    maximum = (sum_pred + sum_true) / 2.0
    if maximum == expected:
        return 1.0  # both partitions trivial and identical
    return (sum_cells - expected) / (maximum - expected)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(len(x))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = x[rng.integers(len(x))]
            continue
        probs = d2 / total
        centers[i] = x[rng.choice(len(x), p=probs)]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))
    return centers


def _pairwise_sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (x**2).sum(axis=1)[:, None]
        - 2.0 * x @ centers.T
        + (centers**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int, rng: np.random.Generator):
    assign = np.full(len(x), -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _pairwise_sq_dists(x, centers)
        new_assign = d2.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(len(centers)):
            members = x[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its center
                centers[j] = x[d2.min(axis=1).argmax()]
    inertia = float(((x - centers[assign]) ** 2).sum())
    return assign, inertia


def kmeans(
    vectors: np.ndarray, k: int, seed: int = 0, restarts: int = 20, max_iter: int = 300
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; best inertia over restarts.

    Iterations stop when assignments are stable or at max_iter.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"vectors must be (N, d), got {x.shape}")
    if len(x) < k:
        raise ValueError(f"need at least k={k} points, got {len(x)}")
    rng = np.random.default_rng(seed)
    best_assign, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(x, k, rng)
        assign, inertia = _lloyd(x, centers, max_iter, rng)
        if inertia < best_inertia:
            best_assign, best_inertia = assign, inertia
    return best_assign


def score_assignment(y_true, y_pred) -> MetricsReport:
    """All three metrics plus the confusion table for one assignment."""
    acc_value, mapping = accuracy(y_true, y_pred)
    return MetricsReport(
        acc=acc_value,
        nmi=nmi(y_true, y_pred),
        ari=ari(y_true, y_pred),
        confusion=confusion_matrix(y_true, y_pred),
        mapping=mapping,
        n=len(np.asarray(y_true)),
    )


def evaluate(
    encoder,
    dataset: Dataset,
    kmeans_slices: bool = False,
    seed: int = 0,
    batch_size: int = 256,
) -> dict[str, MetricsReport]:
    """Score the encoder against ground truth.

    Always reports the argmax assignment; with kmeans_slices, adds K-means
    over the full latent, the category block and the style block.
    """
    from .nets import encode_dataset

    z_c, z_s = encode_dataset(encoder, dataset.images, batch_size=batch_size)
    k = z_c.shape[1]
    reports = {"argmax": score_assignment(dataset.labels, z_c.argmax(axis=1))}
    if kmeans_slices:
        full = np.concatenate([z_c, z_s], axis=1)
        for name, block in (("kmeans_z", full), ("kmeans_zc", z_c), ("kmeans_zs", z_s)):
            if block.shape[1] == 0:
                continue
            reports[name] = score_assignment(dataset.labels, kmeans(block, k, seed=seed))
    return reports


def write_reports(reports: dict[str, MetricsReport], out_dir: str | Path) -> None:
    """Emit metrics.json plus one confusion CSV per assignment method."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps({name: rep.to_dict() for name, rep in reports.items()}, indent=2) + "\n"
    )
    for name, rep in reports.items():
        with open(out / f"confusion_{name}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([f"true_{j}" for j in range(rep.confusion.shape[1])])
            writer.writerows(rep.confusion.tolist())
