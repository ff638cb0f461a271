"""Latent prior: uniform one-hot categories times an isotropic Gaussian style.

Draws target representations for the adversarial matching step and builds
the convex interpolates the gradient penalty is evaluated at.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PriorSample:
    """A batch of prior draws: one-hot category block plus Gaussian style block."""

    z_c: np.ndarray  # (n, K) float32 one-hot rows
    z_s: np.ndarray  # (n, style_dim) float32

    def as_matrix(self) -> np.ndarray:
        """Concatenated (n, K + style_dim) prior vectors, the critic's input."""
        return np.concatenate([self.z_c, self.z_s], axis=1)


def sample_prior(
    n: int, num_clusters: int, style_dim: int, sigma: float, rng: np.random.Generator
) -> PriorSample:
    """Draw n samples: category uniform over K as one-hot, style N(0, sigma^2 I)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if num_clusters < 2:
        raise ValueError(f"num_clusters must be >= 2, got {num_clusters}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    cats = rng.integers(0, num_clusters, size=n)
    z_c = np.zeros((n, num_clusters), dtype=np.float32)
    z_c[np.arange(n), cats] = 1.0
    z_s = rng.normal(0.0, sigma, size=(n, style_dim)).astype(np.float32)
    return PriorSample(z_c=z_c, z_s=z_s)


def interpolate(z: np.ndarray, z_tilde: np.ndarray, eps: np.ndarray | float) -> np.ndarray:
    """Coordinate-wise convex combination eps * z + (1 - eps) * z_tilde.

    eps may be a scalar or one coefficient per row; the caller draws it
    from U[0, 1].
    """
    z = np.asarray(z)
    z_tilde = np.asarray(z_tilde)
    if z.shape != z_tilde.shape:
        raise ValueError(f"length mismatch: {z.shape} vs {z_tilde.shape}")
    eps_arr = np.asarray(eps, dtype=z.dtype)
    if eps_arr.ndim == 1 and z.ndim == 2:
        eps_arr = eps_arr[:, None]
    return eps_arr * z + (1.0 - eps_arr) * z_tilde
