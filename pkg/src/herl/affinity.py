"""Soft-supervision affinity graphs from heat-kernel similarities.

The graph mixes the identity with a t-step random walk over a row-normalized
heat-kernel adjacency, G = xi * I + (1 - xi) * T^t, and is treated as a
constant target: no gradient ever flows into it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GraphConfig",
    "heat_kernel_adjacency",
    "row_normalize",
    "random_walk_graph",
]

_ROW_SUM_TOL = 1e-8


@dataclass(frozen=True)
class GraphConfig:
    sigma: float = 0.1
    steps: int = 3
    xi: float = 0.5
    warmup_epochs: int = 100

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.steps < 1:
            raise ValueError(f"walk steps must be >= 1, got {self.steps}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if self.warmup_epochs < 0:
            raise ValueError(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")


def heat_kernel_adjacency(features: np.ndarray, sigma: float) -> np.ndarray:
    """A_ij = exp(-||f_i - f_j||^2 / sigma); unit diagonal, exactly symmetric."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValueError(f"features must be a nonempty matrix, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("features must be finite")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    sq = np.sum(f * f, axis=1)
    d2 = np.maximum(sq[:, None] - 2.0 * (f @ f.T) + sq[None, :], 0.0)
    d2 = 0.5 * (d2 + d2.T)
    np.fill_diagonal(d2, 0.0)
    return np.exp(-d2 / sigma)


def row_normalize(adjacency: np.ndarray) -> np.ndarray:
    """Single-step transition matrix T_ij = A_ij / sum_l A_il."""
    a = np.asarray(adjacency, dtype=np.float64)
    sums = a.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ValueError("row normalization requires strictly positive row sums")
    return a / sums


def random_walk_graph(transition: np.ndarray, cfg: GraphConfig, epoch: int) -> np.ndarray:
    """G = xi * I + (1 - xi) * T^t; during warmup T is replaced by I, so G = I.

    The matrix power is taken by repeated dense multiplication for exactness.
    """
    t = np.asarray(transition, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {t.shape}")
    if np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > _ROW_SUM_TOL):
        raise ValueError("transition matrix must be row-stochastic")
    n = t.shape[0]
    eye = np.eye(n)
    if epoch <= cfg.warmup_epochs:
        return eye
    power = t
    for _ in range(cfg.steps - 1):
        power = power @ t
    return cfg.xi * eye + (1.0 - cfg.xi) * power
