"""Lloyd k-means with plus-plus seeding and restart selection, plus the three
matched clustering scores: accuracy under optimal label assignment,
normalized mutual information, and the adjusted Rand index.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "ClusterResult",
    "worker_count",
    "kmeans",
    "hungarian_acc",
    "nmi",
    "ari",
    "score",
]


def worker_count() -> int:
    """Worker cap from HERL_THREADS, defaulting to the CPU count."""
    raw = os.environ.get("HERL_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValueError(f"HERL_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValueError(f"HERL_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@dataclass
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    acc: float | None = None
    nmi: float | None = None
    ari: float | None = None


def _pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style seeding: subsequent centers drawn with probability
    proportional to squared distance from the chosen set."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = np.flatnonzero(d2 >= 0)  # all; degenerate duplicates
            choice = int(rng.choice(remaining))
        else:
            choice = int(rng.choice(n, p=d2 / total))
        centers[j] = x[choice]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    xsq = np.sum(x * x, axis=1)[:, None]
    csq = np.sum(centers * centers, axis=1)[None, :]
    return np.maximum(xsq - 2.0 * (x @ centers.T) + csq, 0.0)


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int):
    """One seeded run; returns (inertia, assignments, centroids, inertia history)."""
    centers = _pp_init(x, k, rng)
    assign = np.full(x.shape[0], -1)
    history = []
    for _ in range(max_iter):
        d2 = _sq_distances(x, centers)
        new_assign = d2.argmin(axis=1)
        history.append(float(d2[np.arange(x.shape[0]), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = assign == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its centroid
                d2 = _sq_distances(x, centers)
                worst = int(d2[np.arange(x.shape[0]), assign].argmax())
                centers[j] = x[worst]
                assign[worst] = j
    d2 = _sq_distances(x, centers)
    assign = d2.argmin(axis=1)
    # direct differences: exact zero when every point sits on its centroid
    inertia = float(np.sum((x - centers[assign]) ** 2))
    return inertia, assign, centers, history


def kmeans(x: np.ndarray, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300) -> ClusterResult:
    """Best-of-restarts Lloyd iterations; deterministic for a given seed
    regardless of the worker count."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"input must be a nonempty matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k must lie in [1, {x.shape[0]}], got {k}")
    if restarts < 1 or max_iter < 1:
        raise ValueError("restarts and max_iter must be >= 1")

    children = np.random.SeedSequence(seed).spawn(restarts)

    def run(child):
        return _lloyd(x, k, np.random.default_rng(child), max_iter)

    threads = min(worker_count(), restarts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, children))
    else:
        results = [run(child) for child in children]

    best = min(range(restarts), key=lambda i: (results[i][0], i))
    inertia, assign, centers, _ = results[best]
    return ClusterResult(assignments=assign, centroids=centers, inertia=inertia)


def _labels(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_true).ravel()
    b = np.asarray(y_pred).ravel()
    if a.size == 0 or a.size != b.size:
        raise ValueError(f"label arrays must be nonempty and equal length: {a.size} vs {b.size}")
    return a, b


def _contingency(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    _, ti = np.unique(y_true, return_inverse=True)
    _, pi = np.unique(y_pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def hungarian_acc(y_true, y_pred) -> float:
    """Fraction matched under the best cluster-to-class assignment, solved
    exactly on the contingency table."""
    a, b = _labels(y_true, y_pred)
    table = _contingency(a, b)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / a.size


def nmi(y_true, y_pred) -> float:
    """Mutual information normalized by the geometric mean of the entropies,
    natural logs. If either partition has zero entropy: 1.0 when both are
    the identical single-cluster partition, else 0.0."""
    a, b = _labels(y_true, y_pred)
    table = _contingency(a, b).astype(np.float64)
    n = table.sum()
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    ha = float(-np.sum(pa * np.log(pa, where=pa > 0, out=np.zeros_like(pa))))
    hb = float(-np.sum(pb * np.log(pb, where=pb > 0, out=np.zeros_like(pb))))
    if ha == 0.0 or hb == 0.0:
        return 1.0 if ha == 0.0 and hb == 0.0 else 0.0
    pj = table / n
    outer = pa[:, None] * pb[None, :]
    mask = pj > 0
    mi = float(np.sum(pj[mask] * np.log(pj[mask] / outer[mask])))
    return mi / float(np.sqrt(ha * hb))


def ari(y_true, y_pred) -> float:
    """Pair-counting index adjusted for chance, from the contingency table."""
    a, b = _labels(y_true, y_pred)
    table = _contingency(a, b)
    n = a.size

    def comb2(v):
        v = np.asarray(v, dtype=np.float64)
        return v * (v - 1.0) / 2.0

    sum_cells = float(comb2(table).sum())
    sum_rows = float(comb2(table.sum(axis=1)).sum())
    sum_cols = float(comb2(table.sum(axis=0)).sum())
    total = comb2(n)
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def score(y_true, y_pred) -> tuple[float, float, float]:
    """(accuracy, nmi, ari) in one call."""
    return hungarian_acc(y_true, y_pred), nmi(y_true, y_pred), ari(y_true, y_pred)
