"""Poincare ball primitives.

The ball of curvature magnitude ``c > 0`` is the open set
``{a in R^n : c * ||a||^2 < 1}``. Everything here is a pure function over
immutable values, computed in double precision; the row-batch helpers at the
bottom are the vectorized forms the network and tensor engine build on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundaryError",
    "HypConfig",
    "BallPoint",
    "conformal_factor",
    "mobius_add",
    "exp_map_origin",
    "clip",
    "hyp_project",
    "hyp_distance",
    "angular_sim",
    "dist_sim",
    "clip_rows",
    "exp_map_rows",
    "hyp_project_rows",
    "mobius_add_rows",
    "hyp_distance_rows",
    "pairwise_hyp_distance",
]

# Row norms below this are treated as zero: the zero vector is a fixed point
# of both the clipping operator and the exponential map.
ZERO_NORM = 1e-12
DEFAULT_EPS = 1e-7
# Rescaled rows can land one ulp above the cap; the dead zone makes a second
# clip a bit-exact no-op.
CLIP_SLACK = 1.0 + 4.0 * np.finfo(np.float64).eps


class BoundaryError(ValueError):
    """A point sits on or outside the ball boundary, where the metric diverges."""


@dataclass(frozen=True)
class HypConfig:
    """Ball parameters: curvature magnitude, clipping threshold, boundary guard."""

    c: float = 1.0
    clip_radius: float = 2.0
    eps: float = DEFAULT_EPS

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"curvature magnitude must be positive, got {self.c}")
        if not self.clip_radius > 0:
            raise ValueError(f"clip_radius must be positive, got {self.clip_radius}")
        if not 0.0 < self.eps < 1e-3:
            raise ValueError(f"eps must lie in (0, 1e-3), got {self.eps}")


@dataclass(frozen=True)
class BallPoint:
    """A vector strictly inside the ball of curvature magnitude ``c``."""

    coords: np.ndarray
    c: float = 1.0

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=np.float64)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 1 or coords.size == 0:
            raise ValueError("coords must be a nonempty 1-d vector")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords must be finite")
        if not self.c > 0:
            raise ValueError(f"curvature magnitude must be positive, got {self.c}")
        sq = self.c * float(coords @ coords)
        if sq >= 1.0:
            raise BoundaryError(f"c*||x||^2 = {sq} >= 1: point not strictly inside the ball")

    @property
    def dim(self) -> int:
        return self.coords.size


def _same_ball(a: BallPoint, b: BallPoint) -> None:
    if a.c != b.c:
        raise ValueError(f"curvature mismatch: {a.c} vs {b.c}")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def conformal_factor(x: BallPoint, eps: float = DEFAULT_EPS) -> float:
    """Local metric scaling 2 / (1 - c*||x||^2); grows without bound near the boundary."""
    sq = x.c * float(x.coords @ x.coords)
    if sq >= 1.0 - eps:
        raise BoundaryError(f"c*||x||^2 = {sq} is within eps of the boundary")
    return 2.0 / (1.0 - sq)


def mobius_add(x: BallPoint, y: BallPoint) -> BallPoint:
    """Mobius addition of two points of the same ball."""
    _same_ball(x, y)
    out = mobius_add_rows(x.coords[None, :], y.coords[None, :], x.c)[0]
    return BallPoint(out, x.c)


def exp_map_origin(z: np.ndarray, cfg: HypConfig) -> BallPoint:
    """Exponential map at the origin: z -> tanh(sqrt(c)*||z||) * z / (sqrt(c)*||z||)."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("exp_map_origin requires finite input")
    return BallPoint(exp_map_rows(z[None, :], cfg.c, cfg.eps)[0], cfg.c)


def clip(z: np.ndarray, cfg: HypConfig) -> np.ndarray:
    """Norm-capping operator min{1, clip_radius/||z||} * z; direction preserved."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("clip requires finite input")
    return clip_rows(z[None, :], cfg.clip_radius)[0]


def hyp_project(z: np.ndarray, cfg: HypConfig) -> BallPoint:
    """Constrained ball projection: clip first, then the exponential map at the origin."""
    return exp_map_origin(clip(z, cfg), cfg)


def hyp_distance(a: BallPoint, b: BallPoint, eps: float = DEFAULT_EPS) -> float:
    """Geodesic distance (2/sqrt(c)) * arctanh(sqrt(c) * ||(-a) (+) b||)."""
    _same_ball(a, b)
    return float(hyp_distance_rows(a.coords[None, :], b.coords[None, :], a.c, eps)[0])


def angular_sim(a, b) -> float:
    """Cosine of the coordinate vectors; agrees with Euclidean angles on the ball."""
    av = a.coords if isinstance(a, BallPoint) else np.asarray(a, dtype=np.float64)
    bv = b.coords if isinstance(b, BallPoint) else np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ValueError("angular similarity is undefined for zero vectors")
    return float(np.clip(float(av @ bv) / (na * nb), -1.0, 1.0))


def dist_sim(a: BallPoint, b: BallPoint, eps: float = DEFAULT_EPS) -> float:
    """Negated geodesic distance; zero iff the points coincide, negative otherwise."""
    return -hyp_distance(a, b, eps)


# --- row-batch forms ------------------------------------------------------


def clip_rows(z: np.ndarray, clip_radius: float) -> np.ndarray:
    """Apply the norm cap to each row of ``z``; rows at or below the cap pass through."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    clipped = norms > clip_radius * CLIP_SLACK
    scale = np.where(clipped, clip_radius / np.maximum(norms, ZERO_NORM), 1.0)
    return z * scale


def exp_map_rows(z: np.ndarray, c: float, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Row-wise exponential map at the origin; the tanh factor is capped at 1 - eps
    so outputs stay strictly inside the ball even for very large inputs."""
    z = np.asarray(z, dtype=np.float64)
    sc = math.sqrt(c)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    t = np.minimum(np.tanh(sc * norms), 1.0 - eps)
    scale = np.where(norms < ZERO_NORM, 1.0, t / (sc * np.maximum(norms, ZERO_NORM)))
    return z * scale


def hyp_project_rows(z: np.ndarray, cfg: HypConfig) -> np.ndarray:
    """Row-wise clip-then-exp ball projection."""
    return exp_map_rows(clip_rows(z, cfg.clip_radius), cfg.c, cfg.eps)


def mobius_add_rows(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Row-wise Mobius addition; rows of x and y are paired."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    inner = np.sum(x * y, axis=-1, keepdims=True)
    xsq = np.sum(x * x, axis=-1, keepdims=True)
    ysq = np.sum(y * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * c * inner + c * ysq) * x + (1.0 - c * xsq) * y
    den = 1.0 + 2.0 * c * inner + c * c * xsq * ysq
    return num / den


def hyp_distance_rows(a: np.ndarray, b: np.ndarray, c: float, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Geodesic distance between paired rows, via Mobius addition."""
    m = mobius_add_rows(-np.asarray(a, dtype=np.float64), b, c)
    sc = math.sqrt(c)
    arg = np.clip(sc * np.linalg.norm(m, axis=-1), 0.0, 1.0 - eps)
    return (2.0 / sc) * np.arctanh(arg)


def _pairwise_parts(a: np.ndarray, b: np.ndarray, c: float):
    """Shared pieces of the cross-pairwise distance between rows of a and b.

    Uses the identity ||(-a) (+) b||^2 = ||a - b||^2 / (1 - 2c<a,b> + c^2 ||a||^2 ||b||^2),
    whose denominator is bounded below by (1 - c ||a|| ||b||)^2 > 0 inside the ball.
    Returns (squared chordal gap, denominator, gyronorm).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    gram = a @ b.T
    asq = np.sum(a * a, axis=1)
    bsq = np.sum(b * b, axis=1)
    sq = np.maximum(asq[:, None] - 2.0 * gram + bsq[None, :], 0.0)
    den = 1.0 - 2.0 * c * gram + (c * c) * asq[:, None] * bsq[None, :]
    gyronorm = np.sqrt(sq / den)
    return sq, den, gyronorm


def pairwise_hyp_distance(a: np.ndarray, b: np.ndarray, c: float, eps: float = DEFAULT_EPS) -> np.ndarray:
    """All-pairs geodesic distances between rows of ``a`` (N,d) and ``b`` (M,d)."""
    if np.asarray(a).shape[-1] != np.asarray(b).shape[-1]:
        raise ValueError("row dimensions differ")
    _, _, gyronorm = _pairwise_parts(a, b, c)
    sc = math.sqrt(c)
    arg = np.clip(sc * gyronorm, 0.0, 1.0 - eps)
    return (2.0 / sc) * np.arctanh(arg)
