"""Training objectives.

Everything is built from one affinity-guided contrastive template: for
anchors U against candidates V under soft targets G,

    loss = -(1/N) * sum_ij G_ij * log softmax_row_i( S(u_i, v_.) / tau )_j

with S either cosine of coordinates (also the ball's angular similarity) or
negated geodesic distance. The backbone applies it within and across views
in flat space; the instance terms apply it to ball projections, blended by a
ramp that shifts weight from angular to distance alignment over training;
the prototype term applies it to the columns of the per-view prototype
score matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffeng as dg
from .hypmath import HypConfig

__all__ = [
    "SIM_KINDS",
    "LossConfig",
    "AlphaSchedule",
    "alpha_at",
    "contrastive",
    "euclidean_backbone_loss",
    "angular_loss",
    "distance_loss",
    "instance_loss",
    "prototype_loss",
    "total_loss",
]

SIM_KINDS = ("cosine", "angular", "hyp_dist")
_ROW_SUM_TOL = 1e-8


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.5
    tau_dist: float = 1.0
    beta: float = 0.1
    alpha_final: float = 0.2
    backbone_sim: str = "cosine"
    angular_term_sim: str = "angular"
    distance_term_sim: str = "hyp_dist"
    prototype_sim: str = "angular"

    def __post_init__(self) -> None:
        if not self.tau > 0 or not self.tau_dist > 0:
            raise ValueError("temperatures must be positive")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 <= self.alpha_final <= 1.0:
            raise ValueError(f"alpha_final must lie in [0, 1], got {self.alpha_final}")
        for sim in (self.backbone_sim, self.angular_term_sim, self.distance_term_sim, self.prototype_sim):
            if sim not in SIM_KINDS:
                raise ValueError(f"unknown similarity {sim!r}")


@dataclass(frozen=True)
class AlphaSchedule:
    """Linear ramp from 0 at epoch 0 to alpha_final at the last epoch."""

    alpha_final: float
    total_epochs: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha_final <= 1.0:
            raise ValueError(f"alpha_final must lie in [0, 1], got {self.alpha_final}")
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be >= 1, got {self.total_epochs}")


def alpha_at(epoch: int, sched: AlphaSchedule) -> float:
    if not 0 <= epoch <= sched.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {sched.total_epochs}]")
    return sched.alpha_final * epoch / sched.total_epochs


def _check_graph(graph: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    g = np.asarray(graph, dtype=np.float64)
    if g.shape != (n_rows, n_cols):
        raise ValueError(f"target graph shape {g.shape} does not match ({n_rows}, {n_cols})")
    if not np.all(np.isfinite(g)):
        raise ValueError("target graph must be finite")
    if np.any(np.abs(g.sum(axis=1) - 1.0) > _ROW_SUM_TOL):
        raise ValueError("target graph rows must sum to 1")
    return g


def contrastive(u, v, graph, sim: str = "cosine", tau: float = 0.5, hyp: HypConfig | None = None) -> dg.Tensor:
    """Affinity-guided contrastive loss of anchors ``u`` against candidates ``v``.

    ``v`` is normally a constant (teacher) tensor; gradients flow into
    whichever argument is differentiable.
    """
    if sim not in SIM_KINDS:
        raise ValueError(f"unknown similarity {sim!r}")
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    u = dg.as_tensor(u)
    v = dg.as_tensor(v)
    if u.data.ndim != 2 or v.data.ndim != 2 or u.shape[1] != v.shape[1]:
        raise ValueError(f"anchor/candidate shapes incompatible: {u.shape} vs {v.shape}")
    n = u.shape[0]
    g = _check_graph(graph, n, v.shape[0])
    if sim == "hyp_dist":
        if hyp is None:
            raise ValueError("hyp_dist similarity needs a HypConfig")
        scores = dg.neg(dg.hyp_distance_pairwise(u, v, hyp))
    else:
        scores = dg.matmul(dg.l2_normalize_rows(u), dg.transpose(dg.l2_normalize_rows(v)))
    logp = dg.log_softmax_rows(dg.scale(scores, 1.0 / tau))
    return dg.scale(dg.neg(dg.sum_all(dg.mul(dg.Tensor(g), logp))), 1.0 / n)


def _ordered_pairs(n_views: int):
    for v in range(n_views):
        for u in range(n_views):
            if u != v:
                yield v, u


def euclidean_backbone_loss(outs, graphs, cfg: LossConfig) -> dg.Tensor:
    """Within-view alignment of student to teacher features plus cross-view
    alignment of projections to teacher features, all under the soft graphs."""
    n_views = len(outs)
    if n_views < 2:
        raise ValueError("backbone loss needs at least two views")
    if len(graphs) != n_views:
        raise ValueError(f"need one graph per view, got {len(graphs)} for {n_views}")
    total = None
    for v in range(n_views):
        term = contrastive(outs[v].f, outs[v].f_t, graphs[v], cfg.backbone_sim, cfg.tau)
        total = term if total is None else total + term
    for v, u in _ordered_pairs(n_views):
        term = contrastive(outs[v].z, outs[u].f_t, graphs[u], cfg.backbone_sim, cfg.tau)
        total = total + term
    return total


def angular_loss(outs, graphs, cfg: LossConfig) -> dg.Tensor:
    """Cross-view directional alignment of ball projections, graph-guided."""
    total = None
    for v, u in _ordered_pairs(len(outs)):
        term = contrastive(outs[v].q_hat, outs[u].q, graphs[u], cfg.angular_term_sim, cfg.tau)
        total = term if total is None else total + term
    if total is None:
        raise ValueError("angular loss needs at least two views")
    return total


def distance_loss(outs, cfg: LossConfig, hyp: HypConfig) -> dg.Tensor:
    """Cross-view geodesic anchoring with identity targets."""
    total = None
    for v, u in _ordered_pairs(len(outs)):
        n = outs[v].q_hat.shape[0]
        term = contrastive(
            outs[v].q_hat, outs[u].q, np.eye(n), cfg.distance_term_sim, cfg.tau_dist, hyp=hyp
        )
        total = term if total is None else total + term
    if total is None:
        raise ValueError("distance loss needs at least two views")
    return total


def instance_loss(angular, distance, alpha: float) -> dg.Tensor:
    """Convex blend alpha * distance + (1 - alpha) * angular."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return dg.as_tensor(distance) * alpha + dg.as_tensor(angular) * (1.0 - alpha)


def prototype_loss(outs, cfg: LossConfig) -> dg.Tensor:
    """Cross-view consistency of prototype score columns.

    Columns of the (N, K) score matrices are the contrasted units: column k
    of the student view is matched to column k of the teacher view against
    all K teacher columns, averaging over K.
    """
    total = None
    for v, u in _ordered_pairs(len(outs)):
        k = outs[v].p_hat.shape[1]
        term = contrastive(
            dg.transpose(outs[v].p_hat),
            dg.transpose(outs[u].p),
            np.eye(k),
            cfg.prototype_sim,
            cfg.tau,
        )
        total = term if total is None else total + term
    if total is None:
        raise ValueError("prototype loss needs at least two views")
    return total


def total_loss(epoch: int, backbone, angular, distance, prototype, cfg: LossConfig, sched: AlphaSchedule) -> dg.Tensor:
    """Backbone + blended instance terms + beta-weighted prototype term."""
    alpha = alpha_at(epoch, sched)
    return dg.as_tensor(backbone) + instance_loss(angular, distance, alpha) + dg.as_tensor(prototype) * cfg.beta
