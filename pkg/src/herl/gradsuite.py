"""Gradient verification: every differentiable op against central differences,
plus an end-to-end check of the full objective on a small two-view batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffeng as dg
from .affinity import GraphConfig, heat_kernel_adjacency, random_walk_graph, row_normalize
from .hypmath import HypConfig
from .losses import (
    LossConfig,
    angular_loss,
    distance_loss,
    euclidean_backbone_loss,
    instance_loss,
    prototype_loss,
)
from .netmodel import (
    ModelSpec,
    ModelState,
    ViewOutputs,
    encode,
    forward_views,
    hyp_project_t,
    init_model,
    project_head,
    prototype_head,
    student_params,
)

__all__ = ["CheckRow", "run_op_checks", "end_to_end_check", "run_full_suite"]

_CFG = HypConfig(c=0.7, clip_radius=1.3)
_H = 1e-6
_MARGIN = 10 * _H


@dataclass
class CheckRow:
    name: str
    worst_error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.worst_error < self.threshold


def _weighted(op):
    """Scalarize an array-valued op with a fixed random weighting."""

    def build(rng, *shapes):
        weights = None

        def f(*tensors):
            nonlocal weights
            out = op(*tensors)
            if weights is None:
                weights = rng.normal(size=out.shape)
            return dg.sum_all(dg.mul(out, dg.Tensor(weights)))

        return f

    return build


def _ball_rows(rng, n, d, c, max_frac=0.6):
    direction = rng.normal(size=(n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radii = rng.uniform(0.1, max_frac, size=(n, 1)) / np.sqrt(c)
    return direction * radii


def _away_from(x, threshold, margin):
    """Push coordinates with |x - threshold| < margin off the kink."""
    delta = x - threshold
    close = np.abs(delta) < margin
    return np.where(close, threshold + np.sign(delta + (delta == 0)) * margin, x)


def _op_specs(rng):
    n, d, m = 3, 4, 5
    normal = lambda *shape: rng.normal(size=shape)

    def clip_points():
        rows = normal(n, d)
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        # half the rows clearly below the threshold, half clearly above
        target = np.where(np.arange(n)[:, None] % 2 == 0, 0.5, 1.6) * _CFG.clip_radius
        return [rows / norms * target]

    def pair_points():
        return [_ball_rows(rng, n, d, _CFG.c), _ball_rows(rng, m, d, _CFG.c)]

    return [
        ("add", lambda a, b: dg.add(a, b), lambda: [normal(n, d), normal(n, d)]),
        ("sub", lambda a, b: dg.sub(a, b), lambda: [normal(n, d), normal(n, d)]),
        ("mul", lambda a, b: dg.mul(a, b), lambda: [normal(n, d), normal(n, d)]),
        ("neg", dg.neg, lambda: [normal(n, d)]),
        ("scale", lambda a: dg.scale(a, 1.7), lambda: [normal(n, d)]),
        ("exp", dg.exp, lambda: [normal(n, d) * 0.5]),
        ("matmul", lambda a, b: dg.matmul(a, b), lambda: [normal(n, d), normal(d, m)]),
        ("transpose", dg.transpose, lambda: [normal(n, d)]),
        ("add_rowvec", lambda a, b: dg.add_rowvec(a, b), lambda: [normal(n, d), normal(d)]),
        ("affine", lambda x, w, b: dg.affine(x, w, b), lambda: [normal(n, d), normal(d, m), normal(m)]),
        ("relu", dg.relu, lambda: [_away_from(normal(n, d), 0.0, _MARGIN)]),
        ("tanh_act", dg.tanh_act, lambda: [normal(n, d)]),
        ("l2_normalize_rows", dg.l2_normalize_rows, lambda: [normal(n, d) + np.sign(normal(n, d)) * 0.5]),
        ("log_softmax_rows", dg.log_softmax_rows, lambda: [normal(n, d)]),
        ("sum_all", lambda a: dg.sum_all(a), lambda: [normal(n, d)], True),
        ("mean_all", lambda a: dg.mean_all(a), lambda: [normal(n, d)], True),
        ("clip_rows", lambda a: dg.clip_rows(a, _CFG), clip_points),
        ("exp_map_rows", lambda a: dg.exp_map_rows(a, _CFG), lambda: [normal(n, d)]),
        (
            "mobius_add_rows",
            lambda a, b: dg.mobius_add_rows(a, b, _CFG),
            lambda: [_ball_rows(rng, n, d, _CFG.c), _ball_rows(rng, n, d, _CFG.c)],
        ),
        ("hyp_distance_pairwise", lambda a, b: dg.hyp_distance_pairwise(a, b, _CFG), pair_points),
    ]


def run_op_checks(seed: int = 0, points: int = 100, threshold: float = 1e-5) -> list[CheckRow]:
    """Worst grad_check error per op over ``points`` random smooth points."""
    rng = np.random.default_rng(seed)
    rows = []
    for spec in _op_specs(rng):
        name, op, gen = spec[0], spec[1], spec[2]
        already_scalar = len(spec) > 3 and spec[3]
        worst = 0.0
        for _ in range(points):
            pts = gen()
            f = op if already_scalar else _weighted(op)(rng)
            worst = max(worst, dg.grad_check(f, pts, h=_H))
        rows.append(CheckRow(name=name, worst_error=worst, threshold=threshold))
    return rows


def reference_checks(seed: int = 0) -> list[CheckRow]:
    """Calibration programs with known sharp tolerances."""
    rng = np.random.default_rng(seed)

    def quadratic(x):
        return dg.scale(dg.sum_all(dg.mul(x, x)), 0.5)

    def tanh_chain(x):
        return dg.sum_all(dg.tanh_act(dg.tanh_act(dg.tanh_act(x))))

    # central differences are truncation-exact for quadratics, so a larger
    # step and gradients bounded away from zero leave pure roundoff
    quad_point = rng.uniform(0.5, 1.5, size=(3, 3)) * np.sign(rng.normal(size=(3, 3)))
    rows = [
        CheckRow("quadratic", dg.grad_check(quadratic, [quad_point], h=1e-4), 1e-10),
        CheckRow("tanh_chain_depth3", dg.grad_check(tanh_chain, [rng.normal(size=(3, 3))], h=_H), 1e-6),
    ]
    worst = 0.0
    for _ in range(20):
        a = _ball_rows(rng, 1, 4, 1.0)
        b = _ball_rows(rng, 1, 4, 1.0)
        f = lambda u, v: dg.sum_all(dg.hyp_distance_pairwise(u, v, HypConfig(c=1.0)))
        worst = max(worst, dg.grad_check(f, [a, b], h=_H))
    rows.append(CheckRow("hyp_distance_random_pairs", worst, 1e-5))
    return rows


def _rebuild_state(template: ModelState, tensors: list[dg.Tensor]) -> ModelState:
    it = iter(tensors)
    spec = template.spec
    encoders = [[(next(it), next(it)) for _ in stack] for stack in template.encoders]
    head = [(next(it), next(it)) for _ in template.head]
    proto = [(next(it), next(it)) for _ in template.proto_heads]
    return ModelState(
        spec=spec,
        encoders=encoders,
        head=head,
        proto_heads=proto,
        teacher=template.teacher,
        momentum=template.momentum,
    )


def end_to_end_check(seed: int = 0, threshold: float = 1e-4) -> CheckRow:
    """Full objective on a 4-sample two-view batch: analytic gradients of all
    student parameters against central differences.

    Teacher-side targets (including the detached prototype targets, which are
    built from the student's prototype weights) are frozen at their current
    values across the perturbed evaluations: that is the stop-gradient
    function the optimizer actually descends.
    """
    rng = np.random.default_rng(seed)
    spec = ModelSpec(
        view_dims=(3, 4),
        hidden=(4,),
        embed_dim=3,
        prototypes=2,
        hyp=HypConfig(c=0.5, clip_radius=1.5),
        seed=seed,
    )
    template = init_model(spec)
    views = [rng.normal(size=(4, 3)), rng.normal(size=(4, 4))]
    lcfg = LossConfig(tau=0.5, tau_dist=1.0, beta=0.5, alpha_final=0.2)
    gcfg = GraphConfig(sigma=0.5, steps=2, xi=0.5, warmup_epochs=0)
    alpha = 0.1

    base_outs = forward_views(template, views)
    targets = [
        {"f_t": o.f_t.data.copy(), "q": o.q.data.copy(), "p": o.p.data.copy()}
        for o in base_outs
    ]
    graphs = [
        random_walk_graph(
            row_normalize(heat_kernel_adjacency(t["f_t"], gcfg.sigma)), gcfg, epoch=3
        )
        for t in targets
    ]

    def objective(*tensors):
        state = _rebuild_state(template, list(tensors))
        outs = []
        for v in range(2):
            f = encode(state, v, views[v])
            z = project_head(state, f)
            outs.append(
                ViewOutputs(
                    f=f,
                    f_t=dg.Tensor(targets[v]["f_t"]),
                    z=z,
                    q_hat=hyp_project_t(z, spec.hyp),
                    q=dg.Tensor(targets[v]["q"]),
                    p_hat=prototype_head(state, v, z),
                    p=dg.Tensor(targets[v]["p"]),
                )
            )
        total = euclidean_backbone_loss(outs, graphs, lcfg)
        total = total + instance_loss(
            angular_loss(outs, graphs, lcfg), distance_loss(outs, lcfg, spec.hyp), alpha
        )
        return total + prototype_loss(outs, lcfg) * lcfg.beta

    points = [p.data.copy() for p in student_params(template)]
    worst = dg.grad_check(objective, points, h=_H)
    return CheckRow("end_to_end_total_loss", worst, threshold)


def run_full_suite(seed: int = 0, points: int = 100) -> list[CheckRow]:
    rows = run_op_checks(seed=seed, points=points)
    rows.extend(reference_checks(seed=seed))
    rows.append(end_to_end_check(seed=seed))
    return rows
