"""Reverse-mode differentiation over dense float64 arrays.

Covers exactly the forward operations the network and losses need: dense
linear algebra, a few activations, row log-softmax fused through log-sum-exp,
and the ball operations with hand-derived vector-Jacobian products. Every
tensor created by an operation records its parents and per-parent VJP
closures; ``backward`` replays those records in reverse creation order, which
equals reverse forward-execution order because graphs are built eagerly.

No broadcasting beyond row-vector bias addition; shapes must match exactly
everywhere else. Non-finite values abort at the op that produced them.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .hypmath import CLIP_SLACK, ZERO_NORM, HypConfig, _pairwise_parts

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "grad_check",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "exp",
    "matmul",
    "transpose",
    "add_rowvec",
    "affine",
    "relu",
    "tanh_act",
    "l2_normalize_rows",
    "log_softmax_rows",
    "sum_all",
    "mean_all",
    "clip_rows",
    "exp_map_rows",
    "mobius_add_rows",
    "hyp_distance_pairwise",
]

_next_tid = itertools.count()


class Tensor:
    """Dense float64 array with an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "_tid", "_parents", "_vjps")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite values entering the graph")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._tid = next(_next_tid)
        self._parents: tuple[Tensor, ...] = ()
        self._vjps: tuple[Callable[[np.ndarray], np.ndarray], ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __neg__(self):
        return neg(self)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _op(data, pairs: Sequence[tuple[Tensor, Callable]]) -> Tensor:
    live = [(p, f) for p, f in pairs if p.requires_grad]
    out = Tensor(data, requires_grad=bool(live))
    if live:
        out._parents = tuple(p for p, _ in live)
        out._vjps = tuple(f for _, f in live)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into each reachable leaf's ``grad``.

    Intermediate gradients are cleared first, so repeated calls on the same
    graph are reproducible once leaf grads are zeroed between runs.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor")
    if loss.data.ndim != 0:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is detached: no differentiable input feeds it")

    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(node._parents)

    nodes.sort(key=lambda t: t._tid, reverse=True)
    for node in nodes:
        if node._parents:
            node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in nodes:
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            contribution = vjp(g)
            parent.grad = contribution if parent.grad is None else parent.grad + contribution


# --- elementwise and scalar arithmetic -------------------------------------


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b)
    return _op(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b)
    return _op(a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)])


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b)
    ad, bd = a.data, b.data
    return _op(ad * bd, [(a, lambda g: g * bd), (b, lambda g: g * ad)])


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _op(-a.data, [(a, lambda g: -g)])


def scale(a: Tensor, k: float) -> Tensor:
    a = as_tensor(a)
    k = float(k)
    return _op(a.data * k, [(a, lambda g: g * k)])


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):  # overflow becomes the ctor's hard error
        out_data = np.exp(a.data)
    return _op(out_data, [(a, lambda g: g * out_data)])


# --- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _op(ad @ bd, [(a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g)])


def transpose(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("transpose expects a matrix")
    return _op(a.data.T.copy(), [(a, lambda g: g.T)])


def add_rowvec(x: Tensor, b: Tensor) -> Tensor:
    """Add a length-m row vector to every row of an (n, m) matrix."""
    x, b = as_tensor(x), as_tensor(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ValueError(f"bias shapes incompatible: {x.shape} + {b.shape}")
    return _op(x.data + b.data[None, :], [(x, lambda g: g), (b, lambda g: g.sum(axis=0))])


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add_rowvec(matmul(x, w), b)


# --- activations and reductions ---------------------------------------------


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # subgradient at 0 is 0
    return _op(a.data * mask, [(a, lambda g: g * mask)])


def tanh_act(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)
    return _op(out_data, [(a, lambda g: g * (1.0 - out_data * out_data))])


def l2_normalize_rows(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("l2_normalize_rows expects a matrix")
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    if np.any(norms < ZERO_NORM):
        raise ValueError("cannot normalize a zero row")
    out_data = a.data / norms

    def vjp(g):
        radial = np.sum(g * out_data, axis=1, keepdims=True)
        return (g - out_data * radial) / norms

    return _op(out_data, [(a, vjp)])


def log_softmax_rows(a: Tensor) -> Tensor:
    """Row-wise log-probabilities, fused through log-sum-exp for stability."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("log_softmax_rows expects a matrix")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    out_data = shifted - lse
    softmax = np.exp(out_data)

    def vjp(g):
        return g - softmax * g.sum(axis=1, keepdims=True)

    return _op(out_data, [(a, vjp)])


def sum_all(a: Tensor) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _op(np.asarray(a.data.sum()), [(a, lambda g: np.broadcast_to(g, shape).copy())])


def mean_all(a: Tensor) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    n = a.data.size
    return _op(np.asarray(a.data.mean()), [(a, lambda g: np.broadcast_to(g / n, shape).copy())])


# --- ball operations ---------------------------------------------------------


def clip_rows(a: Tensor, cfg: HypConfig) -> Tensor:
    """Row norm cap; identity Jacobian below the threshold, sphere-projection
    Jacobian of (cr/||z||) z above it. A row exactly at the threshold takes
    the unclipped branch."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("clip_rows expects a matrix")
    cr = cfg.clip_radius
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    clipped = norms > cr * CLIP_SLACK
    factor = np.where(clipped, cr / np.maximum(norms, ZERO_NORM), 1.0)
    out_data = a.data * factor
    x = a.data

    def vjp(g):
        radial = np.sum(g * x, axis=1, keepdims=True)
        correction = np.where(clipped, factor / np.maximum(norms, ZERO_NORM) ** 2, 0.0)
        return factor * g - correction * radial * x

    return _op(out_data, [(a, vjp)])


def exp_map_rows(a: Tensor, cfg: HypConfig) -> Tensor:
    """Row-wise exponential map at the origin, tanh factor capped at 1 - eps."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("exp_map_rows expects a matrix")
    c, eps = cfg.c, cfg.eps
    sc = math.sqrt(c)
    x = a.data
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    u = sc * norms
    t = np.tanh(u)
    saturated = t > 1.0 - eps
    t = np.minimum(t, 1.0 - eps)
    tiny = norms < ZERO_NORM
    s = np.where(tiny, 1.0, t / np.maximum(u, ZERO_NORM))
    out_data = x * s

    # d/dn [tanh(sc*n)/(sc*n)] / n, with the saturated branch behaving like
    # the cap (1-eps)/(sc*n); both vanish smoothly into the vjp below.
    sech2 = 1.0 - t * t
    u_safe = np.maximum(u, ZERO_NORM)
    w_live = c * (u_safe * sech2 - t) / u_safe**3
    w_sat = -(1.0 - eps) * c / u_safe**3
    w = np.where(saturated, w_sat, w_live)
    w = np.where(tiny, 0.0, w)

    def vjp(g):
        radial = np.sum(g * x, axis=1, keepdims=True)
        return s * g + w * radial * x

    return _op(out_data, [(a, vjp)])


def mobius_add_rows(x: Tensor, y: Tensor, cfg: HypConfig) -> Tensor:
    """Row-paired Mobius addition with analytic VJPs for both arguments."""
    x, y = as_tensor(x), as_tensor(y)
    _check_same_shape(x, y)
    if x.data.ndim != 2:
        raise ValueError("mobius_add_rows expects matrices")
    c = cfg.c
    xd, yd = x.data, y.data
    inner = np.sum(xd * yd, axis=1, keepdims=True)
    xsq = np.sum(xd * xd, axis=1, keepdims=True)
    ysq = np.sum(yd * yd, axis=1, keepdims=True)
    coef_x = 1.0 + 2.0 * c * inner + c * ysq
    coef_y = 1.0 - c * xsq
    den = 1.0 + 2.0 * c * inner + (c * c) * xsq * ysq
    num = coef_x * xd + coef_y * yd
    out_data = num / den

    def vjp_x(g):
        g_num = np.sum(g * num, axis=1, keepdims=True)
        gx = np.sum(g * xd, axis=1, keepdims=True)
        gy = np.sum(g * yd, axis=1, keepdims=True)
        cy = 2.0 * c * gx / den - 2.0 * c * g_num / den**2
        cx = -2.0 * c * gy / den - 2.0 * (c * c) * ysq * g_num / den**2
        return (coef_x / den) * g + cy * yd + cx * xd

    def vjp_y(g):
        g_num = np.sum(g * num, axis=1, keepdims=True)
        gx = np.sum(g * xd, axis=1, keepdims=True)
        cx = 2.0 * c * gx / den - 2.0 * c * g_num / den**2
        cy = 2.0 * c * gx / den - 2.0 * (c * c) * xsq * g_num / den**2
        return (coef_y / den) * g + cx * xd + cy * yd

    return _op(out_data, [(x, vjp_x), (y, vjp_y)])


def hyp_distance_pairwise(a: Tensor, b: Tensor, cfg: HypConfig) -> Tensor:
    """All-pairs geodesic distance matrix between rows of a (N,d) and b (M,d).

    Coincident pairs and pairs clamped at the boundary guard get zero
    gradient; both are isolated events for the losses built on this.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"pairwise distance shapes incompatible: {a.shape} vs {b.shape}")
    c, eps = cfg.c, cfg.eps
    sc = math.sqrt(c)
    ad, bd = a.data, b.data
    sq, den, gyronorm = _pairwise_parts(ad, bd, c)
    arg = np.clip(sc * gyronorm, 0.0, 1.0 - eps)
    out_data = (2.0 / sc) * np.arctanh(arg)

    asq = np.sum(ad * ad, axis=1)
    bsq = np.sum(bd * bd, axis=1)
    active = (sq > ZERO_NORM) & (sc * gyronorm < 1.0 - eps)

    def _weights(g):
        dd_du = 2.0 / (1.0 - c * gyronorm**2)
        w = np.where(active, g * dd_du, 0.0)
        safe_u = np.where(active, gyronorm, 1.0)
        p = np.where(active, w / (2.0 * safe_u * den), 0.0)
        q = np.where(active, -w * gyronorm / (2.0 * den), 0.0)
        return p, q

    def vjp_a(g):
        p, q = _weights(g)
        grad = 2.0 * (p.sum(axis=1, keepdims=True) * ad - p @ bd)
        grad += 2.0 * (c * c) * (q * bsq[None, :]).sum(axis=1, keepdims=True) * ad
        grad -= 2.0 * c * (q @ bd)
        return grad

    def vjp_b(g):
        p, q = _weights(g)
        grad = 2.0 * (p.sum(axis=0)[:, None] * bd - p.T @ ad)
        grad += 2.0 * (c * c) * (q * asq[:, None]).sum(axis=0)[:, None] * bd
        grad -= 2.0 * c * (q.T @ ad)
        return grad

    return _op(out_data, [(a, vjp_a), (b, vjp_b)])


# --- numerical verification --------------------------------------------------


def grad_check(f: Callable[..., Tensor], points: Sequence[np.ndarray], h: float = 1e-6) -> float:
    """Worst relative error between backward() gradients of the scalar program
    ``f`` and central finite differences at ``points``.

    The relative error denominator is max(|analytic|, |numeric|, 1e-8). Points
    must sit away from non-smooth loci (relu kinks, the clip threshold) by a
    margin of about 10*h for the comparison to be meaningful.
    """
    params = [Tensor(np.asarray(p, dtype=np.float64), requires_grad=True) for p in points]
    out = f(*params)
    if out.data.ndim != 0:
        raise ValueError("grad_check expects a scalar-valued program")
    backward(out)

    def value_at(k: int, idx, delta: float) -> float:
        shifted = [p.data.copy() for p in params]
        shifted[k][idx] += delta
        return float(f(*[Tensor(s) for s in shifted]).data)

    worst = 0.0
    for k, param in enumerate(params):
        analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
        for idx in np.ndindex(param.data.shape):
            numeric = (value_at(k, idx, h) - value_at(k, idx, -h)) / (2.0 * h)
            a = float(analytic[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
