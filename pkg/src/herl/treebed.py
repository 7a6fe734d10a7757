"""Regular trees, their Poincare-disk layouts, and distortion reports.

A complete b-ary tree of depth R is laid out radially: the root at the
origin, level-k nodes on the circle of hyperbolic radius k * scale * step,
each node's children evenly splitting its angular sector. With step = ln(b)
the exponential metric expansion cancels the exponential angular shrinkage,
so sibling gaps stay roughly constant with depth; the flat analog of the
same schedule collapses instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hypmath import BallPoint, BoundaryError, hyp_distance_rows

__all__ = [
    "TreeSpec",
    "RegularTree",
    "TreeEmbedding",
    "DistortionReport",
    "TreeSizeError",
    "build_regular_tree",
    "sarkar_embed",
    "euclidean_analog_layout",
    "pair_distances",
    "measure_distortion",
    "euclidean_lower_bound",
]

MAX_NODES = 1_000_000
MAX_PAIRS = 20_000_000
# tanh saturates to exactly 1.0 in float64 around 19; radii are rejected first.
_MAX_HALF_RADIUS = 18.0


class TreeSizeError(ValueError):
    """Requested tree or pair enumeration exceeds the resource guard."""


@dataclass(frozen=True)
class TreeSpec:
    """Branching factor, depth, and the radial layout schedule."""

    branching: int
    depth: int
    radial_step: float | None = None  # None -> ln(branching)
    scale: float = 1.0
    curvature: float = 1.0

    def __post_init__(self) -> None:
        if self.branching < 2:
            raise ValueError(f"branching factor must be >= 2, got {self.branching}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.radial_step is not None and not self.radial_step > 0:
            raise ValueError("radial_step must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not self.curvature > 0:
            raise ValueError("curvature must be positive")

    @property
    def step(self) -> float:
        return math.log(self.branching) if self.radial_step is None else self.radial_step

    @property
    def node_count(self) -> int:
        b, r = self.branching, self.depth
        return (b ** (r + 1) - 1) // (b - 1)

    @property
    def leaf_count(self) -> int:
        return self.branching ** self.depth


class RegularTree:
    """Complete b-ary tree in heap order: children of node i are b*i+1 .. b*i+b.

    Shortest-path queries run in O(depth) via parent arithmetic.
    """

    def __init__(self, spec: TreeSpec):
        self.spec = spec
        self.n_nodes = spec.node_count
        b = spec.branching
        starts = [0]
        for k in range(spec.depth + 1):
            starts.append(starts[-1] + b**k)
        self._starts = np.asarray(starts)  # starts[k] = first index of level k
        self.level = np.searchsorted(self._starts, np.arange(self.n_nodes), side="right") - 1

    @property
    def branching(self) -> int:
        return self.spec.branching

    @property
    def depth(self) -> int:
        return self.spec.depth

    def leaves(self) -> np.ndarray:
        return np.arange(self._starts[self.depth], self.n_nodes)

    def nodes_at_level(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.depth:
            raise ValueError(f"level {k} out of range [0, {self.depth}]")
        return np.arange(self._starts[k], self._starts[k + 1])

    def parent_of(self, i: int) -> int:
        if i == 0:
            raise ValueError("the root has no parent")
        return (i - 1) // self.branching

    def children_of(self, i: int) -> np.ndarray:
        if self.level[i] == self.depth:
            return np.empty(0, dtype=int)
        b = self.branching
        return np.arange(b * i + 1, b * i + b + 1)

    def distance(self, u: int, v: int) -> int:
        lu, lv = int(self.level[u]), int(self.level[v])
        d = 0
        while lu > lv:
            u = (u - 1) // self.branching
            lu -= 1
            d += 1
        while lv > lu:
            v = (v - 1) // self.branching
            lv -= 1
            d += 1
        while u != v:
            u = (u - 1) // self.branching
            v = (v - 1) // self.branching
            d += 2
        return d

    def distance_pairs(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Vectorized shortest-path distance for index arrays of equal length."""
        b = self.branching
        u = np.asarray(us).copy()
        v = np.asarray(vs).copy()
        lu = self.level[u].copy()
        lv = self.level[v].copy()
        d = np.abs(lu - lv).astype(np.int64)
        for _ in range(self.depth + 1):
            m = lu > lv
            if not m.any():
                break
            u[m] = (u[m] - 1) // b
            lu[m] -= 1
        for _ in range(self.depth + 1):
            m = lv > lu
            if not m.any():
                break
            v[m] = (v[m] - 1) // b
            lv[m] -= 1
        for _ in range(self.depth + 1):
            m = u != v
            if not m.any():
                break
            u[m] = (u[m] - 1) // b
            v[m] = (v[m] - 1) // b
            d[m] += 2
        return d


def build_regular_tree(spec: TreeSpec) -> RegularTree:
    """Materialize a complete b-ary tree; guarded to at most MAX_NODES nodes."""
    if spec.node_count > MAX_NODES:
        raise TreeSizeError(
            f"tree would have {spec.node_count} nodes, above the {MAX_NODES} guard"
        )
    return RegularTree(spec)


def _angles(tree: RegularTree) -> np.ndarray:
    """Angular schedule: the root owns [0, 2*pi), children split their parent's
    sector evenly and sit at the centers of their sub-sectors."""
    n = tree.n_nodes
    b = tree.branching
    lo = np.zeros(n)
    width = np.zeros(n)
    lo[0], width[0] = 0.0, 2.0 * math.pi
    theta = np.zeros(n)
    for i in range(n):
        kids = tree.children_of(i)
        if kids.size:
            w = width[i] / b
            lo[kids] = lo[i] + w * np.arange(b)
            width[kids] = w
        theta[i] = lo[i] + 0.5 * width[i]
    theta[0] = 0.0
    return theta


@dataclass(frozen=True)
class TreeEmbedding:
    """Planar ball coordinates for every node, with the spec that produced them."""

    coords: np.ndarray  # (n_nodes, 2)
    spec: TreeSpec

    def point(self, i: int) -> BallPoint:
        return BallPoint(self.coords[i], self.spec.curvature)


def sarkar_embed(tree: RegularTree, spec: TreeSpec) -> TreeEmbedding:
    """Recursive radial placement: level-k nodes at hyperbolic radius k*scale*step.

    A hyperbolic radius r corresponds to ball norm tanh(sqrt(c)*r/2)/sqrt(c).
    """
    if tree.spec != spec:
        raise ValueError("tree was not built from the given spec")
    c = spec.curvature
    sc = math.sqrt(c)
    radius_h = tree.level * (spec.scale * spec.step)
    half = sc * radius_h / 2.0
    if half.max() > _MAX_HALF_RADIUS:
        raise BoundaryError(
            f"depth limit: hyperbolic radius {radius_h.max():.3g} saturates the ball "
            f"boundary at curvature {c}"
        )
    theta = _angles(tree)
    norm = np.tanh(half) / sc
    coords = np.stack([norm * np.cos(theta), norm * np.sin(theta)], axis=1)
    coords[0] = 0.0
    return TreeEmbedding(coords=coords, spec=spec)


def euclidean_analog_layout(tree: RegularTree, spec: TreeSpec) -> np.ndarray:
    """Same angular schedule, flat radius k*scale*step, straight-line metric."""
    theta = _angles(tree)
    radius = tree.level * (spec.scale * spec.step)
    coords = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    coords[0] = 0.0
    return coords


@dataclass(frozen=True)
class DistortionReport:
    pair_filter: str
    distortion: float
    scale_star: float
    max_ratio: float
    min_ratio: float
    n_pairs: int


def _select_pairs(tree: RegularTree, pair_filter: str) -> tuple[np.ndarray, np.ndarray]:
    n = tree.n_nodes
    if pair_filter == "edges":
        vs = np.arange(1, n)
        us = (vs - 1) // tree.branching
    elif pair_filter == "siblings":
        us_list, vs_list = [], []
        b = tree.branching
        for i in range(n):
            kids = tree.children_of(i)
            for a in range(kids.size):
                for bb in range(a + 1, kids.size):
                    us_list.append(kids[a])
                    vs_list.append(kids[bb])
        us, vs = np.asarray(us_list), np.asarray(vs_list)
    elif pair_filter == "all":
        if n * (n - 1) // 2 > MAX_PAIRS:
            raise TreeSizeError(f"{n * (n - 1) // 2} pairs exceed the {MAX_PAIRS} guard")
        iu, iv = np.triu_indices(n, k=1)
        us, vs = iu, iv
    else:
        raise ValueError(f"unknown pair_filter {pair_filter!r}")
    return us, vs


def _ratio_report(ratios: np.ndarray, pair_filter: str) -> DistortionReport:
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.size == 0:
        raise ValueError("empty pair set")
    rmax = float(ratios.max())
    rmin = float(ratios.min())
    return DistortionReport(
        pair_filter=pair_filter,
        distortion=rmax / rmin,
        scale_star=rmin,
        max_ratio=rmax,
        min_ratio=rmin,
        n_pairs=int(ratios.size),
    )


def pair_distances(emb: TreeEmbedding, tree: RegularTree, pair_filter: str = "all") -> tuple[np.ndarray, np.ndarray]:
    """(tree distances, embedded geodesic distances) over the selected pairs."""
    if emb.coords.shape[0] != tree.n_nodes:
        raise ValueError("embedding does not cover all nodes")
    us, vs = _select_pairs(tree, pair_filter)
    d_emb = hyp_distance_rows(emb.coords[us], emb.coords[vs], emb.spec.curvature)
    d_tree = tree.distance_pairs(us, vs).astype(np.float64)
    return d_tree, d_emb


def measure_distortion(emb: TreeEmbedding, tree: RegularTree, pair_filter: str = "all") -> DistortionReport:
    """Worst-case ratio spread of embedded to tree distances under optimal scaling:
    D = max(r) / min(r) over r_uv = d_ball(f(u), f(v)) / d_tree(u, v)."""
    d_tree, d_emb = pair_distances(emb, tree, pair_filter)
    return _ratio_report(d_emb / d_tree, pair_filter)


def euclidean_lower_bound(b: int, depth: int, n: int) -> float:
    """Packing bound b**(depth/n) / depth on the distortion of any flat n-dim layout."""
    if b < 2:
        raise ValueError(f"branching factor must be >= 2, got {b}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    log_value = (depth / n) * math.log(b) - math.log(depth)
    if log_value > 700.0:
        raise OverflowError("lower bound exceeds the double-precision range")
    return b ** (depth / n) / depth
