"""Synthetic hierarchical two-view data, missing-mask simulation, matrix CSV I/O.

Classes are the leaves of a regular tree; class centers follow a root-to-leaf
Gaussian walk so that nearby leaves share ancestry, view 2 is a seeded
full-rank linear image of view 1 plus independent noise. All randomness comes
from numpy's seeded PCG64 generator: bit-level determinism holds within this
implementation, and streams are reproducible from the seed at the statistical
level elsewhere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .treebed import RegularTree, TreeSpec, build_regular_tree

__all__ = [
    "SynthSpec",
    "MaskSpec",
    "synth_tree_data",
    "gen_mask",
    "read_matrix_csv",
    "write_matrix_csv",
    "write_dataset",
    "load_dataset",
    "DATASET_FILES",
]

DATASET_FILES = ("view1.csv", "view2.csv", "labels.csv", "mask.csv")


@dataclass(frozen=True)
class SynthSpec:
    tree: TreeSpec
    samples_per_class: int = 50
    view_dims: tuple[int, int] = (16, 16)
    center_step: float = 1.0
    noise: float = 0.5
    cross_view_cond: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples_per_class < 1:
            raise ValueError(f"samples_per_class must be >= 1, got {self.samples_per_class}")
        if len(self.view_dims) != 2 or any(d < 1 for d in self.view_dims):
            raise ValueError(f"view_dims must be two positive dims, got {self.view_dims}")
        if self.center_step < 0 or self.noise < 0:
            raise ValueError("scales must be >= 0")
        if not self.cross_view_cond >= 1:
            raise ValueError(f"cross_view_cond must be >= 1, got {self.cross_view_cond}")


@dataclass(frozen=True)
class MaskSpec:
    eta: float
    n_views: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


def _bounded_condition_matrix(rng: np.random.Generator, rows: int, cols: int, cond: float) -> np.ndarray:
    """Seeded full-rank matrix, unit spectral norm, singular values in [1/cond, 1]."""
    m = rng.normal(size=(rows, cols))
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s = np.clip(s, s.max() / cond, s.max()) / s.max()
    return u @ np.diag(s) @ vt


def synth_tree_data(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, RegularTree]:
    """Two views with leaf-index labels: (view1, view2, labels, tree)."""
    tree = build_regular_tree(spec.tree)
    rng = np.random.default_rng(spec.seed)
    d1, d2 = spec.view_dims

    centers = np.zeros((tree.n_nodes, d1))
    for i in range(1, tree.n_nodes):
        parent = tree.parent_of(i)
        centers[i] = centers[parent] + spec.center_step * rng.normal(size=d1)
    leaf_centers = centers[tree.leaves()]

    n_classes = leaf_centers.shape[0]
    n = n_classes * spec.samples_per_class
    labels = np.repeat(np.arange(n_classes), spec.samples_per_class)
    view1 = leaf_centers[labels] + spec.noise * rng.normal(size=(n, d1))
    cross = _bounded_condition_matrix(rng, d2, d1, spec.cross_view_cond)
    view2 = view1 @ cross.T + spec.noise * rng.normal(size=(n, d2))
    return view1, view2, labels, tree


def gen_mask(spec: MaskSpec, n: int) -> np.ndarray:
    """Binary (n, 2) observation mask: floor(eta*n + 0.5) rows chosen without
    replacement each lose exactly one uniformly chosen view."""
    if spec.n_views != 2:
        raise ValueError(f"mask generation supports exactly two views, got {spec.n_views}")
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    rng = np.random.default_rng(spec.seed)
    mask = np.ones((n, 2), dtype=np.int64)
    n_incomplete = int(math.floor(spec.eta * n + 0.5))
    rows = rng.choice(n, size=n_incomplete, replace=False)
    dropped = rng.integers(0, 2, size=n_incomplete)
    mask[rows, dropped] = 0
    return mask


def write_matrix_csv(matrix: np.ndarray, path: str | Path) -> None:
    """Header row c0,c1,...; values at 17 significant digits so that
    write-then-read restores doubles exactly."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(f"c{j}" for j in range(m.shape[1])) + "\n")
        for row in m:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file, expected a header row")
    ncols = len(rows[0])
    data = np.empty((len(rows) - 1, ncols))
    for i, row in enumerate(rows[1:]):
        if len(row) != ncols:
            raise ValueError(f"{path}: row {i + 2} has {len(row)} cells, expected {ncols}")
        try:
            data[i] = [float(cell) for cell in row]
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric cell in row {i + 2}") from exc
    return data


def write_dataset(outdir: str | Path, view1, view2, labels, mask) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(view1, outdir / "view1.csv")
    write_matrix_csv(view2, outdir / "view2.csv")
    write_matrix_csv(np.asarray(labels, dtype=np.float64)[:, None], outdir / "labels.csv")
    write_matrix_csv(np.asarray(mask, dtype=np.float64), outdir / "mask.csv")


def load_dataset(indir: str | Path) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """(views, mask, labels) from a dataset directory."""
    indir = Path(indir)
    views = [read_matrix_csv(indir / "view1.csv"), read_matrix_csv(indir / "view2.csv")]
    mask = read_matrix_csv(indir / "mask.csv").astype(np.int64)
    labels = read_matrix_csv(indir / "labels.csv").ravel().astype(np.int64)
    n = views[0].shape[0]
    if views[1].shape[0] != n or mask.shape[0] != n or labels.shape[0] != n:
        raise ValueError(f"{indir}: inconsistent row counts across dataset files")
    return views, mask, labels
