"""Missing-view recovery by cross-view translation, and feature assembly.

An observed row keeps its teacher feature verbatim; a missing view-v row is
replaced by the shared projector applied to the teacher feature of the other
view. Only the two-view case is supported: the complementary view is then
unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffeng as dg
from .netmodel import ModelState, encode, project_head

__all__ = ["MaskedDataset", "recover", "assemble"]


@dataclass(frozen=True)
class MaskedDataset:
    """Per-view feature matrices plus the binary observation mask.

    Rows of a missing view are present in the feature matrix but ignored;
    mask[i, v] == 1 means sample i is observed in view v.
    """

    views: tuple[np.ndarray, ...]
    mask: np.ndarray

    def __post_init__(self) -> None:
        views = tuple(np.asarray(v, dtype=np.float64) for v in self.views)
        mask = np.asarray(self.mask)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2 or mask.shape[1] != len(views):
            raise ValueError(f"mask shape {mask.shape} does not match {len(views)} views")
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        for v, x in enumerate(views):
            if x.ndim != 2 or x.shape[0] != mask.shape[0]:
                raise ValueError(f"view {v} has {x.shape[0]} rows, mask has {mask.shape[0]}")
        if np.any(mask.sum(axis=1) == 0):
            raise ValueError("every sample must have at least one observed view")

    @property
    def n_samples(self) -> int:
        return self.mask.shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)


def recover(state: ModelState, data: MaskedDataset) -> list[np.ndarray]:
    """Completed per-view representations from the teacher encoder.

    Observed rows equal the teacher features bit for bit; missing view-v rows
    are the projector applied to the complementary view's teacher feature.
    """
    if data.n_views != 2:
        raise ValueError(f"recovery supports exactly two views, got {data.n_views}")
    if state.spec.n_views != 2:
        raise ValueError("model was not built for two views")
    teacher_feats = [
        encode(state, v, data.views[v], teacher=True).data for v in range(2)
    ]
    completed = []
    for v in range(2):
        u = 1 - v
        translated = project_head(state, dg.Tensor(teacher_feats[u])).data
        observed = data.mask[:, v : v + 1].astype(bool)
        completed.append(np.where(observed, teacher_feats[v], translated))
    return completed


def assemble(blocks: list[np.ndarray]) -> np.ndarray:
    """Column-wise concatenation in view order."""
    if not blocks:
        raise ValueError("nothing to assemble")
    mats = [np.asarray(b, dtype=np.float64) for b in blocks]
    rows = {m.shape[0] for m in mats}
    if len(rows) != 1:
        raise ValueError(f"row-count mismatch across blocks: {sorted(rows)}")
    return np.hstack(mats)
