"""Matplotlib report rendering; every figure goes to a file, never a screen."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_layout_figure",
    "save_training_curves",
    "save_distortion_figure",
    "save_ablation_figure",
    "save_cluster_figure",
]


def _edge_segments(coords: np.ndarray, tree) -> list:
    return [
        [coords[(i - 1) // tree.branching], coords[i]]
        for i in range(1, tree.n_nodes)
    ]


def save_layout_figure(ball_coords: np.ndarray, flat_coords: np.ndarray, tree, path: str | Path) -> Path:
    """Side-by-side tree layouts: ball coordinates with the unit circle, and
    the flat analog with the same angular schedule."""
    from matplotlib.collections import LineCollection

    fig, axes = plt.subplots(1, 2, figsize=(11, 5.5))
    for ax, coords, title in (
        (axes[0], ball_coords, "hyperbolic layout (ball coordinates)"),
        (axes[1], flat_coords, "flat analog layout"),
    ):
        ax.add_collection(LineCollection(_edge_segments(coords, tree), colors="0.75", linewidths=0.6))
        ax.scatter(coords[:, 0], coords[:, 1], c=tree.level, s=12, cmap="viridis", zorder=3)
        ax.set_title(title)
        ax.set_aspect("equal")
    circle = plt.Circle((0, 0), 1.0 / np.sqrt(tree.spec.curvature), fill=False, ls="--", color="k", lw=0.8)
    axes[0].add_patch(circle)
    axes[0].autoscale_view()
    axes[1].autoscale_view()
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_training_curves(logs, path: str | Path) -> Path:
    """Loss components per epoch with the blend weight on a twin axis."""
    fig, ax = plt.subplots(figsize=(8, 5))
    epochs = [row.epoch for row in logs]
    for name in ("l_con", "l_ang", "l_dis", "l_pro", "total"):
        ax.plot(epochs, [getattr(row, name) for row in logs], label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(loc="upper right")
    twin = ax.twinx()
    twin.plot(epochs, [row.alpha for row in logs], color="0.5", ls=":", label="alpha")
    twin.set_ylabel("alpha")
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_distortion_figure(d_tree: np.ndarray, d_emb: np.ndarray, report, path: str | Path) -> Path:
    """Embedded vs tree distances with the best-scale envelope lines."""
    fig, ax = plt.subplots(figsize=(6.5, 5))
    ax.scatter(d_tree, d_emb, s=8, alpha=0.4)
    xs = np.linspace(0, float(np.max(d_tree)), 50)
    ax.plot(xs, report.min_ratio * xs, "k--", lw=0.8, label=f"min ratio {report.min_ratio:.3f}")
    ax.plot(xs, report.max_ratio * xs, "k:", lw=0.8, label=f"max ratio {report.max_ratio:.3f}")
    ax.set_xlabel("tree distance")
    ax.set_ylabel("embedded distance")
    ax.set_title(f"pairs={report.pair_filter}  D={report.distortion:.4f}")
    ax.legend()
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_ablation_figure(rows: list[dict], path: str | Path) -> Path:
    """Mean and spread of ARI per loss-term variant."""
    variants = sorted({row["variant"] for row in rows})
    means, spreads = [], []
    for variant in variants:
        vals = np.array([row["ari"] for row in rows if row["variant"] == variant])
        means.append(vals.mean())
        spreads.append(vals.std())
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.bar(variants, means, yerr=spreads, capsize=4, color="steelblue")
    ax.set_ylabel("ARI (mean over seeds)")
    ax.set_title("loss-term ablation")
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_cluster_figure(features: np.ndarray, assignments: np.ndarray, path: str | Path) -> Path:
    """First two principal directions of the assembled features, colored by cluster."""
    x = np.asarray(features, dtype=np.float64)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    proj = centered @ vt[:2].T
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(proj[:, 0], proj[:, 1], c=assignments, s=10, cmap="tab10", alpha=0.8)
    ax.set_xlabel("pc 1")
    ax.set_ylabel("pc 2")
    ax.set_title("clusters on assembled features")
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
