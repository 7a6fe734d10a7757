"""Training and evaluation loops.

One epoch: update the blend ramp, draw batches from the complete subset,
build per-view soft-target graphs from teacher features (identity during
warmup), minimize the combined objective with Adam, then update the teacher
by exponential moving average. Inference recovers missing views with the
teacher, concatenates, and clusters with k-means.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import diffeng as dg
from .affinity import heat_kernel_adjacency, random_walk_graph, row_normalize
from .clustereval import ClusterResult, kmeans, score
from .config import RunConfig, graph_config, hyp_config, loss_config, model_spec
from .dataio import MaskSpec, SynthSpec, gen_mask, synth_tree_data
from .impute import MaskedDataset, assemble, recover
from .losses import (
    AlphaSchedule,
    alpha_at,
    angular_loss,
    distance_loss,
    euclidean_backbone_loss,
    instance_loss,
    prototype_loss,
)
from .netmodel import ModelState, ema_update, forward_views, init_model, student_params

__all__ = [
    "VARIANTS",
    "LOG_HEADER",
    "Adam",
    "EpochLog",
    "train_model",
    "write_log_csv",
    "evaluate_model",
    "run_ablation",
]

VARIANTS = ("full", "backbone", "no_prototype")
LOG_HEADER = "epoch,l_con,l_ang,l_dis,l_pro,alpha,total"


class Adam:
    """First-order adaptive-moment updates, decoupled from the tape; no weight decay."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * (g * g)
            m_hat = self.m[i] / bias1
            v_hat = self.v[i] / bias2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class EpochLog:
    epoch: int
    l_con: float
    l_ang: float
    l_dis: float
    l_pro: float
    alpha: float
    total: float


def _batch_ranges(n: int, batch_size: int):
    size = min(batch_size, n)
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def train_model(
    views: list[np.ndarray],
    mask: np.ndarray,
    cfg: RunConfig,
    variant: str = "full",
) -> tuple[ModelState, list[EpochLog]]:
    """Optimize on the complete subset; returns the trained state and the
    per-epoch loss log (excluded terms log as 0.0 in reduced variants)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    views = [np.asarray(v, dtype=np.float64) for v in views]
    mask = np.asarray(mask)
    complete = np.flatnonzero(mask.all(axis=1))
    if complete.size == 0:
        raise ValueError("training needs at least one sample with all views observed")

    seeds = np.random.SeedSequence(cfg.seed).generate_state(2)
    spec = model_spec(cfg, tuple(v.shape[1] for v in views), seed=int(seeds[0]))
    state = init_model(spec, momentum=cfg.ema_momentum)
    optimizer = Adam(student_params(state), lr=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(int(seeds[1]))

    lcfg = loss_config(cfg)
    gcfg = graph_config(cfg)
    hyp = hyp_config(cfg)
    logs: list[EpochLog] = []
    if cfg.epochs == 0:
        return state, logs
    sched = AlphaSchedule(cfg.alpha_final, cfg.epochs)

    for epoch in range(1, cfg.epochs + 1):
        alpha = alpha_at(epoch, sched)
        order = complete[shuffle_rng.permutation(complete.size)]
        sums = np.zeros(5)  # l_con, l_ang, l_dis, l_pro, total weighted by batch size
        seen = 0
        for rows in _batch_ranges(order.size, cfg.batch_size):
            idx = order[rows]
            batch = [v[idx] for v in views]
            outs = forward_views(state, batch)
            graphs = [
                random_walk_graph(
                    row_normalize(heat_kernel_adjacency(outs[v].f_t.data, gcfg.sigma)),
                    gcfg,
                    epoch,
                )
                for v in range(len(outs))
            ]
            l_con = euclidean_backbone_loss(outs, graphs, lcfg)
            total = l_con
            l_ang_val = l_dis_val = l_pro_val = 0.0
            if variant != "backbone":
                l_ang = angular_loss(outs, graphs, lcfg)
                l_dis = distance_loss(outs, lcfg, hyp)
                total = total + instance_loss(l_ang, l_dis, alpha)
                l_ang_val, l_dis_val = l_ang.item(), l_dis.item()
            if variant == "full":
                l_pro = prototype_loss(outs, lcfg)
                total = total + l_pro * lcfg.beta
                l_pro_val = l_pro.item()
            optimizer.zero_grad()
            dg.backward(total)
            optimizer.step()
            ema_update(state)
            n = idx.size
            sums += n * np.array([l_con.item(), l_ang_val, l_dis_val, l_pro_val, total.item()])
            seen += n
        mean = sums / seen
        logs.append(
            EpochLog(
                epoch=epoch,
                l_con=float(mean[0]),
                l_ang=float(mean[1]),
                l_dis=float(mean[2]),
                l_pro=float(mean[3]),
                alpha=alpha,
                total=float(mean[4]),
            )
        )
    return state, logs


def write_log_csv(logs: list[EpochLog], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(LOG_HEADER + "\n")
        for row in logs:
            values = (row.l_con, row.l_ang, row.l_dis, row.l_pro, row.alpha, row.total)
            fh.write(f"{row.epoch}," + ",".join(repr(float(v)) for v in values) + "\n")


def evaluate_model(
    state: ModelState,
    views: list[np.ndarray],
    mask: np.ndarray,
    labels: np.ndarray,
    clusters: int,
    cfg: RunConfig,
) -> tuple[ClusterResult, np.ndarray]:
    """Recover, assemble, cluster, and attach matched metrics; also returns
    the assembled feature matrix."""
    data = MaskedDataset(tuple(views), np.asarray(mask))
    assembled = assemble(recover(state, data))
    result = kmeans(
        assembled, clusters, seed=cfg.seed, restarts=cfg.kmeans_restarts,
        max_iter=cfg.kmeans_max_iter,
    )
    result.acc, result.nmi, result.ari = score(labels, result.assignments)
    return result, assembled


def run_ablation(
    cfg: RunConfig,
    synth: SynthSpec,
    eta: float,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
    variants: tuple[str, ...] = VARIANTS,
) -> list[dict]:
    """Loss-term toggles over seeds on shared per-seed synthetic data.

    Each seed drives the dataset, the mask, and the model initialization, so
    variants differ only in which loss terms are active.
    """
    rows = []
    for seed in seeds:
        view1, view2, labels, _ = synth_tree_data(replace(synth, seed=seed))
        mask = gen_mask(MaskSpec(eta=eta, seed=seed), view1.shape[0])
        n_classes = int(labels.max()) + 1
        run_cfg = replace(cfg, seed=seed, clusters=n_classes)
        for variant in variants:
            state, _ = train_model([view1, view2], mask, run_cfg, variant=variant)
            result, _ = evaluate_model(
                state, [view1, view2], mask, labels, n_classes, run_cfg
            )
            rows.append(
                {
                    "variant": variant,
                    "seed": seed,
                    "acc": result.acc,
                    "nmi": result.nmi,
                    "ari": result.ari,
                }
            )
    return rows
