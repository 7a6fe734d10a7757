"""Flat key = value run configuration shared by every command.

Every key has a default, a config file may override any subset, and CLI flags
override the file, so one small artifact reproduces a run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .affinity import GraphConfig
from .hypmath import HypConfig
from .losses import LossConfig
from .netmodel import ModelSpec

__all__ = ["RunConfig", "parse_config_file", "load_run_config", "hyp_config",
           "graph_config", "loss_config", "model_spec", "config_as_text"]


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    epochs: int = 500
    batch_size: int = 1024
    learning_rate: float = 2e-3
    ema_momentum: float = 0.98
    curvature: float = 0.01
    clip_radius: float = 2.0
    ball_eps: float = 1e-7
    embed_dim: int = 16
    hidden: tuple[int, ...] = (64,)
    prototypes: int = 10
    prototype_softmax: bool = False
    tau: float = 0.5
    tau_dist: float = 1.0
    alpha_final: float = 0.2
    beta: float = 0.1
    graph_sigma: float = 0.1
    graph_steps: int = 3
    graph_xi: float = 0.5
    graph_warmup: int = 100
    clusters: int = 10
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.ema_momentum < 1.0:
            raise ValueError(f"ema_momentum must lie in [0, 1), got {self.ema_momentum}")
        if self.clusters < 1:
            raise ValueError(f"clusters must be >= 1, got {self.clusters}")
        # sub-config constructors validate their own fields
        hyp_config(self)
        graph_config(self)
        loss_config(self)


def _parse_value(field: dataclasses.Field, raw: str):
    raw = raw.strip()
    if field.name == "hidden":
        return tuple(int(part) for part in raw.split(",") if part.strip())
    if field.type in ("int",):
        return int(raw)
    if field.type in ("float",):
        return float(raw)
    if field.type in ("bool",):
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {raw!r} for key {field.name}")
    raise ValueError(f"unsupported config key type for {field.name}")


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys must be known."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(fields[key], raw)
    return values


def load_run_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then explicit overrides."""
    values: dict = {}
    if path is not None:
        values.update(parse_config_file(path))
    if overrides:
        fields = {f.name: f for f in dataclasses.fields(RunConfig)}
        for key, val in overrides.items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            if val is None:
                continue
            values[key] = _parse_value(fields[key], str(val)) if isinstance(val, str) else val
    return RunConfig(**values)


def config_as_text(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if f.name == "hidden":
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def hyp_config(cfg: RunConfig) -> HypConfig:
    return HypConfig(c=cfg.curvature, clip_radius=cfg.clip_radius, eps=cfg.ball_eps)


def graph_config(cfg: RunConfig) -> GraphConfig:
    return GraphConfig(
        sigma=cfg.graph_sigma, steps=cfg.graph_steps, xi=cfg.graph_xi,
        warmup_epochs=cfg.graph_warmup,
    )


def loss_config(cfg: RunConfig) -> LossConfig:
    return LossConfig(
        tau=cfg.tau, tau_dist=cfg.tau_dist, beta=cfg.beta, alpha_final=cfg.alpha_final,
    )


def model_spec(cfg: RunConfig, view_dims: tuple[int, ...], seed: int | None = None) -> ModelSpec:
    return ModelSpec(
        view_dims=tuple(view_dims),
        hidden=cfg.hidden,
        embed_dim=cfg.embed_dim,
        prototypes=cfg.prototypes,
        hyp=hyp_config(cfg),
        seed=cfg.seed if seed is None else seed,
        prototype_softmax=cfg.prototype_softmax,
    )
