"""Dual-branch network: per-view encoders, a shared projector, per-view
prototype heads, and a momentum teacher mirroring the encoders.

Student parameters carry gradients; the teacher is a slowly updated copy of
the student encoders and its forward pass records nothing on the tape, so it
only ever produces constant targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diffeng as dg
from .hypmath import HypConfig

__all__ = [
    "ModelSpec",
    "ModelState",
    "ViewOutputs",
    "init_model",
    "student_params",
    "encode",
    "project_head",
    "prototype_head",
    "hyp_project_t",
    "forward_views",
    "ema_update",
    "save_checkpoint",
    "load_checkpoint",
]

Layer = tuple[dg.Tensor, dg.Tensor]  # (weights, bias)


@dataclass(frozen=True)
class ModelSpec:
    view_dims: tuple[int, ...]
    hidden: tuple[int, ...] = (64,)
    embed_dim: int = 16
    prototypes: int = 10
    hyp: HypConfig = field(default_factory=HypConfig)
    seed: int = 0
    prototype_softmax: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "view_dims", tuple(int(d) for d in self.view_dims))
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if not self.view_dims or any(d < 1 for d in self.view_dims):
            raise ValueError(f"view_dims must be nonempty positive, got {self.view_dims}")
        if not self.hidden or any(w < 1 for w in self.hidden):
            raise ValueError(f"hidden widths must be nonempty positive, got {self.hidden}")
        if self.embed_dim < 2:
            raise ValueError(f"embed_dim must be >= 2, got {self.embed_dim}")
        if self.prototypes < 1:
            raise ValueError(f"prototype count must be >= 1, got {self.prototypes}")

    @property
    def n_views(self) -> int:
        return len(self.view_dims)


@dataclass
class ModelState:
    spec: ModelSpec
    encoders: list[list[Layer]]  # student, one stack per view
    head: list[Layer]  # shared projector: affine, tanh, affine
    proto_heads: list[Layer]  # one affine per view
    teacher: list[list[Layer]]  # mirrors encoder shapes, gradient-free
    momentum: float = 0.98


@dataclass
class ViewOutputs:
    """All representations of one view for one batch; teacher-side tensors
    are constants."""

    f: dg.Tensor  # student features, unit rows
    f_t: dg.Tensor  # teacher features, unit rows
    z: dg.Tensor  # projector output
    q_hat: dg.Tensor  # ball projection of z
    q: dg.Tensor  # ball projection of teacher features
    p_hat: dg.Tensor  # prototype scores of z, rows in the K-dim ball
    p: dg.Tensor  # prototype scores of teacher features, constant


def _draw_layer(rng: np.random.Generator, fan_in: int, fan_out: int, requires_grad: bool) -> Layer:
    # symmetric uniform fan-in initialization
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return (dg.Tensor(w, requires_grad=requires_grad), dg.Tensor(b, requires_grad=requires_grad))


def init_model(spec: ModelSpec, momentum: float = 0.98) -> ModelState:
    """Seeded initialization; the teacher starts as an exact copy of the
    student encoders."""
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    rng = np.random.default_rng(spec.seed)
    dims_tail = list(spec.hidden) + [spec.embed_dim]
    encoders = []
    for d_in in spec.view_dims:
        dims = [d_in] + dims_tail
        encoders.append(
            [_draw_layer(rng, dims[i], dims[i + 1], True) for i in range(len(dims) - 1)]
        )
    head = [
        _draw_layer(rng, spec.embed_dim, spec.embed_dim, True),
        _draw_layer(rng, spec.embed_dim, spec.embed_dim, True),
    ]
    proto_heads = [_draw_layer(rng, spec.embed_dim, spec.prototypes, True) for _ in spec.view_dims]
    teacher = [
        [(dg.Tensor(w.data.copy()), dg.Tensor(b.data.copy())) for w, b in stack]
        for stack in encoders
    ]
    return ModelState(
        spec=spec,
        encoders=encoders,
        head=head,
        proto_heads=proto_heads,
        teacher=teacher,
        momentum=momentum,
    )


def student_params(state: ModelState) -> list[dg.Tensor]:
    params: list[dg.Tensor] = []
    for stack in state.encoders:
        for w, b in stack:
            params.extend((w, b))
    for w, b in state.head:
        params.extend((w, b))
    for w, b in state.proto_heads:
        params.extend((w, b))
    return params


def _mlp(x: dg.Tensor, layers: list[Layer]) -> dg.Tensor:
    out = x
    for w, b in layers[:-1]:
        out = dg.tanh_act(dg.affine(out, w, b))
    w, b = layers[-1]
    return dg.affine(out, w, b)


def encode(state: ModelState, view: int, x, teacher: bool = False) -> dg.Tensor:
    """View encoder: tanh hidden layers, linear output.

    Features keep their scale; row l2 normalization happens where similarity
    is computed, not here.
    """
    x = dg.as_tensor(x)
    if x.data.ndim != 2 or x.shape[1] != state.spec.view_dims[view]:
        raise ValueError(
            f"view {view} expects (*, {state.spec.view_dims[view]}), got {x.shape}"
        )
    layers = state.teacher[view] if teacher else state.encoders[view]
    return _mlp(x, layers)


def project_head(state: ModelState, f: dg.Tensor) -> dg.Tensor:
    """Shared cross-view translator g: affine, tanh, affine."""
    (w1, b1), (w2, b2) = state.head
    return dg.affine(dg.tanh_act(dg.affine(dg.as_tensor(f), w1, b1)), w2, b2)


def hyp_project_t(x: dg.Tensor, cfg: HypConfig) -> dg.Tensor:
    """Tape-recorded clip-then-exp ball projection, row-wise."""
    return dg.exp_map_rows(dg.clip_rows(x, cfg), cfg)


def prototype_head(state: ModelState, view: int, z, detach: bool = False) -> dg.Tensor:
    """Affine map to prototype scores, then ball projection row-wise.

    With ``detach`` the current weights are used as constants, for
    teacher-side targets.
    """
    w, b = state.proto_heads[view]
    if detach:
        w, b = dg.Tensor(w.data), dg.Tensor(b.data)
    scores = dg.affine(dg.as_tensor(z), w, b)
    if state.spec.prototype_softmax:
        scores = dg.exp(dg.log_softmax_rows(scores))
    return hyp_project_t(scores, state.spec.hyp)


def forward_views(state: ModelState, views: list[np.ndarray]) -> list[ViewOutputs]:
    """Compute every representation family for a batch of complete samples."""
    if len(views) != state.spec.n_views:
        raise ValueError(f"expected {state.spec.n_views} views, got {len(views)}")
    outs = []
    for v, x in enumerate(views):
        x_t = dg.as_tensor(x)
        f = encode(state, v, x_t)
        f_t = encode(state, v, x_t, teacher=True)
        z = project_head(state, f)
        q_hat = hyp_project_t(z, state.spec.hyp)
        q = hyp_project_t(f_t, state.spec.hyp)
        p_hat = prototype_head(state, v, z)
        p = prototype_head(state, v, f_t, detach=True)
        outs.append(ViewOutputs(f=f, f_t=f_t, z=z, q_hat=q_hat, q=q, p_hat=p_hat, p=p))
    return outs


def ema_update(state: ModelState, momentum: float | None = None) -> None:
    """theta_teacher <- m * theta_teacher + (1 - m) * theta_student, in place."""
    m = state.momentum if momentum is None else momentum
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"momentum must lie in [0, 1], got {m}")
    for t_stack, s_stack in zip(state.teacher, state.encoders):
        for (tw, tb), (sw, sb) in zip(t_stack, s_stack):
            if tw.data.shape != sw.data.shape or tb.data.shape != sb.data.shape:
                raise ValueError("teacher/student shape drift")
            tw.data = m * tw.data + (1.0 - m) * sw.data
            tb.data = m * tb.data + (1.0 - m) * sb.data


# --- checkpoints -------------------------------------------------------------


def _named_arrays(state: ModelState) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for v, stack in enumerate(state.encoders):
        for i, (w, b) in enumerate(stack):
            arrays[f"enc{v}.{i}.W"] = w.data
            arrays[f"enc{v}.{i}.b"] = b.data
    for i, (w, b) in enumerate(state.head):
        arrays[f"g.{i}.W"] = w.data
        arrays[f"g.{i}.b"] = b.data
    for v, (w, b) in enumerate(state.proto_heads):
        arrays[f"proto{v}.W"] = w.data
        arrays[f"proto{v}.b"] = b.data
    for v, stack in enumerate(state.teacher):
        for i, (w, b) in enumerate(stack):
            arrays[f"teacher{v}.{i}.W"] = w.data
            arrays[f"teacher{v}.{i}.b"] = b.data
    return arrays


def save_checkpoint(state: ModelState, path: str | Path) -> Path:
    """Write named parameter arrays to ``<path>`` (npz) and a JSON manifest
    next to it; returns the manifest path."""
    path = Path(path)
    arrays = _named_arrays(state)
    np.savez(path, **arrays)
    spec = state.spec
    manifest = {
        "names": sorted(arrays),
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "spec": {
            "view_dims": list(spec.view_dims),
            "hidden": list(spec.hidden),
            "embed_dim": spec.embed_dim,
            "prototypes": spec.prototypes,
            "c": spec.hyp.c,
            "clip_radius": spec.hyp.clip_radius,
            "eps": spec.hyp.eps,
            "seed": spec.seed,
            "prototype_softmax": spec.prototype_softmax,
        },
        "momentum": state.momentum,
    }
    manifest_path = path.with_name(path.stem + "_manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def load_checkpoint(path: str | Path) -> ModelState:
    path = Path(path)
    manifest_path = path.with_name(path.stem + "_manifest.json")
    manifest = json.loads(manifest_path.read_text())
    raw = manifest["spec"]
    spec = ModelSpec(
        view_dims=tuple(raw["view_dims"]),
        hidden=tuple(raw["hidden"]),
        embed_dim=raw["embed_dim"],
        prototypes=raw["prototypes"],
        hyp=HypConfig(c=raw["c"], clip_radius=raw["clip_radius"], eps=raw["eps"]),
        seed=raw["seed"],
        prototype_softmax=raw["prototype_softmax"],
    )
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}

    def layer(prefix: str, requires_grad: bool) -> Layer:
        return (
            dg.Tensor(arrays[f"{prefix}.W"], requires_grad=requires_grad),
            dg.Tensor(arrays[f"{prefix}.b"], requires_grad=requires_grad),
        )

    n_layers = len(spec.hidden) + 1
    encoders = [
        [layer(f"enc{v}.{i}", True) for i in range(n_layers)] for v in range(spec.n_views)
    ]
    head = [layer(f"g.{i}", True) for i in range(2)]
    proto_heads = [layer(f"proto{v}", True) for v in range(spec.n_views)]
    teacher = [
        [layer(f"teacher{v}.{i}", False) for i in range(n_layers)] for v in range(spec.n_views)
    ]
    return ModelState(
        spec=spec,
        encoders=encoders,
        head=head,
        proto_heads=proto_heads,
        teacher=teacher,
        momentum=manifest["momentum"],
    )
