"""Network state: seeded init, forward families, EMA teacher, checkpoints."""

import numpy as np
import pytest

from herl import diffeng as dg
from herl.hypmath import HypConfig
from herl.losses import LossConfig, prototype_loss
from herl.netmodel import (
    ModelSpec,
    ema_update,
    encode,
    forward_views,
    init_model,
    load_checkpoint,
    prototype_head,
    save_checkpoint,
    student_params,
)

SPEC = ModelSpec(
    view_dims=(5, 7),
    hidden=(6,),
    embed_dim=4,
    prototypes=3,
    hyp=HypConfig(c=0.5, clip_radius=1.5),
    seed=11,
)


def batch(rng, n=9):
    return [rng.normal(size=(n, 5)), rng.normal(size=(n, 7))]


class TestInit:
    def test_same_seed_bit_identical(self):
        a, b = init_model(SPEC), init_model(SPEC)
        for pa, pb in zip(student_params(a), student_params(b)):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_teacher_copies_student_encoders(self):
        state = init_model(SPEC)
        for t_stack, s_stack in zip(state.teacher, state.encoders):
            for (tw, tb), (sw, sb) in zip(t_stack, s_stack):
                np.testing.assert_array_equal(tw.data, sw.data)
                np.testing.assert_array_equal(tb.data, sb.data)
                assert not tw.requires_grad and sw.requires_grad

    def test_degenerate_specs_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec(view_dims=(5,), hidden=(), embed_dim=4, prototypes=3)
        with pytest.raises(ValueError):
            ModelSpec(view_dims=(), hidden=(6,), embed_dim=4, prototypes=3)
        with pytest.raises(ValueError):
            ModelSpec(view_dims=(5,), hidden=(6,), embed_dim=1, prototypes=3)
        with pytest.raises(ValueError):
            ModelSpec(view_dims=(5,), hidden=(6,), embed_dim=4, prototypes=0)


class TestForward:
    def test_all_families_shapes(self):
        rng = np.random.default_rng(0)
        state = init_model(SPEC)
        outs = forward_views(state, batch(rng))
        for o in outs:
            assert o.f.shape == (9, 4) and o.f_t.shape == (9, 4)
            assert o.z.shape == (9, 4)
            assert o.q_hat.shape == (9, 4) and o.q.shape == (9, 4)
            assert o.p_hat.shape == (9, 3) and o.p.shape == (9, 3)

    def test_ball_invariants(self):
        rng = np.random.default_rng(1)
        state = init_model(SPEC)
        outs = forward_views(state, [100 * v for v in batch(rng)])
        c = SPEC.hyp.c
        for o in outs:
            for m in (o.q_hat, o.q, o.p_hat, o.p):
                assert np.all(c * np.sum(m.data**2, axis=1) < 1.0)

    def test_teacher_constant_under_m_equals_one(self):
        rng = np.random.default_rng(2)
        state = init_model(SPEC)
        x = batch(rng)
        before = encode(state, 0, x[0], teacher=True).data
        for p in student_params(state):
            p.data = p.data + 0.1
        ema_update(state, momentum=1.0)
        after = encode(state, 0, x[0], teacher=True).data
        np.testing.assert_array_equal(before, after)

    def test_teacher_is_gradient_free(self):
        rng = np.random.default_rng(3)
        state = init_model(SPEC)
        outs = forward_views(state, batch(rng))
        assert not outs[0].f_t.requires_grad
        assert not outs[0].q.requires_grad
        assert not outs[0].p.requires_grad
        loss = dg.sum_all(dg.mul(outs[0].f, outs[0].f))
        dg.backward(loss)
        for stack in state.teacher:
            for w, b in stack:
                assert w.grad is None and b.grad is None

    def test_forward_deterministic(self):
        rng = np.random.default_rng(4)
        state = init_model(SPEC)
        x = batch(rng)
        a = forward_views(state, x)
        b = forward_views(state, x)
        np.testing.assert_array_equal(a[1].q_hat.data, b[1].q_hat.data)

    def test_dimension_mismatch(self):
        state = init_model(SPEC)
        with pytest.raises(ValueError):
            encode(state, 0, np.zeros((3, 6)))


class TestPrototypeHead:
    def test_zero_weights_map_to_origin(self):
        state = init_model(SPEC)
        w, b = state.proto_heads[0]
        w.data = np.zeros_like(w.data)
        b.data = np.zeros_like(b.data)
        out = prototype_head(state, 0, np.random.default_rng(5).normal(size=(4, 4)))
        np.testing.assert_array_equal(out.data, np.zeros((4, 3)))

    def test_single_prototype_shape(self):
        spec = ModelSpec(view_dims=(5, 7), hidden=(6,), embed_dim=4, prototypes=1, seed=1)
        state = init_model(spec)
        out = prototype_head(state, 0, np.zeros((8, 4)))
        assert out.shape == (8, 1)

    def test_softmax_variant_rows_in_ball(self):
        spec = ModelSpec(
            view_dims=(5, 7), hidden=(6,), embed_dim=4, prototypes=3,
            hyp=HypConfig(c=1.0, clip_radius=1.0), seed=2, prototype_softmax=True,
        )
        state = init_model(spec)
        out = prototype_head(state, 0, np.random.default_rng(6).normal(size=(5, 4)))
        assert np.all(np.sum(out.data**2, axis=1) < 1.0)

    def test_detached_head_blocks_gradient(self):
        state = init_model(SPEC)
        z = dg.Tensor(np.random.default_rng(7).normal(size=(4, 4)))
        out = prototype_head(state, 0, z, detach=True)
        assert not out.requires_grad


class TestEma:
    def test_endpoint_momenta(self):
        state = init_model(SPEC)
        for p in student_params(state):
            p.data = p.data + 1.0
        snapshot = [w.data.copy() for stack in state.teacher for layer in stack for w in layer]
        ema_update(state, momentum=1.0)
        after = [w.data for stack in state.teacher for layer in stack for w in layer]
        for s, a in zip(snapshot, after):
            np.testing.assert_array_equal(s, a)
        ema_update(state, momentum=0.0)
        for t_stack, s_stack in zip(state.teacher, state.encoders):
            for (tw, _), (sw, _) in zip(t_stack, s_stack):
                np.testing.assert_array_equal(tw.data, sw.data)

    def test_scalar_blend(self):
        state = init_model(SPEC)
        tw = state.teacher[0][0][0]
        sw = state.encoders[0][0][0]
        tw.data = np.ones_like(tw.data)
        sw.data = np.zeros_like(sw.data)
        ema_update(state, momentum=0.98)
        np.testing.assert_allclose(tw.data, 0.98, atol=1e-15)

    def test_contraction_toward_student(self):
        rng = np.random.default_rng(8)
        state = init_model(SPEC)
        tw = state.teacher[0][0][0]
        sw = state.encoders[0][0][0]
        tw.data = rng.normal(size=tw.data.shape)
        gap_before = np.abs(tw.data - sw.data)
        ema_update(state, momentum=0.9)
        np.testing.assert_allclose(np.abs(tw.data - sw.data), 0.9 * gap_before, atol=1e-12)

    def test_shape_drift_rejected(self):
        state = init_model(SPEC)
        state.teacher[0][0] = (dg.Tensor(np.zeros((2, 2))), state.teacher[0][0][1])
        with pytest.raises(ValueError):
            ema_update(state)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        state = init_model(SPEC)
        for p in student_params(state):
            p.data = rng.normal(size=p.data.shape)
        path = tmp_path / "checkpoint.npz"
        manifest = save_checkpoint(state, path)
        assert manifest.exists()
        loaded = load_checkpoint(path)
        assert loaded.spec == state.spec
        assert loaded.momentum == state.momentum
        for pa, pb in zip(student_params(state), student_params(loaded)):
            np.testing.assert_array_equal(pa.data, pb.data)
        outs_a = forward_views(state, batch(np.random.default_rng(10)))
        outs_b = forward_views(loaded, batch(np.random.default_rng(10)))
        np.testing.assert_array_equal(outs_a[0].p_hat.data, outs_b[0].p_hat.data)
