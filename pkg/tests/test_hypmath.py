"""Ball geometry: algebraic laws, closed forms, and boundary guards."""

import math

import numpy as np
import pytest

from herl.hypmath import (
    BallPoint,
    BoundaryError,
    HypConfig,
    angular_sim,
    clip,
    clip_rows,
    conformal_factor,
    dist_sim,
    exp_map_origin,
    exp_map_rows,
    hyp_distance,
    hyp_distance_rows,
    hyp_project,
    mobius_add,
    mobius_add_rows,
    pairwise_hyp_distance,
)

CURVATURES = (0.01, 0.05, 0.1, 1.0)


def ball_rows(rng, n, d, c, max_frac=0.8):
    direction = rng.normal(size=(n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * rng.uniform(0.0, max_frac, size=(n, 1)) / math.sqrt(c)


class TestTypes:
    def test_config_validation(self):
        HypConfig(c=0.5, clip_radius=1.0, eps=1e-7)
        with pytest.raises(ValueError):
            HypConfig(c=0.0)
        with pytest.raises(ValueError):
            HypConfig(clip_radius=-1.0)
        with pytest.raises(ValueError):
            HypConfig(eps=1e-2)

    def test_ball_point_strictly_inside(self):
        BallPoint(np.array([0.9, 0.0]), c=1.0)
        with pytest.raises(BoundaryError):
            BallPoint(np.array([1.0, 0.0]), c=1.0)
        with pytest.raises(ValueError):
            BallPoint(np.array([[0.1, 0.2]]), c=1.0)
        with pytest.raises(ValueError):
            BallPoint(np.array([np.inf, 0.0]), c=1.0)


class TestConformalFactor:
    def test_origin_is_two(self):
        assert conformal_factor(BallPoint(np.zeros(3), c=1.0)) == 2.0

    def test_half_norm_squared(self):
        x = BallPoint(np.array([math.sqrt(0.5), 0.0]), c=1.0)
        assert conformal_factor(x) == pytest.approx(4.0, abs=1e-12)
        y = BallPoint(np.array([math.sqrt(50.0), 0.0]), c=0.01)
        assert conformal_factor(y) == pytest.approx(4.0, abs=1e-12)

    def test_boundary_guard(self):
        x = BallPoint(np.array([0.99999999, 0.0]), c=1.0)
        with pytest.raises(BoundaryError):
            conformal_factor(x)


class TestMobiusAdd:
    def test_identities_and_inverse(self):
        rng = np.random.default_rng(0)
        for c in CURVATURES:
            x = ball_rows(rng, 2000, 6, c)
            zero = np.zeros_like(x)
            np.testing.assert_allclose(mobius_add_rows(x, zero, c), x, atol=1e-12)
            np.testing.assert_allclose(mobius_add_rows(zero, x, c), x, atol=1e-12)
            residual = np.linalg.norm(mobius_add_rows(-x, x, c), axis=1)
            assert residual.max() < 1e-12

    def test_mismatch_errors(self):
        a = BallPoint(np.array([0.1, 0.2]), c=1.0)
        with pytest.raises(ValueError):
            mobius_add(a, BallPoint(np.array([0.1, 0.2]), c=0.5))
        with pytest.raises(ValueError):
            mobius_add(a, BallPoint(np.array([0.1, 0.2, 0.0]), c=1.0))

    def test_wrapper_matches_rows(self):
        rng = np.random.default_rng(1)
        x = ball_rows(rng, 1, 4, 1.0)[0]
        y = ball_rows(rng, 1, 4, 1.0)[0]
        out = mobius_add(BallPoint(x, 1.0), BallPoint(y, 1.0))
        np.testing.assert_array_equal(out.coords, mobius_add_rows(x[None], y[None], 1.0)[0])


class TestExpMap:
    def test_zero_maps_to_origin(self):
        out = exp_map_origin(np.zeros(4), HypConfig(c=1.0))
        np.testing.assert_array_equal(out.coords, np.zeros(4))

    def test_tanh_arctanh_identity(self):
        z = np.array([math.atanh(0.5), 0.0])
        out = exp_map_origin(z, HypConfig(c=1.0))
        np.testing.assert_allclose(out.coords, [0.5, 0.0], atol=1e-15)

    def test_norm_bounded_by_curvature_radius(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(500, 5)) * rng.uniform(0, 1e3, size=(500, 1))
        out = exp_map_rows(z, 4.0)
        assert np.all(np.linalg.norm(out, axis=1) < 0.5)

    def test_strict_containment_large_inputs(self):
        rng = np.random.default_rng(3)
        for c in CURVATURES:
            z = rng.normal(size=(2000, 6)) * rng.uniform(0, 1e3, size=(2000, 1))
            out = exp_map_rows(z, c)
            assert np.all(c * np.sum(out * out, axis=1) < 1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            exp_map_origin(np.array([np.nan, 0.0]), HypConfig())


class TestClip:
    def test_above_threshold_rescaled(self):
        cfg = HypConfig(c=1.0, clip_radius=2.0)
        z = np.array([4.0, 0.0])
        out = clip(z, cfg)
        np.testing.assert_allclose(out, [2.0, 0.0], atol=1e-15)

    def test_below_threshold_untouched(self):
        cfg = HypConfig(c=1.0, clip_radius=2.0)
        z = np.array([1.0, 0.0])
        np.testing.assert_array_equal(clip(z, cfg), z)

    def test_zero_fixed_point(self):
        np.testing.assert_array_equal(clip(np.zeros(3), HypConfig()), np.zeros(3))

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=(100, 5)) * 3.0
        once = clip_rows(z, 1.5)
        np.testing.assert_array_equal(clip_rows(once, 1.5), once)


class TestHypProject:
    def test_clip_then_exp_order(self):
        cfg = HypConfig(c=1.0, clip_radius=2.0)
        z = np.array([10.0, 0.0])
        out = hyp_project(z, cfg)
        assert np.linalg.norm(out.coords) == pytest.approx(math.tanh(2.0), abs=1e-12)

    def test_zero_fixed(self):
        out = hyp_project(np.zeros(2), HypConfig())
        np.testing.assert_array_equal(out.coords, np.zeros(2))

    def test_always_inside_ball(self):
        rng = np.random.default_rng(5)
        for c in CURVATURES:
            cfg = HypConfig(c=c, clip_radius=2.0)
            for _ in range(50):
                out = hyp_project(rng.normal(size=4) * 100, cfg)
                assert c * float(out.coords @ out.coords) < 1.0

    def test_direction_preserved_when_unclipped(self):
        rng = np.random.default_rng(6)
        cfg = HypConfig(c=1.0, clip_radius=5.0)
        for _ in range(50):
            z = rng.normal(size=4)
            w = rng.normal(size=4)
            lhs = angular_sim(hyp_project(z, cfg), hyp_project(w, cfg))
            assert lhs == pytest.approx(angular_sim(z, w), abs=1e-12)


class TestHypDistance:
    def test_zero_iff_equal(self):
        a = BallPoint(np.array([0.3, -0.2]), c=1.0)
        assert hyp_distance(a, a) == 0.0

    def test_closed_form_from_origin(self):
        a = BallPoint(np.zeros(2), c=1.0)
        b = BallPoint(np.array([0.5, 0.0]), c=1.0)
        assert hyp_distance(a, b) == pytest.approx(math.log(3.0), abs=1e-12)

    def test_symmetry_random_pairs(self):
        rng = np.random.default_rng(7)
        for c in CURVATURES:
            x = ball_rows(rng, 2000, 6, c)
            y = ball_rows(rng, 2000, 6, c)
            d_xy = hyp_distance_rows(x, y, c)
            d_yx = hyp_distance_rows(y, x, c)
            np.testing.assert_allclose(d_xy, d_yx, atol=1e-12)

    def test_closed_form_vs_rows(self):
        rng = np.random.default_rng(8)
        for c in CURVATURES:
            x = ball_rows(rng, 500, 4, c)
            d = hyp_distance_rows(np.zeros_like(x), x, c)
            expected = (2.0 / math.sqrt(c)) * np.arctanh(math.sqrt(c) * np.linalg.norm(x, axis=1))
            np.testing.assert_allclose(d, expected, atol=1e-10)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(9)
        for c in CURVATURES:
            a = ball_rows(rng, 1000, 5, c)
            b = ball_rows(rng, 1000, 5, c)
            m = ball_rows(rng, 1000, 5, c)
            ab = hyp_distance_rows(a, b, c)
            via = hyp_distance_rows(a, m, c) + hyp_distance_rows(m, b, c)
            assert np.all(ab <= via + 1e-9)

    def test_pairwise_matches_single_route(self):
        rng = np.random.default_rng(10)
        for c in (0.05, 1.0):
            a = ball_rows(rng, 8, 3, c)
            b = ball_rows(rng, 6, 3, c)
            mat = pairwise_hyp_distance(a, b, c)
            for i in range(8):
                for j in range(6):
                    single = hyp_distance(BallPoint(a[i], c), BallPoint(b[j], c))
                    assert mat[i, j] == pytest.approx(single, abs=1e-12)


class TestAngularAndDistSim:
    def test_angular_trivials(self):
        v = np.array([0.2, 0.1])
        assert angular_sim(v, v) == pytest.approx(1.0, abs=1e-15)
        assert angular_sim(v, -v) == pytest.approx(-1.0, abs=1e-15)
        assert angular_sim(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == 0.0

    def test_zero_vector_error(self):
        with pytest.raises(ValueError):
            angular_sim(np.zeros(2), np.array([1.0, 0.0]))

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        a, b = rng.normal(size=4), rng.normal(size=4)
        assert angular_sim(a, b) == pytest.approx(angular_sim(3.7 * a, 0.02 * b), abs=1e-12)

    def test_dist_sim_negated_and_nonpositive(self):
        a = BallPoint(np.zeros(2), c=1.0)
        b = BallPoint(np.array([0.5, 0.0]), c=1.0)
        assert dist_sim(a, b) == pytest.approx(-math.log(3.0), abs=1e-12)
        assert dist_sim(a, a) == 0.0
        rng = np.random.default_rng(12)
        for _ in range(20):
            x = BallPoint(ball_rows(rng, 1, 3, 1.0)[0], 1.0)
            y = BallPoint(ball_rows(rng, 1, 3, 1.0)[0], 1.0)
            assert dist_sim(x, y) <= 0.0
