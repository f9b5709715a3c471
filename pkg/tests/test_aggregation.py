import math
from unittest import mock

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pmsm_gp.aggregation import (ExpertOutputs, aggregate_mean, ball_radius, check_weights,
                                 coaoe_eta_weights, coaoe_mean_weights, coaoe_theta,
                                 gpoe_aggregate, moe_weights, ultimate_bound, vdot_value, vertex)
from pmsm_gp.dynamics import map_states, true_torque_grid
from pmsm_gp.gp import GPModel

finite = st.floats(-1e3, 1e3, allow_nan=False)


def random_simplex(rng, n, k):
    return rng.dirichlet(np.ones(n), size=k)


class TestWeights:
    def test_vertex(self):
        assert np.array_equal(vertex(2, 4), [0, 0, 1, 0])

    @pytest.mark.parametrize("w", [[0.5, 0.6], [-0.1, 1.1], [1.0]])
    def test_invalid(self, w):
        with pytest.raises(ValueError):
            check_weights(w, 2)

    @pytest.mark.parametrize("n", [1, 4, 7, 10_000])
    def test_moe(self, n):
        w = moe_weights(n)
        assert abs(w.sum() - 1.0) <= 1e-12
        assert np.all(w == 1.0 / n)

    def test_moe_needs_an_expert(self):
        with pytest.raises(ValueError):
            moe_weights(0)


class TestAggregateMean:
    def test_hand_sum(self):
        assert aggregate_mean(ExpertOutputs(np.array([1.0, 3.0])), [0.5, 0.5]) == 2.0

    def test_vertex_picks_mean(self):
        out = ExpertOutputs(np.array([1.0, -2.0, 5.0]))
        assert aggregate_mean(out, vertex(1, 3)) == -2.0

    @given(finite, st.integers(1, 8), st.integers(0, 1000))
    def test_identical_experts(self, c, n, seed):
        w = random_simplex(np.random.default_rng(seed), n, 1)[0]
        w /= w.sum()
        assert aggregate_mean(ExpertOutputs(np.full(n, c)), w) == pytest.approx(c, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            aggregate_mean(ExpertOutputs(np.zeros(3)), [0.5, 0.5])
        with pytest.raises(ValueError):
            ExpertOutputs(np.zeros(3), variances=np.ones(2))


class TestGPOE:
    def test_equal_variances(self):
        mu, s = gpoe_aggregate(ExpertOutputs(np.array([1.0, 3.0]), np.array([1.0, 1.0])), [0.5, 0.5])
        assert mu == pytest.approx(2.0) and s**2 == pytest.approx(1.0)

    def test_precision_pull(self):
        mu, s = gpoe_aggregate(ExpertOutputs(np.array([0.0, 4.0]), np.array([1.0, 1 / 3])),
                               [0.5, 0.5])
        assert s**2 == pytest.approx(0.5, rel=1e-14)
        assert mu == pytest.approx(3.0, rel=1e-14)

    def test_identical_experts(self):
        mu, s = gpoe_aggregate(ExpertOutputs(np.full(4, 2.5), np.full(4, 0.3)), moe_weights(4))
        assert mu == pytest.approx(2.5) and s**2 == pytest.approx(0.3)

    def test_single_expert(self):
        mu, s = gpoe_aggregate(ExpertOutputs(np.array([7.0]), np.array([0.04])), [1.0])
        assert (mu, s) == (7.0, pytest.approx(0.2))

    def test_zero_variance_expert(self):
        out = ExpertOutputs(np.array([1.0, 5.0, 9.0]), np.array([0.2, 0.0, 0.0]))
        assert gpoe_aggregate(out, moe_weights(3)) == (5.0, 0.0)

    def test_needs_variances(self):
        with pytest.raises(ValueError):
            gpoe_aggregate(ExpertOutputs(np.array([1.0])), [1.0])

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            ExpertOutputs(np.array([1.0]), np.array([-1e-3]))


class TestCoaoeMean:
    # Pb = [0, 1] so theta = means * e2
    P, b = np.eye(2), np.array([0.0, 1.0])

    def test_argmin_theta(self):
        w = coaoe_mean_weights(ExpertOutputs(np.array([3.0, 1.0, 2.0])), self.P, self.b, [0.0, 1.0])
        assert np.array_equal(w, [0, 1, 0])

    def test_sign_of_error_flips_choice(self):
        w = coaoe_mean_weights(ExpertOutputs(np.array([3.0, 1.0, 2.0])), self.P, self.b, [0.0, -1.0])
        assert np.array_equal(w, [1, 0, 0])

    def test_ties_take_lowest_index(self):
        w = coaoe_mean_weights(ExpertOutputs(np.array([1.0, 1.0, 2.0])), self.P, self.b, [0.0, 1.0])
        assert np.array_equal(w, [1, 0, 0])

    def test_zero_error(self):
        w = coaoe_mean_weights(ExpertOutputs(np.array([4.0, 1.0, 2.0])), self.P, self.b, [0.0, 0.0])
        assert np.array_equal(w, [1, 0, 0])

    def test_theta(self):
        th = coaoe_theta(ExpertOutputs(np.array([1.0, 2.0])), np.array([0.5, 2.0]), [2.0, 1.0])
        assert np.array_equal(th, [3.0, 6.0])

    @settings(max_examples=100)
    @given(hnp.arrays(float, st.integers(1, 8), elements=finite),
           hnp.arrays(float, 2, elements=finite), st.integers(0, 10_000))
    def test_vertex_optimal_over_simplex(self, means, e, seed):
        P = np.array([[1.25005, 1e-4], [1e-4, 5.001e-5]])
        out = ExpertOutputs(means)
        w_star = coaoe_mean_weights(out, P, self.b, e)
        assert np.array_equal(np.sort(w_star), vertex(len(means) - 1, len(means)))
        theta = coaoe_theta(out, P @ self.b, e)
        W = random_simplex(np.random.default_rng(seed), len(means), 200)
        assert np.all(theta @ w_star <= W @ theta + 1e-12 * (1 + np.abs(theta).sum()))

    def test_lyapunov_optimality_monte_carlo(self, paper_cl, rng):
        cl = paper_cl
        for _ in range(100):
            e = rng.normal(size=2) * [0.1, 10.0]
            out = ExpertOutputs(rng.normal(10.0, 1.0, 4))
            T = rng.normal(10.0, 1.0)
            w_star = coaoe_mean_weights(out, cl.P, cl.b, e)
            v_star = vdot_value(e, cl.P, cl.Q, cl.B_in, T, aggregate_mean(out, w_star))
            W = random_simplex(rng, 4, 100)
            v = [vdot_value(e, cl.P, cl.Q, cl.B_in, T, float(w @ out.means)) for w in W]
            assert v_star <= min(v) + 1e-12 * max(1.0, abs(v_star))

    def test_uses_means_only(self, paper_bank):
        x = np.array([0.3, 0.5])
        with mock.patch.object(GPModel, "posterior_var", side_effect=AssertionError("variance")):
            out = paper_bank.outputs(x)
            coaoe_mean_weights(out, np.eye(2), np.array([0.0, 1.0]), [0.1, 0.2])
        assert out.variances is None and out.etas is None


class TestCoaoeEta:
    def test_rule(self):
        w = coaoe_eta_weights(ExpertOutputs(np.zeros(3), etas=np.array([0.5, 0.2, 0.9])))
        assert np.array_equal(w, [0, 1, 0])

    def test_ties(self):
        assert np.array_equal(coaoe_eta_weights(ExpertOutputs(np.zeros(3), etas=np.ones(3))),
                              [1, 0, 0])

    def test_needs_etas(self):
        with pytest.raises(ValueError):
            coaoe_eta_weights(ExpertOutputs(np.zeros(2)))

    def test_brute_force(self, rng):
        for _ in range(50):
            etas = rng.uniform(0.1, 5.0, 5)
            w = coaoe_eta_weights(ExpertOutputs(np.zeros(5), etas=etas))
            W = random_simplex(rng, 5, 1000)
            assert w @ etas <= (W @ etas).min() + 1e-12
            assert w @ etas == etas.min()


class TestVdot:
    P, Q = np.array([[2.0, 0.5], [0.5, 1.0]]), np.eye(2)
    B_in = np.array([0.0, 10.0])

    def test_zero_error(self):
        assert vdot_value([0.0, 0.0], self.P, self.Q, self.B_in, 3.0, 7.0) == 0.0

    def test_exact_prediction(self):
        assert vdot_value([1.0, 2.0], self.P, self.Q, self.B_in, 3.0, 3.0) == -5.0

    def test_hand_value(self):
        # -5 + 2 * (e^T P B_in) * (T_hat - T) = -5 + 2 * 25 * 1
        assert vdot_value([1.0, 2.0], self.P, self.Q, self.B_in, 3.0, 4.0) == pytest.approx(45.0)


class TestBounds:
    def test_identity_case(self):
        assert ultimate_bound(np.eye(2), np.eye(2), 8e-5, 3.0) == pytest.approx(2 * 3.0 / 8e-5)

    @pytest.mark.parametrize("c", [0.1, 2.0, 40.0])
    def test_linear_in_eta(self, paper_cl, c):
        base = ultimate_bound(paper_cl.P, paper_cl.Q, 8e-5, 1.0)
        assert ultimate_bound(paper_cl.P, paper_cl.Q, 8e-5, c) == pytest.approx(c * base)

    def test_bound_exceeds_ball(self, paper_cl):
        # the conditioning factor only enlarges the radius
        assert ultimate_bound(paper_cl.P, paper_cl.Q, 8e-5, 1.0) >= ball_radius(
            paper_cl.P, paper_cl.Q, 8e-5, 1.0)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            ultimate_bound(np.diag([1.0, -1.0]), np.eye(2), 1.0, 1.0)


def test_error_transport(paper_bank, rng):
    """|T - h^T w| <= sum w_i |T - mu_i| <= sum w_i eta_i where each expert bound holds."""
    xm = np.column_stack([rng.uniform(-math.pi, math.pi, 300), rng.uniform(-1, 1, 300)])
    T = true_torque_grid(xm)
    mu = paper_bank.means(xm)
    eta = paper_bank.etas(xm)
    W = random_simplex(rng, paper_bank.n, 300)
    agg_err = np.abs(T - np.einsum("ij,ji->i", W, mu))
    mid = np.einsum("ij,ji->i", W, np.abs(T - mu))
    held = np.all(np.abs(T - mu) <= eta, axis=0)
    assert held.mean() > 0.99
    assert np.all(agg_err <= mid + 1e-12)
    assert np.all(mid[held] <= np.einsum("ij,ji->i", W, eta)[held] + 1e-12)


def test_weights_along_trajectory_are_valid(paper_cfg, paper_bank, paper_cl, rng):
    xm = map_states(rng.uniform(0, 500, 50), rng.uniform(-100, 100, 50), paper_cfg.mapping)
    for x in xm:
        e = rng.normal(size=2)
        out = paper_bank.outputs(x, need_var=True, need_eta=True)
        for w in (moe_weights(4), coaoe_mean_weights(out, paper_cl.P, paper_cl.b, e),
                  coaoe_eta_weights(out)):
            check_weights(w, 4, atol=0.0)
