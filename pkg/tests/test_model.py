"""Model-core tests: surrogates, densities, gradients, invariance."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorfen.grid import TensorShape, build_grid_graph
from tensorfen.model import (
    Dataset,
    HyperParams,
    ModelState,
    fusion_terms,
    grad_mu_alpha,
    log_likelihood,
    log_posterior,
    log_prior_alpha,
    log_prior_rest,
    mu_alpha_value_grad,
    smooth_fusion,
    smooth_indicator,
)
from tensorfen.spline import SplineBasis, basis_from_samples


def make_problem(dims=(3, 3), k=3, n=25, seed=0, r=0.6):
    rng = np.random.default_rng(seed)
    shape = TensorShape(dims)
    graph = build_grid_graph(shape)
    basis = basis_from_samples(rng.uniform(size=600), k)
    x = rng.uniform(size=(n, shape.size))
    y = rng.standard_normal(n)
    data = Dataset.build(shape, x, y, basis)
    hp = HyperParams.defaults(shape, k, r=r, rho_alpha=0.05, eps0=0.3, lambda_u=2.0)
    state = ModelState(
        mu=rng.standard_normal() * 0.3,
        alpha=rng.standard_normal((shape.size, k)) * 0.5,
        sigma2=1.3,
        delta=2.0,
        lam=0.8,
    )
    return data, graph, basis, hp, state, rng


class TestSmoothIndicator:
    def test_at_threshold(self):
        a = np.array([1.0, 0.0])
        assert smooth_indicator(a, 1.0, 0.5) == pytest.approx(0.5)

    def test_one_halfwidth_above(self):
        # ||a||^2 = lam + eps0  ->  1/2 + arctan(1)/pi = 3/4
        a = np.array([math.sqrt(1.5)])
        assert smooth_indicator(a, 1.0, 0.5) == pytest.approx(0.75)

    def test_sharpening_limit(self):
        a = np.array([2.0])  # ||a||^2 = 4 > lam = 1
        vals = [smooth_indicator(a, 1.0, e) for e in (1.0, 0.1, 0.01, 1e-4)]
        assert all(np.diff(vals) > 0)
        assert vals[-1] > 1 - 1e-4

    @given(
        st.floats(-5, 5), st.floats(0.01, 5), st.floats(0.01, 3)
    )
    @settings(max_examples=50, deadline=None)
    def test_always_strictly_inside_unit_interval(self, a, lam, eps0):
        v = smooth_indicator(np.array([a]), lam, eps0)
        assert 0.0 < v < 1.0


class TestSmoothFusion:
    def test_identical_neighbors_floor(self):
        graph = build_grid_graph((2, 2))  # 4 edges
        alpha = np.tile([1.0, -2.0], (4, 1))
        assert smooth_fusion(alpha, graph, 1e-6) == pytest.approx(4e-3)

    def test_single_edge(self):
        graph = build_grid_graph((2,))
        alpha = np.array([[3.0], [0.0]])
        assert smooth_fusion(alpha, graph, 1e-6) == pytest.approx(
            math.sqrt(9 + 1e-6)
        )

    def test_upper_bounds_exact_sum(self):
        rng = np.random.default_rng(4)
        graph = build_grid_graph((3, 4))
        alpha = rng.standard_normal((12, 3))
        eps1 = 1e-6
        diff = alpha[graph.edge_tail] - alpha[graph.edge_head]
        exact = np.sum(np.linalg.norm(diff, axis=1))
        smoothed = smooth_fusion(alpha, graph, eps1)
        assert exact <= smoothed <= exact + graph.edge_count * math.sqrt(eps1)
        # each edge term is at least sqrt(eps1)
        assert smoothed >= graph.edge_count * math.sqrt(eps1)


class TestLogLikelihood:
    def test_empty_dataset(self):
        data, graph, basis, hp, state, _ = make_problem()
        empty = data.subset(np.zeros(0, dtype=int))
        assert log_likelihood(state, empty, hp) == 0.0

    def test_null_model_closed_form(self):
        data, graph, basis, hp, state, _ = make_problem()
        null = state.replace(mu=0.0, alpha=np.zeros_like(state.alpha), sigma2=1.0)
        expected = -0.5 * np.sum(data.y**2) - 0.5 * data.n * math.log(2 * math.pi)
        assert log_likelihood(null, data, hp) == pytest.approx(expected, rel=1e-12)

    def test_matches_naive_double_loop(self):
        data, graph, basis, hp, state, _ = make_problem(n=7, seed=3)
        total = 0.0
        for n in range(data.n):
            yhat = state.mu
            for t in range(data.n_entries):
                g = float(data.phi[n, t] @ state.alpha[t])
                ind = smooth_indicator(state.alpha[t], state.lam, hp.eps0)
                yhat += g * ind
            total += (
                -0.5 * math.log(2 * math.pi * state.sigma2)
                - (data.y[n] - yhat) ** 2 / (2 * state.sigma2)
            )
        assert log_likelihood(state, data, hp) == pytest.approx(total, rel=1e-12)

    def test_unimodal_in_sigma2(self):
        data, graph, basis, hp, state, _ = make_problem()
        from tensorfen.model import predicted

        resid = data.y - predicted(state, data, hp)
        s2_hat = float(resid @ resid) / data.n
        best = log_likelihood(state.replace(sigma2=s2_hat), data, hp)
        for factor in (0.7, 1.3, 2.0):
            assert log_likelihood(state.replace(sigma2=s2_hat * factor), data, hp) < best


class TestLogPriorAlpha:
    def test_zero_alpha_keeps_only_fusion_floor(self):
        data, graph, basis, hp, state, _ = make_problem(r=0.4)
        zero = state.replace(alpha=np.zeros_like(state.alpha))
        expected = -(1 - hp.r) * graph.edge_count * math.sqrt(hp.eps1) / (
            2 * state.sigma2 * hp.rho_alpha
        )
        assert log_prior_alpha(zero, graph, basis, hp) == pytest.approx(expected)

    def test_pure_quadratic_at_r_one(self):
        data, graph, basis, hp, state, _ = make_problem(r=1.0)
        v1 = log_prior_alpha(state, graph, basis, hp)
        v2 = log_prior_alpha(state.replace(alpha=2 * state.alpha), graph, basis, hp)
        assert v2 == pytest.approx(4 * v1, rel=1e-12)

    def test_matches_naive_edge_loop(self):
        data, graph, basis, hp, state, _ = make_problem(seed=9, r=0.35)
        quad = sum(a @ basis.r_matrix @ a for a in state.alpha)
        sq = sm = 0.0
        for t, h in graph.edges:
            d = state.alpha[t - 1] - state.alpha[h - 1]
            sq += float(d @ d)
            sm += math.sqrt(float(d @ d) + hp.eps1)
        expected = -state.delta * quad / state.sigma2 - (
            hp.r * sq + (1 - hp.r) * sm
        ) / (2 * state.sigma2 * hp.rho_alpha)
        assert log_prior_alpha(state, graph, basis, hp) == pytest.approx(
            expected, rel=1e-12
        )


class TestLogPriorRest:
    def test_lambda_term_default_gig(self):
        data, graph, basis, hp, state, _ = make_problem()
        s0 = state.replace(mu=0.0, sigma2=1.0, delta=1.0)
        for lam in (0.3, 1.0, 4.0):
            got = log_prior_rest(s0.replace(lam=lam), hp)
            base = log_prior_rest(s0.replace(lam=1.0), hp)
            # p = 1, a = b = 0.5: lambda term is -(0.25/lam + 0.25 lam)
            expected = (-(0.25 / lam + 0.25 * lam)) - (-(0.25 + 0.25))
            assert got - base == pytest.approx(expected, rel=1e-12)

    def test_mu_zero_is_mode(self):
        data, graph, basis, hp, state, _ = make_problem()
        center = log_prior_rest(state.replace(mu=0.0), hp)
        assert log_prior_rest(state.replace(mu=0.5), hp) < center
        assert log_prior_rest(state.replace(mu=-0.5), hp) < center

    def test_delta_mode_at_p0_minus_one(self):
        data, graph, basis, hp, state, _ = make_problem()
        hp2 = hp.replace(p0=5.0)
        mode = hp2.p0 - 1.0
        at_mode = log_prior_rest(state.replace(delta=mode), hp2)
        for d in (mode * 0.8, mode * 1.2):
            assert log_prior_rest(state.replace(delta=d), hp2) < at_mode

    def test_invalid_lambda(self):
        data, graph, basis, hp, state, _ = make_problem()
        assert log_prior_rest(state.replace(lam=-1.0), hp) == -np.inf


class TestGradient:
    def test_gaussian_score_at_origin(self):
        data, graph, basis, hp, state, _ = make_problem()
        origin = state.replace(mu=0.0, alpha=np.zeros_like(state.alpha))
        gmu, _ = grad_mu_alpha(origin, data, graph, basis, hp)
        assert gmu == pytest.approx(np.sum(data.y) / origin.sigma2, rel=1e-12)

    def test_fusion_gradient_zero_at_identical_neighbors(self):
        data, graph, basis, hp, state, _ = make_problem(r=0.0)
        flat = np.tile(np.array([0.4, -0.2, 0.1]), (data.n_entries, 1))
        empty = data.subset(np.zeros(0, dtype=int))
        const = state.replace(mu=0.0, alpha=flat, delta=1e-300)
        _, galpha = grad_mu_alpha(const, empty, graph, basis, hp)
        # only the (vanishing) roughness part remains
        assert np.max(np.abs(galpha)) < 1e-200

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_central_finite_differences(self, seed):
        data, graph, basis, hp, state, _ = make_problem(
            dims=(3, 3), k=3, n=25, seed=seed, r=0.5
        )
        gmu, galpha = grad_mu_alpha(state, data, graph, basis, hp)
        h = 1e-5

        def logpost(mu, alpha):
            return log_posterior(
                state.replace(mu=mu, alpha=alpha), data, graph, basis, hp
            )

        fd_mu = (logpost(state.mu + h, state.alpha) - logpost(state.mu - h, state.alpha)) / (2 * h)
        assert abs(gmu - fd_mu) <= 1e-4 * max(1.0, abs(fd_mu))
        flat = state.alpha.ravel()
        for j in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[j] += h
            dn[j] -= h
            fd = (
                logpost(state.mu, up.reshape(state.alpha.shape))
                - logpost(state.mu, dn.reshape(state.alpha.shape))
            ) / (2 * h)
            assert abs(galpha.ravel()[j] - fd) <= 1e-4 * max(1.0, abs(fd))

    def test_value_grad_consistent_with_parts(self):
        data, graph, basis, hp, state, _ = make_problem(seed=5)
        value, gmu, galpha = mu_alpha_value_grad(state, data, graph, basis, hp)
        direct = (
            log_likelihood(state, data, hp)
            + log_prior_alpha(state, graph, basis, hp)
            - state.mu**2 / (2 * hp.sigma2_mu)
        )
        # value drops (mu, alpha)-independent constants only
        const = -0.5 * data.n * math.log(2 * math.pi * state.sigma2)
        assert value == pytest.approx(direct - const, rel=1e-12)


class TestOrthonormalInvariance:
    @pytest.mark.parametrize("seed", range(10))
    def test_log_posterior_invariant(self, seed):
        data, graph, basis, hp, state, rng = make_problem(seed=seed, r=0.45)
        k = basis.k
        q, _ = np.linalg.qr(np.random.default_rng(1000 + seed).standard_normal((k, k)))
        rotated = SplineBasis(
            order=basis.order,
            knots=basis.knots,
            transform=q @ basis.transform,
            omega=basis.omega,  # no longer the curvature diagonal; unused here
            r_matrix=q @ basis.r_matrix @ q.T,
            norm_phi1_sq=basis.norm_phi1_sq,
            delta_prime=basis.delta_prime,
        )
        data_q = Dataset.build(data.shape, data.x, data.y, rotated)
        state_q = state.replace(alpha=state.alpha @ q.T)
        lp = log_posterior(state, data, graph, basis, hp)
        lp_q = log_posterior(state_q, data_q, graph, rotated, hp)
        assert abs(lp - lp_q) <= 1e-8


class TestFusionTerms:
    def test_consistency(self):
        rng = np.random.default_rng(2)
        graph = build_grid_graph((4, 4))
        alpha = rng.standard_normal((16, 2))
        sq, sm = fusion_terms(alpha, graph, 1e-6)
        assert sm == pytest.approx(smooth_fusion(alpha, graph, 1e-6))
        diff = alpha[graph.edge_tail] - alpha[graph.edge_head]
        assert sq == pytest.approx(float(np.sum(diff**2)))
