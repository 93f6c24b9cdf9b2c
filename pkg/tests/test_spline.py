"""Spline basis construction and evaluation tests.

The quadrature oracle here is independent of the builder: a much finer
composite Gauss-Legendre rule assembled in the test itself.  The evaluation
oracle is a hand-written Cox-de Boor recursion.
"""

import numpy as np
import pytest

from tensorfen.spline import (
    basis_dimension,
    basis_from_samples,
    build_basis,
    eval_basis,
    gram_matrices,
)


def fine_quadrature(knots, nodes_per_span=20):
    """Composite Gauss-Legendre rule, far beyond exactness requirements."""
    breaks = np.unique(np.clip(knots, 0.0, 1.0))
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_span)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        xs.append(0.5 * (a + b) + half * gx)
        ws.append(half * gw)
    return np.concatenate(xs), np.concatenate(ws)


def de_boor(knots, degree, j, x):
    """Cox-de Boor recursion for a single B-spline basis function."""
    n = len(knots) - degree - 1
    if degree == 0:
        if knots[j] <= x < knots[j + 1]:
            return 1.0
        # closed right end of the overall interval
        if x == knots[-1] and knots[j] < knots[j + 1] == knots[-1]:
            return 1.0
        return 0.0
    left = 0.0
    if knots[j + degree] > knots[j]:
        left = (x - knots[j]) / (knots[j + degree] - knots[j]) * de_boor(
            knots, degree - 1, j, x
        )
    right = 0.0
    if j + 1 < n + degree and knots[j + degree + 1] > knots[j + 1]:
        right = (knots[j + degree + 1] - x) / (
            knots[j + degree + 1] - knots[j + 1]
        ) * de_boor(knots, degree - 1, j + 1, x)
    return left + right


@pytest.fixture(scope="module")
def basis600():
    rng = np.random.default_rng(7)
    return build_basis(600, rng.uniform(size=4000))


class TestDimensionRule:
    def test_n600_gives_k4(self):
        # 600**0.2 = 3.594 rounds to 4
        assert basis_dimension(600) == 4

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            basis_dimension(31)

    def test_n32_gives_k2(self):
        assert basis_dimension(32) == 2


class TestConstruction:
    def test_orthonormal_by_independent_quadrature(self, basis600):
        x, w = fine_quadrature(basis600.knots)
        vals = basis600.design_matrix(x)
        gram = (vals * w[:, None]).T @ vals
        assert np.max(np.abs(gram - np.eye(basis600.k))) <= 1e-10

    def test_centered_by_independent_quadrature(self, basis600):
        x, w = fine_quadrature(basis600.knots)
        integral = basis600.design_matrix(x).T @ w
        assert np.max(np.abs(integral)) <= 1e-10

    def test_curvature_diagonal_sorted_with_zero_first(self, basis600):
        x, w = fine_quadrature(basis600.knots)
        h = 1e-5
        # second derivative by central differences on the quadrature nodes
        xs = np.clip(x, 2 * h, 1 - 2 * h)
        d2 = (
            basis600.design_matrix(xs + h)
            - 2 * basis600.design_matrix(xs)
            + basis600.design_matrix(xs - h)
        ) / h**2
        omega_fd = (d2 * w[:, None]).T @ d2
        assert np.all(np.diff(basis600.omega) >= -1e-10)
        assert abs(basis600.omega[0]) <= 1e-8
        off = omega_fd - np.diag(np.diag(omega_fd))
        assert np.max(np.abs(off)) <= 1e-2 * max(1.0, np.max(omega_fd))
        np.testing.assert_allclose(
            np.diag(omega_fd), basis600.omega, rtol=1e-4, atol=1e-3
        )

    def test_phi1_is_affine(self, basis600):
        xs = np.linspace(0, 1, 101)
        phi1 = basis600.design_matrix(xs)[:, 0]
        second_diff = phi1[2:] - 2 * phi1[1:-1] + phi1[:-2]
        assert np.max(np.abs(second_diff)) <= 1e-10
        # ||phi_1''||^2 vanishes, so its curvature weight is omega[0] ~ 0
        assert basis600.omega[0] <= 1e-8

    def test_r_matrix(self, basis600):
        expected = np.diag(basis600.omega)
        expected[0, 0] += basis600.delta_prime * basis600.norm_phi1_sq
        np.testing.assert_allclose(basis600.r_matrix, expected)
        # phi_1 is a unit-norm basis function
        assert abs(basis600.norm_phi1_sq - 1.0) <= 1e-10

    @pytest.mark.parametrize("k", range(2, 9))
    def test_property_suite_across_dimensions(self, k):
        rng = np.random.default_rng(100 + k)
        for rep in range(3):
            basis = basis_from_samples(rng.uniform(size=800), k)
            x, w = fine_quadrature(basis.knots)
            vals = basis.design_matrix(x)
            gram = (vals * w[:, None]).T @ vals
            assert np.max(np.abs(gram - np.eye(k))) <= 1e-8
            assert np.max(np.abs(vals.T @ w)) <= 1e-8
            assert abs(basis.omega[0]) <= 1e-8

    def test_interior_knots_at_equally_spaced_quantiles(self):
        rng = np.random.default_rng(21)
        samples = rng.beta(2.0, 5.0, size=2000)  # asymmetric pool
        basis = basis_from_samples(samples, 6)  # raw dim 7, 3 interior knots
        interior = basis.knots[basis.order:-basis.order]
        np.testing.assert_allclose(
            interior, np.quantile(samples, [0.25, 0.5, 0.75])
        )

    def test_duplicate_knots_error(self):
        # all samples at the right boundary: quantiles collapse onto 1.0 and
        # the jittered knots re-collapse when clipped back inside (0, 1)
        with pytest.raises(ValueError):
            basis_from_samples(np.full(100, 1.0), 6)

    def test_duplicate_knots_jitter_recovers(self):
        # heavy ties away from the boundary: one jitter pass suffices
        samples = np.r_[np.full(200, 0.5), [0.1, 0.9]]
        basis = basis_from_samples(samples, 6)
        assert basis.k == 6


class TestEvalBasis:
    def test_matches_de_boor_oracle(self, basis600):
        rng = np.random.default_rng(3)
        degree = basis600.order - 1
        m = len(basis600.knots) - basis600.order
        for x in rng.uniform(0.01, 0.99, size=10):
            psi = np.array(
                [de_boor(basis600.knots, degree, j, float(x)) for j in range(m)]
            )
            np.testing.assert_allclose(
                eval_basis(basis600, x), basis600.transform @ psi, atol=1e-12
            )

    def test_riemann_centering(self, basis600):
        xs = np.linspace(0, 1, 20001)
        vals = basis600.design_matrix(xs)
        approx = np.trapezoid(vals, xs, axis=0)
        assert np.max(np.abs(approx)) <= 1e-6

    def test_domain_error(self, basis600):
        with pytest.raises(ValueError):
            eval_basis(basis600, 1.5)
        # tolerated slack just outside the interval is clamped
        np.testing.assert_allclose(
            eval_basis(basis600, 1.0 + 1e-13), eval_basis(basis600, 1.0)
        )

    def test_continuity(self, basis600):
        xs = np.linspace(0, 1, 2001)
        vals = basis600.design_matrix(xs)
        assert np.max(np.abs(np.diff(vals, axis=0))) < 0.1


class TestGramMatrices:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.basis = basis_from_samples(rng.uniform(size=500), 6)

    def test_gram_symmetric_positive_definite(self):
        gram, _, _ = gram_matrices(self.basis.knots, self.basis.order)
        np.testing.assert_allclose(gram, gram.T)
        assert np.linalg.eigvalsh(gram)[0] > 0

    def test_single_bspline_integral_identity(self):
        # int B_j = (t_{j+order} - t_j) / order
        _, d, _ = gram_matrices(self.basis.knots, self.basis.order)
        knots, order = self.basis.knots, self.basis.order
        expected = (knots[order:] - knots[:-order]) / order
        np.testing.assert_allclose(d, expected, atol=1e-14)

    def test_curvature_gram_psd_with_affine_nullspace(self):
        gram, _, omega0 = gram_matrices(self.basis.knots, self.basis.order)
        eigvals = np.linalg.eigvalsh(omega0)
        assert eigvals[0] >= -1e-9
        # constants and linears are splines with zero curvature: 2 null modes
        assert np.sum(eigvals < 1e-8 * max(1, eigvals[-1])) == 2

    def test_quadrature_exactness_under_order_doubling(self):
        from tensorfen.spline import _span_quadrature
        from scipy.interpolate import BSpline

        knots, order = self.basis.knots, self.basis.order
        m = len(knots) - order
        spl = BSpline(knots, np.eye(m), order - 1, extrapolate=False)
        grams = []
        for nodes in (order, 2 * order):
            x, w = _span_quadrature(knots, nodes)
            vals = spl(x)
            grams.append((vals * w[:, None]).T @ vals)
        assert np.max(np.abs(grams[0] - grams[1])) <= 1e-12
