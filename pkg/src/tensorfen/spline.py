"""Centered, orthonormal spline bases with diagonal curvature matrix.

The K-dimensional basis ``phi`` is derived from a raw (K+1)-dimensional
B-spline basis ``psi`` on [0, 1] in three steps:

1. orthonormalize: ``psi_t = Gamma1^{-1/2} V' psi`` from the eigendecomposition
   of the Gram matrix ``W = int psi psi'``;
2. center: project onto the orthogonal complement of ``d = int psi_t``,
   dropping one dimension;
3. diagonalize curvature: rotate by the eigenvectors of the centered basis's
   second-derivative Gram, sorted by ascending eigenvalue.

The result satisfies ``int phi = 0``, ``int phi phi' = I_K``, and
``Omega = int phi'' phi''^T = diag(omega)`` with ``omega_1 = 0``; the first
basis function is affine.  The roughness matrix is
``R = Omega + delta' * ||phi_1||^2 e_1 e_1'``.

Knots sit at equally spaced quantiles of the pooled covariate samples; the
basis dimension follows the sample-size rule ``K = round(n^(1/5))``
(round half to even).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import BSpline

_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class SplineBasis:
    """Centered orthonormal basis ``phi = transform @ psi``.

    Attributes
    ----------
    order : spline order of the raw B-splines (4 = cubic unless K + 1 < 4,
        in which case the order is reduced to the raw dimension).
    knots : full clamped knot vector on [0, 1].
    transform : (K, K+1) matrix mapping raw B-splines to ``phi``.
    omega : length-K curvature weights (ascending, ``omega[0] == 0``).
    r_matrix : K x K roughness matrix ``Omega + delta' ||phi_1||^2 e1 e1'``.
    norm_phi1_sq : squared L2 norm of the first (affine) basis function.
    """

    order: int
    knots: np.ndarray
    transform: np.ndarray
    omega: np.ndarray
    r_matrix: np.ndarray
    norm_phi1_sq: float
    delta_prime: float

    @property
    def k(self) -> int:
        return self.transform.shape[0]

    @property
    def degree(self) -> int:
        return self.order - 1

    @cached_property
    def _raw(self) -> BSpline:
        m = len(self.knots) - self.order
        return BSpline(self.knots, np.eye(m), self.degree, extrapolate=False)

    def design_matrix(self, x: np.ndarray) -> np.ndarray:
        """Evaluate ``phi`` at an array of points, returning shape x.shape + (K,)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if flat.size and (flat.min() < -_DOMAIN_SLACK or flat.max() > 1 + _DOMAIN_SLACK):
            raise ValueError("covariate values must lie in [0, 1]")
        flat = np.clip(flat, 0.0, 1.0)
        raw = self._raw(flat)
        return (raw @ self.transform.T).reshape(x.shape + (self.k,))


def round_half_even(x: float) -> int:
    """Round to nearest integer, halves to even (the K rule's tie-break)."""
    return int(round(x))


def basis_dimension(n_train: int) -> int:
    """Sample-size rule for the basis dimension, ``round(n^(1/5))``."""
    if n_train < 32:
        raise ValueError("need at least 32 training samples (so K >= 2)")
    return round_half_even(n_train ** 0.2)


def _span_quadrature(knots: np.ndarray, nodes_per_span: int):
    """Gauss-Legendre nodes/weights over each distinct knot span in [0, 1]."""
    breaks = np.unique(knots)
    breaks = breaks[(breaks >= 0.0) & (breaks <= 1.0)]
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_span)
    points, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        points.append(0.5 * (a + b) + half * gx)
        weights.append(half * gw)
    return np.concatenate(points), np.concatenate(weights)


def gram_matrices(knots: np.ndarray, order: int):
    """Exact integrals of the raw B-spline basis over [0, 1].

    Returns ``(W, d, Omega0)`` where ``W = int psi psi'``, ``d = int psi``,
    and ``Omega0 = int psi'' psi''^T``.  Gauss-Legendre with ``order`` nodes
    per knot span integrates products of two splines of degree ``order - 1``
    (polynomial degree ``2*order - 2 <= 2*order - 1``) exactly.
    """
    degree = order - 1
    m = len(knots) - order
    spl = BSpline(knots, np.eye(m), degree, extrapolate=False)
    x, w = _span_quadrature(knots, order)
    vals = spl(x)
    gram = (vals * w[:, None]).T @ vals
    d = vals.T @ w
    if degree >= 2:
        d2 = spl.derivative(2)(x)
        omega0 = (d2 * w[:, None]).T @ d2
    else:
        omega0 = np.zeros((m, m))
    return gram, d, omega0


def _quantile_knots(samples: np.ndarray, n_interior: int) -> np.ndarray:
    if n_interior == 0:
        return np.empty(0)
    probs = np.arange(1, n_interior + 1) / (n_interior + 1)
    knots = np.quantile(samples, probs)  # type-7 (linear interpolation)
    if np.all(np.diff(knots) > 0) and knots[0] > 0 and knots[-1] < 1:
        return knots
    # Quantiles collapsed (ties in the sample): jitter once, then give up.
    jitter = 1e-9 * np.arange(1, n_interior + 1)
    knots = np.clip(knots + jitter, 1e-9, 1 - 1e-9)
    if np.all(np.diff(knots) > 0):
        return knots
    raise ValueError("duplicate interior knots after quantile collapse")


def _fix_column_signs(u: np.ndarray) -> np.ndarray:
    signs = np.sign(u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def basis_from_samples(
    samples: np.ndarray, k: int, delta_prime: float = 1e-4
) -> SplineBasis:
    """Build the centered orthonormal basis of dimension ``k`` directly.

    ``samples`` supplies the pooled covariate values whose equally spaced
    quantiles place the interior knots.
    """
    if k < 2:
        raise ValueError(f"basis dimension must be >= 2, got {k}")
    if delta_prime <= 0:
        raise ValueError("delta_prime must be positive")
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size and (samples.min() < -_DOMAIN_SLACK or samples.max() > 1 + _DOMAIN_SLACK):
        raise ValueError("covariate samples must lie in [0, 1]")
    # Raw space has dimension m = K + 1.  A clamped B-spline basis of order q
    # with n_int interior knots has dimension n_int + q, so n_int = m - q.
    # Order is 4 (cubic) whenever the raw space is big enough; for K = 2 the
    # raw dimension is 3 and the order drops to 3.
    m = k + 1
    order = min(4, m)
    n_interior = m - order
    interior = _quantile_knots(samples, n_interior)
    knots = np.r_[np.zeros(order), interior, np.ones(order)]

    gram, d_raw, omega0_raw = gram_matrices(knots, order)

    # Step 1: orthonormalize the raw basis.
    g_eigvals, g_eigvecs = np.linalg.eigh(gram)
    if g_eigvals[0] <= 0:
        raise ValueError("raw B-spline Gram matrix is numerically singular")
    a1 = (g_eigvecs / np.sqrt(g_eigvals)).T  # Gamma1^{-1/2} V'

    # Step 2: center by projecting out the direction of int psi_t.
    d = a1 @ d_raw
    q_full, _ = np.linalg.qr(d.reshape(-1, 1), mode="complete")
    t_mat = q_full[:, 1:]  # (m, K), columns orthonormal to d
    a2 = t_mat.T @ a1

    # Step 3: diagonalize the curvature Gram of the centered basis.
    omega0 = a2 @ omega0_raw @ a2.T
    c_eigvals, c_eigvecs = np.linalg.eigh(omega0)
    c_eigvecs = _fix_column_signs(c_eigvecs)
    transform = c_eigvecs.T @ a2
    omega = np.clip(c_eigvals, 0.0, None)

    norm_phi1_sq = float(transform[0] @ gram @ transform[0])
    r_matrix = np.diag(omega)
    r_matrix[0, 0] += delta_prime * norm_phi1_sq

    return SplineBasis(
        order=order,
        knots=knots,
        transform=transform,
        omega=omega,
        r_matrix=r_matrix,
        norm_phi1_sq=norm_phi1_sq,
        delta_prime=delta_prime,
    )


def build_basis(
    n_train: int, samples: np.ndarray, delta_prime: float = 1e-4
) -> SplineBasis:
    """Build the basis with ``K = round(n_train^(1/5))`` and quantile knots."""
    return basis_from_samples(samples, basis_dimension(n_train), delta_prime)


def eval_basis(basis: SplineBasis, x: float) -> np.ndarray:
    """Evaluate ``phi(x)`` at a single point in [0, 1]."""
    return basis.design_matrix(np.asarray(float(x))).reshape(basis.k)
