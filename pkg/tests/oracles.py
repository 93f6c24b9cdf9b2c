"""Shared independent oracles for the test suite.

These deliberately use dense linear algebra and brute-force formulas, not the
library's own fast paths.
"""

import numpy as np

from tensorfen.grid import laplacian


def gaussian_alpha_posterior(data, graph, basis, hp, *, sigma2, delta, mu):
    """Closed-form posterior of the coefficient block when the indicator is
    frozen at one and r = 1 (pure Gaussian prior).

    Returns (mean, covariance) over the C-order flattening of (p, K).
    """
    p, k = data.n_entries, data.k
    design = data.phi_flat
    lap = laplacian(graph).matrix
    precision = design.T @ design / sigma2
    precision = precision + (2.0 * delta / sigma2) * np.kron(np.eye(p), basis.r_matrix)
    precision = precision + (hp.r / (sigma2 * hp.rho_alpha)) * np.kron(lap, np.eye(k))
    cov = np.linalg.inv(precision)
    mean = cov @ (design.T @ (data.y - mu)) / sigma2
    return mean, cov


def batch_means_se(draws, n_batches=50):
    """Monte-Carlo standard error of the chain mean via batch means.

    ``draws`` is (M,) or (M, d); autocorrelation is absorbed by batching.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float).T).T
    m = draws.shape[0]
    b = m // n_batches
    means = draws[: b * n_batches].reshape(n_batches, b, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)
