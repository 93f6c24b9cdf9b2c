"""Posterior summarization: inclusion probabilities, ROC-based cutoff,
thresholded point estimates, and evaluation metrics.

An entry's inclusion probability is the posterior mean of the smoothed
activity indicator.  The active set is chosen by the cutoff minimizing the
distance between the estimated ROC point (TPR-hat, TNR-hat) and the ideal
corner (1, 1), where the unknown true activity indicator is approximated by
the inclusion probabilities themselves.  Point estimates average the
indicator-weighted coefficients and are zeroed outside the active set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import TensorShape
from .sampler import PosteriorSamples
from .spline import SplineBasis


@dataclass
class FitResult:
    """Thresholded posterior point estimate of the additive model."""

    shape: TensorShape
    inclusion_prob: np.ndarray  # (p,)
    cutoff: float
    degenerate_cutoff: bool
    active: np.ndarray          # (p,) bool
    beta_hat: np.ndarray        # (p, K)
    mu_hat: float
    basis: SplineBasis
    eps0: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predicted responses for an (N, p) covariate matrix."""
        x = np.asarray(x, dtype=float)
        phi = self.basis.design_matrix(x)
        flat = phi.reshape(x.shape[0], -1)
        return self.mu_hat + flat @ self.beta_hat.ravel()

    def component(self, t: int):
        """Estimated component function of vectorized entry ``t`` (0-based)."""
        coef = self.beta_hat[t]

        def f(x):
            vals = self.basis.design_matrix(np.asarray(x, dtype=float))
            return vals @ coef

        return f

    def magnitude_map(self) -> np.ndarray:
        """L2 norms of the estimated components arranged on the 2-way lattice.

        Uses the orthonormal-coefficient identity ``||phi' b||_{L2} = ||b||_2``.
        """
        norms = np.linalg.norm(self.beta_hat, axis=1)
        if self.shape.ndim != 2:
            raise ValueError("magnitude maps are defined for 2-way shapes")
        return norms.reshape(self.shape.dims, order="F")


def _indicator_draws(samples: PosteriorSamples, eps0: float) -> np.ndarray:
    """Smoothed indicator values per (draw, entry)."""
    sqn = np.einsum("mpk,mpk->mp", samples.alpha, samples.alpha)
    return 0.5 + np.arctan((sqn - samples.lam[:, None]) / eps0) / np.pi


def inclusion_probability(samples: PosteriorSamples, eps0: float | None = None
                          ) -> np.ndarray:
    """Posterior mean of the smoothed indicator per tensor entry."""
    eps0 = samples.eps0 if eps0 is None else eps0
    return _indicator_draws(samples, eps0).mean(axis=0)


def roc_rates(prob: np.ndarray, cutoff: float):
    """Estimated (TPR, TNR) at a cutoff, with the inclusion probabilities
    standing in for the unknown true activity indicator."""
    chosen = prob > cutoff
    p_sum = prob.sum()
    q_sum = (1.0 - prob).sum()
    tpr = float(prob[chosen].sum() / p_sum) if p_sum > 0 else float("nan")
    tnr = float((1.0 - prob)[~chosen].sum() / q_sum) if q_sum > 0 else float("nan")
    return tpr, tnr


def select_cutoff(prob: np.ndarray):
    """Cutoff minimizing the ROC distance to the ideal corner (1, 1).

    Candidates are the midpoints between consecutive sorted unique values of
    the inclusion probabilities, plus {0, 1} sentinels.  A constant
    probability field is degenerate; returns (0.5, True) then.
    """
    prob = np.asarray(prob, dtype=float).ravel()
    unique = np.unique(prob)
    if unique.size < 2:
        return 0.5, True
    candidates = np.concatenate(([0.0], (unique[:-1] + unique[1:]) / 2.0, [1.0]))
    best = None
    for cand in candidates:
        tpr, tnr = roc_rates(prob, cand)
        dist = math.hypot(1.0 - tpr, 1.0 - tnr)
        if best is None or dist < best[0]:
            best = (dist, float(cand))
    return best[1], False


def point_estimates(samples: PosteriorSamples, cutoff: float,
                    basis: SplineBasis, eps0: float | None = None,
                    degenerate_cutoff: bool = False) -> FitResult:
    """Indicator-weighted posterior means, zeroed outside the active set."""
    eps0 = samples.eps0 if eps0 is None else eps0
    t_draws = _indicator_draws(samples, eps0)
    beta = np.einsum("mpk,mp->pk", samples.alpha, t_draws) / len(samples)
    prob = t_draws.mean(axis=0)
    active = prob > cutoff
    beta[~active] = 0.0
    return FitResult(
        shape=samples.shape,
        inclusion_prob=prob,
        cutoff=cutoff,
        degenerate_cutoff=degenerate_cutoff,
        active=active,
        beta_hat=beta,
        mu_hat=float(samples.mu.mean()),
        basis=basis,
        eps0=eps0,
    )


def summarize(samples: PosteriorSamples, basis: SplineBasis) -> FitResult:
    """Inclusion probabilities -> ROC cutoff -> thresholded point estimates."""
    prob = inclusion_probability(samples)
    cutoff, degenerate = select_cutoff(prob)
    return point_estimates(samples, cutoff, basis, degenerate_cutoff=degenerate)


# ---------------------------------------------------------------------------
# evaluation metrics


def _quadrature_on_unit_interval(basis: SplineBasis, nodes_per_span: int = 16):
    breaks = np.unique(np.clip(basis.knots, 0.0, 1.0))
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_span)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        xs.append(0.5 * (a + b) + half * gx)
        ws.append(half * gw)
    return np.concatenate(xs), np.concatenate(ws)


def metrics(truth, est: FitResult, test_x: np.ndarray | None = None,
            test_y: np.ndarray | None = None) -> dict:
    """Estimation and selection metrics against a known truth.

    ``truth`` provides ``active_flat`` (bool per vectorized entry) and
    ``component(t)`` callables.  Function-space errors integrate on [0, 1] by
    per-knot-span Gauss-Legendre quadrature.  The relative prediction error
    needs the held-out ``test_x``/``test_y``.
    """
    p = est.beta_hat.shape[0]
    xs, ws = _quadrature_on_unit_interval(est.basis)
    phi_vals = est.basis.design_matrix(xs)  # (nq, K)
    truth_active = np.asarray(truth.active_flat, dtype=bool)

    sq_err = np.zeros(p)
    truth_norm_sq = np.zeros(p)
    for t in range(p):
        f_true = truth.component(t)(xs) if truth_active[t] else np.zeros_like(xs)
        f_hat = phi_vals @ est.beta_hat[t]
        sq_err[t] = float(np.sum(ws * (f_true - f_hat) ** 2))
        truth_norm_sq[t] = float(np.sum(ws * f_true**2))

    mse = float(sq_err.mean())
    if truth_active.any():
        rmse = float(np.mean(sq_err[truth_active] / truth_norm_sq[truth_active]))
        tpr = float((est.active & truth_active).sum() / truth_active.sum())
    else:
        rmse = float("nan")
        tpr = float("nan")
    inactive = ~truth_active
    tnr = float((~est.active & inactive).sum() / inactive.sum()) if inactive.any() else float("nan")

    out = {"mse": mse, "rmse": rmse, "tpr": tpr, "tnr": tnr}
    if test_x is not None and test_y is not None:
        pred = est.predict(np.asarray(test_x, dtype=float))
        test_y = np.asarray(test_y, dtype=float).ravel()
        out["rpe"] = float(np.sum((pred - test_y) ** 2) / np.sum(test_y**2))
    return out
