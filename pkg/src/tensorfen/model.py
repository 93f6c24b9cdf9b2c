"""Hierarchical additive model: smoothed log posterior and its gradient.

The response is Gaussian around an intercept plus one spline component per
tensor entry, where a component contributes only if its coefficient norm
exceeds a latent threshold.  For gradient-based sampling the two
non-differentiable pieces are smoothed:

* the hard indicator ``1{||a_i||^2 > lambda}`` becomes an arctan sigmoid of
  half-width ``eps0``;
* each fused L2 distance ``||a_i - a_i'||`` between lattice neighbors becomes
  ``sqrt(||a_i - a_i'||^2 + eps1)``.

The coefficient prior combines a per-entry roughness penalty ``a' R a``
(weight ``delta``), a squared-distance Laplacian term (weight ``r``), and the
smoothed fused term (weight ``1 - r``), both fusion terms scaled by
``1 / (2 sigma^2 rho_alpha)``.  The prior's intractable normalizing constant
cancels against the joint scale prior by construction, so every density here
is "up to C": valid for all implemented conditionals and MH ratios.

Squared norms use plain float64 reductions; compensated summation would only
matter for basis dimensions far beyond the K <= 8 used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .grid import IndexGraph, TensorShape
from .spline import SplineBasis

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Dataset:
    """Observations with precomputed basis evaluations.

    ``x`` has one row per observation and one column per vectorized tensor
    entry; values lie in [0, 1].  ``phi[n, t, k]`` caches the k-th basis
    function at ``x[n, t]`` so the sampler never re-evaluates splines.
    """

    shape: TensorShape
    x: np.ndarray  # (N, p)
    y: np.ndarray  # (N,)
    phi: np.ndarray  # (N, p, K)

    @classmethod
    def build(cls, shape, x, y, basis: SplineBasis) -> "Dataset":
        if not isinstance(shape, TensorShape):
            shape = TensorShape(tuple(shape))
        x = np.ascontiguousarray(x, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if x.ndim != 2 or x.shape[1] != shape.size:
            raise ValueError(
                f"x must be (N, {shape.size}) for shape {shape.dims}, got {x.shape}"
            )
        if x.shape[0] != y.size:
            raise ValueError("x and y disagree on the number of observations")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        phi = np.ascontiguousarray(basis.design_matrix(x))
        return cls(shape=shape, x=x, y=y, phi=phi)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def n_entries(self) -> int:
        return self.x.shape[1]

    @property
    def k(self) -> int:
        return self.phi.shape[2]

    @cached_property
    def phi_flat(self) -> np.ndarray:
        """(N, p*K) view used for fast design matvecs."""
        return self.phi.reshape(self.n, self.n_entries * self.k)

    def subset(self, idx) -> "Dataset":
        return Dataset(
            shape=self.shape,
            x=self.x[idx],
            y=self.y[idx],
            phi=np.ascontiguousarray(self.phi[idx]),
        )


@dataclass(frozen=True)
class ModelState:
    """One point of the sampled parameter block {mu, alpha, sigma2, delta, lambda}."""

    mu: float
    alpha: np.ndarray  # (p, K)
    sigma2: float
    delta: float
    lam: float

    def validate(self):
        if self.sigma2 <= 0 or self.delta <= 0 or self.lam <= 0:
            raise ValueError("sigma2, delta and lambda must be positive")

    def replace(self, **kw) -> "ModelState":
        return replace(self, **kw)


@dataclass(frozen=True)
class HyperParams:
    """Fixed or tuned scalars of the hierarchical model.

    ``p1`` follows the weak-informativeness rule ``(2 * P1...PD - 1) * K / 2``;
    ``gig_p/gig_a/gig_b`` parameterize the threshold prior
    ``ln p(lambda) ~ (p - 1) ln lambda - (a / lambda + b lambda) / 2``.
    ``tau_*`` are initial proposal step sizes (adapted during burn-in).
    ``delta_prime`` is recorded here for bookkeeping; the authoritative copy
    lives inside the spline basis, whose roughness matrix already includes it.
    """

    r: float
    rho_alpha: float
    p0: float
    p1: float
    eps0: float
    lambda_u: float
    delta_prime: float = 1e-4
    eps1: float = 1e-6
    sigma2_mu: float = 100.0
    gig_p: float = 1.0
    gig_a: float = 0.5
    gig_b: float = 0.5
    tau_mu: float = 0.5
    tau_alpha: float = 0.02
    tau_lam: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        for name in ("rho_alpha", "p0", "p1", "eps0", "lambda_u", "delta_prime",
                     "eps1", "sigma2_mu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @staticmethod
    def default_p1(shape: TensorShape, k: int) -> float:
        return (2 * shape.size - 1) * k / 2.0

    @classmethod
    def defaults(cls, shape: TensorShape, k: int, **over) -> "HyperParams":
        base = dict(
            r=1.0,
            rho_alpha=0.001,
            p0=0.5 * shape.size * k,
            p1=cls.default_p1(shape, k),
            eps0=0.1,
            lambda_u=1.0,
        )
        base.update(over)
        return cls(**base)

    def replace(self, **kw) -> "HyperParams":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# smoothed surrogates


def smooth_indicator(alpha_i: np.ndarray, lam: float, eps0: float) -> float:
    """Arctan surrogate of ``1{||alpha_i||^2 > lambda}``, strictly in (0, 1)."""
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    sq = float(np.dot(alpha_i, alpha_i))
    return 0.5 + math.atan2(sq - lam, eps0) / math.pi


def indicator_profile(sqnorms: np.ndarray, lam: float, eps0: float):
    """Vectorized surrogate values and the chain-rule factor of its gradient.

    Returns ``(t, dt)`` with ``t_i = 1/2 + arctan((s_i - lam)/eps0)/pi`` and
    ``dt_i = (2/pi) * eps0 / (eps0^2 + (s_i - lam)^2)`` so that
    ``d t_i / d alpha_i = dt_i * alpha_i``.
    """
    centered = sqnorms - lam
    t = 0.5 + np.arctan(centered / eps0) / np.pi
    dt = (2.0 / np.pi) * eps0 / (eps0**2 + centered**2)
    return t, dt


def smooth_fusion(alpha: np.ndarray, graph: IndexGraph, eps1: float) -> float:
    """Smoothed fused penalty: sum over edges of sqrt(||a_i - a_i'||^2 + eps1)."""
    if eps1 <= 0:
        raise ValueError("eps1 must be positive")
    diff = alpha[graph.edge_tail] - alpha[graph.edge_head]
    return float(np.sum(np.sqrt(np.einsum("ek,ek->e", diff, diff) + eps1)))


def fusion_terms(alpha: np.ndarray, graph: IndexGraph, eps1: float):
    """Squared and smoothed fused sums over the edge set, in one pass."""
    diff = alpha[graph.edge_tail] - alpha[graph.edge_head]
    sq = np.einsum("ek,ek->e", diff, diff)
    return float(np.sum(sq)), float(np.sum(np.sqrt(sq + eps1)))


def roughness_sum(alpha: np.ndarray, r_matrix: np.ndarray) -> float:
    """``sum_i alpha_i' R alpha_i`` for a (p, K) coefficient block."""
    return float(np.sum((alpha @ r_matrix) * alpha))


# ---------------------------------------------------------------------------
# likelihood, priors, gradients


def signal(data: Dataset, alpha: np.ndarray, tvec: np.ndarray) -> np.ndarray:
    """Per-observation additive signal ``sum_i phi(X_i)'alpha_i t_i``."""
    weighted = alpha * tvec[:, None]
    return data.phi_flat @ weighted.ravel()


def predicted(state: ModelState, data: Dataset, hp: HyperParams,
              threshold: bool = True) -> np.ndarray:
    """Model mean for every observation."""
    if threshold:
        sqn = np.einsum("pk,pk->p", state.alpha, state.alpha)
        tvec, _ = indicator_profile(sqn, state.lam, hp.eps0)
    else:
        tvec = np.ones(data.n_entries)
    return state.mu + signal(data, state.alpha, tvec)


def log_likelihood(state: ModelState, data: Dataset, hp: HyperParams,
                   threshold: bool = True) -> float:
    """Gaussian log likelihood of the smoothed model; -inf on numeric failure."""
    if data.n == 0:
        return 0.0
    resid = data.y - predicted(state, data, hp, threshold)
    rss = float(resid @ resid)
    if not np.isfinite(rss):
        return -np.inf
    return -0.5 * data.n * (LOG_2PI + math.log(state.sigma2)) - rss / (2.0 * state.sigma2)


def log_prior_alpha(state: ModelState, graph: IndexGraph, basis: SplineBasis,
                    hp: HyperParams) -> float:
    """Coefficient prior log density, up to its normalizing constant."""
    quad = roughness_sum(state.alpha, basis.r_matrix)
    sq_sum, smooth_sum = fusion_terms(state.alpha, graph, hp.eps1)
    fused = hp.r * sq_sum + (1.0 - hp.r) * smooth_sum
    return -state.delta * quad / state.sigma2 - fused / (
        2.0 * state.sigma2 * hp.rho_alpha
    )


def log_prior_rest(state: ModelState, hp: HyperParams) -> float:
    """Log prior of mu, lambda, and the joint (delta, sigma2) factor, up to C."""
    if state.lam <= 0 or state.delta <= 0 or state.sigma2 <= 0:
        return -np.inf
    mu_term = -state.mu**2 / (2.0 * hp.sigma2_mu)
    lam_term = (hp.gig_p - 1.0) * math.log(state.lam) - 0.5 * (
        hp.gig_a / state.lam + hp.gig_b * state.lam
    )
    scale_term = (
        (hp.p0 - 1.0) * math.log(state.delta)
        - state.delta
        - (hp.p1 + 1.0) * math.log(state.sigma2)
        - 1.0 / state.sigma2
    )
    return mu_term + lam_term + scale_term


def log_posterior(state: ModelState, data: Dataset, graph: IndexGraph,
                  basis: SplineBasis, hp: HyperParams,
                  threshold: bool = True) -> float:
    """Full smoothed log posterior, up to the canceled normalizing constant."""
    return (
        log_likelihood(state, data, hp, threshold)
        + log_prior_alpha(state, graph, basis, hp)
        + log_prior_rest(state, hp)
    )


def _fusion_gradient(alpha: np.ndarray, graph: IndexGraph, r: float,
                     eps1: float) -> np.ndarray:
    """Gradient of ``r * sum ||d||^2 + (1 - r) * sum sqrt(||d||^2 + eps1)``."""
    out = np.zeros_like(alpha)
    if graph.edge_count == 0:
        return out
    tail, head = graph.edge_tail, graph.edge_head
    diff = alpha[tail] - alpha[head]
    sq = np.einsum("ek,ek->e", diff, diff)
    coef = 2.0 * r + (1.0 - r) / np.sqrt(sq + eps1)
    scaled = coef[:, None] * diff
    np.add.at(out, tail, scaled)
    np.subtract.at(out, head, scaled)
    return out


def grad_mu_alpha(state: ModelState, data: Dataset, graph: IndexGraph,
                  basis: SplineBasis, hp: HyperParams,
                  threshold: bool = True):
    """Gradient of the smoothed log posterior with respect to (mu, alpha)."""
    _, gmu, galpha = mu_alpha_value_grad(state, data, graph, basis, hp, threshold)
    return gmu, galpha


def mu_alpha_value_grad(state: ModelState, data: Dataset, graph: IndexGraph,
                        basis: SplineBasis, hp: HyperParams,
                        threshold: bool = True):
    """(mu, alpha)-dependent part of the log posterior plus its gradient.

    The value omits terms constant in (mu, alpha) — they cancel in every
    MALA acceptance ratio.  Returns ``(value, grad_mu, grad_alpha)``.
    """
    alpha, sigma2 = state.alpha, state.sigma2
    sqn = np.einsum("pk,pk->p", alpha, alpha)
    if threshold:
        tvec, dt = indicator_profile(sqn, state.lam, hp.eps0)
    else:
        tvec = np.ones(data.n_entries)
        dt = np.zeros(data.n_entries)

    if data.n:
        resid = data.y - state.mu - signal(data, alpha, tvec)
        rss = float(resid @ resid)
        loglik = -rss / (2.0 * sigma2)
        # score: d yhat / d alpha_i = phi(X_i) t_i + (phi(X_i)'alpha_i) dt_i alpha_i
        moment = (data.phi_flat.T @ resid).reshape(alpha.shape) / sigma2
        chain = np.einsum("pk,pk->p", moment, alpha)
        galpha = moment * tvec[:, None] + (chain * dt)[:, None] * alpha
        gmu = float(np.sum(resid)) / sigma2
    else:
        loglik = 0.0
        galpha = np.zeros_like(alpha)
        gmu = 0.0

    quad = roughness_sum(alpha, basis.r_matrix)
    sq_sum, smooth_sum = fusion_terms(alpha, graph, hp.eps1)
    value = (
        loglik
        - state.delta * quad / sigma2
        - (hp.r * sq_sum + (1.0 - hp.r) * smooth_sum) / (2.0 * sigma2 * hp.rho_alpha)
        - state.mu**2 / (2.0 * hp.sigma2_mu)
    )
    galpha -= (2.0 * state.delta / sigma2) * (alpha @ basis.r_matrix)
    galpha -= _fusion_gradient(alpha, graph, hp.r, hp.eps1) / (
        2.0 * sigma2 * hp.rho_alpha
    )
    gmu -= state.mu / hp.sigma2_mu
    return value, gmu, galpha
