"""Synthetic data generators: lattice toy designs and the nine matrix-covariate
settings with spatially smooth coefficient fields.

Each active entry (i, j) of a 2-way setting contributes

    f_ij(x) = a sin(c x) + a cos(d x) + b x - m_ij,

with ``m_ij = a (1 - cos c) / c + a sin(d) / d + b / 2`` so every component
integrates to zero on [0, 1].  Nonlinear settings tie the slope to the wave
coefficients via ``b = (2 / pi) a (c + d)``; linear settings use a = 0,
b = 1.  Spatially varying coefficients come from random nonnegative
combinations of the smoothest graph-Laplacian eigenfields, rescaled so the
wave numbers span [pi, 1.5 pi] over the active region.

Noise is calibrated to a target signal-to-noise ratio Var(signal) / Var(eps),
with the signal variance estimated by a Monte-Carlo pre-pass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import IndexGraph, TensorShape, build_grid_graph, smooth_eigvectors

SETTING_IDS = tuple(range(1, 10))
_SETTING_SNR = {1: 5.0, 2: 50.0, 3: 5.0, 4: 5.0, 5: 50.0, 6: 5.0, 7: 5.0, 8: 50.0, 9: 5.0}
_LINEAR_IDS = (3, 6, 9)
_EIGENFIELD_IDS = (4, 5, 7, 8)  # wave numbers vary smoothly over the lattice
_GRAYSCALE_IDS = (7, 8, 9)


@dataclass(frozen=True)
class ShapeMask:
    """Active-region mask with optional grayscale weights on active entries."""

    active: np.ndarray   # (P1, P2) bool
    weights: np.ndarray  # (P1, P2) float in [0, 1], zero off the mask

    def __post_init__(self):
        if not self.active.any():
            raise ValueError("mask must have at least one active entry")
        if self.weights.shape != self.active.shape:
            raise ValueError("weights must match the mask shape")
        if self.weights.min() < 0 or self.weights.max() > 1:
            raise ValueError("grayscale weights must lie in [0, 1]")

    @classmethod
    def from_weights(cls, weights: np.ndarray) -> "ShapeMask":
        weights = np.asarray(weights, dtype=float)
        return cls(active=weights > 0, weights=weights)

    @property
    def shape(self) -> TensorShape:
        return TensorShape(self.active.shape)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())


def low_rank_mask(p1: int = 15, p2: int = 15) -> ShapeMask:
    """Union of two axis-aligned rectangles (a rank-2 indicator)."""
    active = np.zeros((p1, p2), dtype=bool)
    active[2:7, 2:7] = True
    active[9:14, 8:14] = True
    return ShapeMask(active=active, weights=active.astype(float))


def horse_mask() -> ShapeMask:
    """A 15x15 stand-in silhouette: body, head, and legs."""
    active = np.zeros((15, 15), dtype=bool)
    active[5:9, 3:12] = True    # body
    active[3:6, 10:13] = True   # head and neck
    active[9:13, 4:6] = True    # front legs
    active[9:13, 9:11] = True   # hind legs
    return ShapeMask(active=active, weights=active.astype(float))


def six_mask() -> ShapeMask:
    """A 15x15 stand-in for a handwritten digit with grayscale weights."""
    weights = np.zeros((15, 15))
    # descending stroke
    for i in range(2, 9):
        j = 9 - (i - 2)
        weights[i, j] = 0.9
        weights[i, j + 1] = 0.5
    # closed loop at the bottom
    loop = [
        (8, 4), (8, 5), (8, 6), (8, 7),
        (9, 3), (9, 8), (10, 3), (10, 8), (11, 3), (11, 8),
        (12, 4), (12, 5), (12, 6), (12, 7),
    ]
    for i, j in loop:
        weights[i, j] = 1.0
    return ShapeMask.from_weights(weights)


def default_mask(setting_id: int, shape: tuple[int, int] = (15, 15)) -> ShapeMask:
    """Built-in active-region pattern for a setting id.

    The low-rank rectangles scale to any grid; the horse and digit stand-ins
    exist only at 15x15 (pass an explicit mask file for other sizes).
    """
    if setting_id not in SETTING_IDS:
        raise ValueError(f"setting id must be 1..9, got {setting_id}")
    if setting_id <= 3:
        return low_rank_mask(*shape)
    if tuple(shape) != (15, 15):
        raise ValueError(
            "built-in horse/digit masks are 15x15 only; supply a mask file"
        )
    return horse_mask() if setting_id <= 6 else six_mask()


def smooth_field(graph: IndexGraph, count: int = 80,
                 rng: np.random.Generator | None = None,
                 weights: np.ndarray | None = None) -> np.ndarray:
    """Random nonnegative combination of the ``count`` smoothest eigenfields.

    ``weights`` overrides the Unif(0, 1) combination coefficients (one per
    eigenfield), which the tests use to pin degenerate cases.
    """
    fields = smooth_eigvectors(graph, count)
    if weights is None:
        if rng is None:
            raise ValueError("either rng or explicit weights are required")
        weights = rng.uniform(size=count)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (count,):
        raise ValueError(f"need {count} combination weights")
    return np.tensordot(weights, np.stack(fields), axes=1)


def rescale_to(field: np.ndarray, lo: float = np.pi, hi: float = 1.5 * np.pi,
               mask: ShapeMask | None = None) -> np.ndarray:
    """Affine rescale so the active-region min hits ``lo`` and the max ``hi``."""
    active = mask.active if mask is not None else np.ones(field.shape, dtype=bool)
    fmin = field[active].min()
    fmax = field[active].max()
    if fmax - fmin < 1e-12:
        warnings.warn("constant field: rescaling to the interval midpoint")
        return np.full_like(field, 0.5 * (lo + hi))
    return lo + (field - fmin) * (hi - lo) / (fmax - fmin)


@dataclass(frozen=True)
class SimSetting:
    """A fully specified simulation scenario with per-entry coefficients."""

    setting_id: int
    snr: float
    linear: bool
    mask: ShapeMask
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    m: np.ndarray

    @property
    def shape(self) -> TensorShape:
        return self.mask.shape

    @cached_property
    def _flat(self):
        order = "F"  # vectorized entry order of the index graph
        return {
            name: getattr(self, name).ravel(order=order)
            for name in ("a", "b", "c", "d", "m")
        }

    @cached_property
    def active_flat(self) -> np.ndarray:
        return self.mask.active.ravel(order="F")

    def component(self, t: int):
        """The additive component function of vectorized entry ``t`` (0-based)."""
        a, b, c, d, m = (self._flat[n][t] for n in ("a", "b", "c", "d", "m"))

        def f(x):
            x = np.asarray(x, dtype=float)
            wave = a * np.sin(c * x) + a * np.cos(d * x) if a != 0.0 else 0.0
            return wave + b * x - m

        return f

    def signal(self, x: np.ndarray) -> np.ndarray:
        """Sum of active components for an (N, p) covariate matrix."""
        x = np.asarray(x, dtype=float)
        act = self.active_flat
        a, b, c, d, m = (self._flat[n][act] for n in ("a", "b", "c", "d", "m"))
        xa = x[:, act]
        contrib = a * np.sin(c * xa) + a * np.cos(d * xa) + b * xa - m
        return contrib.sum(axis=1)


def _centering_constant(a, b, c, d):
    """Closed form of ``int_0^1 a sin(cx) + a cos(dx) + bx dx``."""
    with np.errstate(invalid="ignore", divide="ignore"):
        sin_part = np.where(c != 0, a * (1.0 - np.cos(c)) / np.where(c != 0, c, 1.0), 0.0)
        cos_part = np.where(d != 0, a * np.sin(d) / np.where(d != 0, d, 1.0), a)
    return sin_part + cos_part + b / 2.0


def make_setting(setting_id: int, mask: ShapeMask | None = None,
                 rng: np.random.Generator | None = None,
                 eigenfield_count: int = 80) -> SimSetting:
    """Populate the coefficient fields of one of the nine scenarios.

    Settings 1-3 use the programmatic low-rank mask, 4-6 the horse stand-in,
    7-9 the grayscale digit stand-in; an explicit ``mask`` overrides.
    Settings with eigenfield coefficients need ``rng``.
    """
    if setting_id not in SETTING_IDS:
        raise ValueError(f"setting id must be 1..9, got {setting_id}")
    if mask is None:
        mask = default_mask(setting_id)
    act = mask.active
    shape = act.shape
    linear = setting_id in _LINEAR_IDS
    a = np.zeros(shape)
    b = np.zeros(shape)
    c = np.zeros(shape)
    d = np.zeros(shape)

    if linear:
        b[act] = 1.0
    else:
        if setting_id in (1, 2):
            a[act] = 1.0
            c[act] = 1.5 * np.pi
            d[act] = 1.5 * np.pi
        else:
            if rng is None:
                raise ValueError(
                    f"setting {setting_id} draws smooth coefficient fields; pass rng"
                )
            graph = build_grid_graph(shape)
            u1 = smooth_field(graph, eigenfield_count, rng)
            u2 = smooth_field(graph, eigenfield_count, rng)
            u3 = smooth_field(graph, eigenfield_count, rng)
            if setting_id in (4, 5):
                a[act] = u1[act] + 2.0
            else:
                a[act] = 2.0 * mask.weights[act] + 1.0
            c[act] = rescale_to(u2, mask=mask)[act]
            d[act] = rescale_to(u3, mask=mask)[act]
        b[act] = (2.0 / np.pi) * a[act] * (c[act] + d[act])

    m = np.zeros(shape)
    m[act] = _centering_constant(a[act], b[act], c[act], d[act])
    return SimSetting(
        setting_id=setting_id,
        snr=_SETTING_SNR[setting_id],
        linear=linear,
        mask=mask,
        a=a, b=b, c=c, d=d, m=m,
    )


def calibrate_noise(setting: SimSetting, rng: np.random.Generator,
                    n_pre: int = 100_000) -> float:
    """Noise variance hitting the target SNR, via a Monte-Carlo pre-pass."""
    x = rng.uniform(size=(n_pre, setting.shape.size))
    s = setting.signal(x)
    return float(s.var() / setting.snr)


def generate(setting: SimSetting, n: int, rng: np.random.Generator,
             sigma2_eps: float | None = None):
    """Draw ``n`` observations; returns ``(x, y, sigma2_eps)``.

    Covariate entries are i.i.d. Unif(0, 1); pass ``sigma2_eps`` to share one
    noise calibration between train and test sets.
    """
    if sigma2_eps is None:
        sigma2_eps = calibrate_noise(setting, rng)
    p = setting.shape.size
    x = rng.uniform(size=(n, p))
    y = setting.signal(x) + np.sqrt(sigma2_eps) * rng.standard_normal(n)
    return x, y, sigma2_eps


def toy_designs(kind: str) -> np.ndarray:
    """Deterministic 15x15 coefficient fields for the linear lattice toys.

    ``piecewise_constant``: three rectangles at levels 2, -2, and 1 inside a
    zero frame (four distinct values including 0).  ``piecewise_smooth``: a
    center square and a surrounding ring with radial-cosine interiors and a
    jump across the square boundary; zero outside the ring.
    """
    beta = np.zeros((15, 15))
    if kind == "piecewise_constant":
        beta[2:7, 2:7] = 6.0
        beta[2:7, 9:14] = -6.0
        beta[9:14, 3:12] = 3.0
        return beta
    if kind == "piecewise_smooth":
        ii, jj = np.meshgrid(np.arange(15), np.arange(15), indexing="ij")
        radius = np.hypot(ii - 7.0, jj - 7.0)
        square = np.maximum(np.abs(ii - 7), np.abs(jj - 7)) <= 2
        ring = (radius <= 6.0) & ~square
        beta[square] = 7.5 + 1.0 * np.cos(np.pi * radius[square] / 4.0)
        beta[ring] = 2.0 * (1.0 + np.cos(np.pi * (radius[ring] - 4.25) / 2.2))
        return beta
    raise ValueError(f"unknown toy design {kind!r}")


def toy_generate(beta: np.ndarray, n: int, rng: np.random.Generator):
    """Linear lattice responses ``y = <beta, X> + eps`` with unit noise."""
    p = beta.size
    x = rng.uniform(size=(n, p))
    y = x @ beta.ravel(order="F") + rng.standard_normal(n)
    return x, y
