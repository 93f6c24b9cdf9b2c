"""Hyperparameter machinery: indicator half-width calibration and the
two-stage greedy validation search with warm starts.

Calibration runs the chain twice with the strongest fused penalty and r = 1:
first with the indicator frozen at one (and no threshold update) for rough
coefficient norms, then the full algorithm with the resulting half-width.
The half-width makes the smoothed indicator span [eta, 1 - eta] over the
observed squared norms; the threshold's upper truncation bound comes from the
same run.

The search scans (p0, rho) at fixed r in boustrophedon ("snake") order,
warm-starting each chain from the averaged post-burn-in draws of its
predecessor, then repeats over (r, rho) at the selected p0.  Each grid point
is scored by mean squared validation error of its thresholded point estimate.
A cold-start variant (every point runs the full chain from the ridge
initialization, optionally in parallel processes) trades the warm-start
dependency chain for throughput; results then depend only on per-point seeds.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import IndexGraph, TensorShape
from .model import Dataset, HyperParams, ModelState
from .sampler import ChainConfig, PosteriorSamples, ridge_init, run_chain
from .selection import FitResult, summarize
from .spline import SplineBasis

DIVERGENCE_REJECT_RUN = 500


@dataclass(frozen=True)
class Grids:
    """Candidate ladders for the validation search (each sorted ascending)."""

    p0: tuple[float, ...]
    r: tuple[float, ...] = (1.0, 0.75, 0.5, 0.25, 0.0)
    rho: tuple[float, ...] = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0)

    def __post_init__(self):
        for name in ("p0", "r", "rho"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} grid must be nonempty")

    @classmethod
    def defaults(cls, shape: TensorShape, k: int) -> "Grids":
        pk = shape.size * k
        return cls(p0=tuple(c * pk for c in (0.5, 5.0, 50.0, 500.0, 5000.0)))

    @property
    def stage1_r(self) -> float:
        return self.r[0]


def indicator_halfwidth_scale(eta: float = 0.05) -> float:
    """The m solving 1/2 + arctan(m)/pi = 1 - eta."""
    return math.tan(math.pi * (0.5 - eta))


@dataclass
class Eps0Calibration:
    eps0: float
    lambda_u: float
    eps0_initial: float
    sqnorm_range: tuple[float, float]
    degenerate: bool = False


def _eps0_from_samples(samples: PosteriorSamples, eta: float):
    alpha_hat = samples.alpha.mean(axis=0)
    sqn = np.einsum("pk,pk->p", alpha_hat, alpha_hat)
    lo, hi = float(sqn.min()), float(sqn.max())
    m = indicator_halfwidth_scale(eta)
    if hi - lo < 1e-12:
        warnings.warn("flat coefficient norms; falling back to eps0 = 1e-3")
        return 1e-3, max(hi, 1e-3), (lo, hi), True
    return (hi - lo) / (2.0 * m), hi, (lo, hi), False


def calibrate_eps0(train: Dataset, graph: IndexGraph, basis: SplineBasis,
                   hp: HyperParams, cfg: ChainConfig,
                   rng: np.random.Generator, rho1: float,
                   eta: float = 0.05) -> Eps0Calibration:
    """Two-step half-width calibration at r = 1 and the first rho value.

    Step one freezes the indicator at one and skips the threshold update;
    step two reruns the full algorithm with the step-one half-width (its
    threshold bound taken from step one) and recomputes both quantities from
    the new posterior mean.
    """
    hp_cal = hp.replace(r=1.0, rho_alpha=rho1)
    init = ridge_init(train, basis, hp_cal)
    rough = run_chain(init, train, graph, basis, hp_cal, cfg, rng,
                      threshold=False, update_lambda=False)
    eps0_first, lam_u_first, _, degen_first = _eps0_from_samples(rough, eta)

    hp_full = hp_cal.replace(eps0=eps0_first, lambda_u=lam_u_first)
    full = run_chain(ridge_init(train, basis, hp_full), train, graph, basis,
                     hp_full, cfg, rng)
    eps0, lam_u, sq_range, degen = _eps0_from_samples(full, eta)
    return Eps0Calibration(
        eps0=eps0,
        lambda_u=lam_u,
        eps0_initial=eps0_first,
        sqnorm_range=sq_range,
        degenerate=degen_first or degen,
    )


def snake_order(n_rows: int, n_cols: int) -> list[tuple[int, int]]:
    """Boustrophedon traversal of a (rows x cols) grid, 1-based indices.

    Odd rows run left to right, even rows right to left, so consecutive
    points differ in exactly one coordinate by one (warm-start adjacency).
    """
    out = []
    for j in range(1, n_rows + 1):
        cols = range(1, n_cols + 1) if j % 2 == 1 else range(n_cols, 0, -1)
        out.extend((j, t) for t in cols)
    return out


@dataclass
class TuneResult:
    best_p0: float
    best_r: float
    best_rho: float
    best_loss: float
    stage1_loss: np.ndarray  # (J, T)
    stage2_loss: np.ndarray  # (S, T)
    calibration: Eps0Calibration | None
    best_fit: FitResult
    n_segments: int


def validation_loss(fit: FitResult, valid: Dataset) -> float:
    pred = fit.predict(valid.x)
    loss = float(np.mean((valid.y - pred) ** 2))
    return loss if np.isfinite(loss) else float("inf")


def _warm_average(samples: PosteriorSamples) -> ModelState:
    return samples.mean_state()


def _segment_seed(base_seed: int, stage: int, row: int, col: int) -> int:
    return int(np.random.SeedSequence((base_seed, stage, row, col)).generate_state(1)[0])


def _run_point(train, valid, graph, basis, hp, cfg, seed, init=None,
               first_iter=0):
    rng = np.random.default_rng(seed)
    state = ridge_init(train, basis, hp) if init is None else init
    samples = run_chain(state, train, graph, basis, hp, cfg, rng,
                        first_iter=first_iter)
    fit = summarize(samples, basis)
    if samples.longest_reject_run >= DIVERGENCE_REJECT_RUN:
        return float("inf"), fit, samples
    return validation_loss(fit, valid), fit, samples


def _run_point_cold(args):
    train, valid, graph, basis, hp, cfg, seed = args
    loss, fit, _ = _run_point(train, valid, graph, basis, hp, cfg, seed)
    return loss, fit


def _scan_stage(train, valid, graph, basis, cfg, rng_seed, stage, hp_for,
                n_rows, n_cols, warm_start, jobs):
    """Snake-scan one stage; returns the loss table and the best fit."""
    losses = np.full((n_rows, n_cols), np.inf)
    fits = {}
    if warm_start:
        prev_samples = None
        for j, t in snake_order(n_rows, n_cols):
            hp = hp_for(j, t)
            seed = _segment_seed(rng_seed, stage, j, t)
            if prev_samples is None:
                loss, fit, samples = _run_point(
                    train, valid, graph, basis, hp, cfg, seed
                )
            else:
                loss, fit, samples = _run_point(
                    train, valid, graph, basis, hp, cfg, seed,
                    init=_warm_average(prev_samples),
                    first_iter=cfg.warmstart_offset,
                )
            losses[j - 1, t - 1] = loss
            fits[(j, t)] = fit
            prev_samples = samples
    else:
        order = snake_order(n_rows, n_cols)
        tasks = [
            (train, valid, graph, basis, hp_for(j, t), cfg,
             _segment_seed(rng_seed, stage, j, t))
            for j, t in order
        ]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_run_point_cold, tasks))
        else:
            results = [_run_point_cold(task) for task in tasks]
        for (j, t), (loss, fit) in zip(order, results):
            losses[j - 1, t - 1] = loss
            fits[(j, t)] = fit
    j_best, t_best = np.unravel_index(int(np.argmin(losses)), losses.shape)
    return losses, fits[(j_best + 1, t_best + 1)], (j_best, t_best)


def greedy_search(train: Dataset, valid: Dataset, graph: IndexGraph,
                  basis: SplineBasis, grids: Grids, hp_base: HyperParams,
                  cfg: ChainConfig, seed: int = 0, *,
                  warm_start: bool = True, jobs: int = 1) -> TuneResult:
    """Two-stage greedy search over (p0, r, rho) by validation loss.

    Stage one scans (p0, rho) at r fixed to the first grid value and keeps
    the p0 of the best pair; stage two scans (r, rho) at that p0.  The total
    chain-segment count is J*T + S*T.  Diverged segments (no accepted move
    for 500 consecutive sweeps) score +inf and the scan continues.
    """
    n_p0, n_r, n_rho = len(grids.p0), len(grids.r), len(grids.rho)

    stage1_losses, _, (j0, _) = _scan_stage(
        train, valid, graph, basis, cfg, seed, stage=1,
        hp_for=lambda j, t: hp_base.replace(
            p0=grids.p0[j - 1], r=grids.stage1_r, rho_alpha=grids.rho[t - 1]
        ),
        n_rows=n_p0, n_cols=n_rho, warm_start=warm_start, jobs=jobs,
    )
    best_p0 = grids.p0[j0]

    stage2_losses, best_fit, (s0, t0) = _scan_stage(
        train, valid, graph, basis, cfg, seed, stage=2,
        hp_for=lambda s, t: hp_base.replace(
            p0=best_p0, r=grids.r[s - 1], rho_alpha=grids.rho[t - 1]
        ),
        n_rows=n_r, n_cols=n_rho, warm_start=warm_start, jobs=jobs,
    )
    return TuneResult(
        best_p0=best_p0,
        best_r=grids.r[s0],
        best_rho=grids.rho[t0],
        best_loss=float(stage2_losses[s0, t0]),
        stage1_loss=stage1_losses,
        stage2_loss=stage2_losses,
        calibration=None,
        best_fit=best_fit,
        n_segments=(n_p0 + n_r) * n_rho,
    )
