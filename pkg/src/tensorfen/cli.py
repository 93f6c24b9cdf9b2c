"""Batch front-end: simulate data, tune and fit the model, report metrics.

Exit codes: 0 on success, 2 for configuration problems (bad flags, unreadable
or inconsistent files), 3 for numeric failures (a diverged final chain).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .grid import TensorShape, build_grid_graph
from .model import Dataset, HyperParams
from .sampler import ChainConfig, ridge_init, run_chain
from .selection import FitResult, metrics, summarize
from .simulate import calibrate_noise, default_mask, generate, make_setting
from .spline import basis_dimension, basis_from_samples
from .tuning import Grids, calibrate_eps0, greedy_search

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class NumericFailure(RuntimeError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorfen",
        description="Bayesian tensor additive regression with a fused elastic net prior",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    sim.add_argument("--setting", type=int, required=True, choices=range(1, 10))
    sim.add_argument("--n", type=int, required=True, help="training sample size")
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", type=Path, required=True, help="output directory")
    sim.add_argument("--n-test", type=int, default=0, help="held-out test size")
    sim.add_argument("--mask", type=Path, default=None,
                     help="mask file overriding the built-in pattern")
    sim.add_argument("--shape", type=int, nargs=2, default=None,
                     metavar=("P1", "P2"),
                     help="grid size for the built-in low-rank pattern")
    sim.add_argument("--eigenfields", type=int, default=80,
                     help="number of Laplacian eigenfields for smooth coefficients")

    fit = sub.add_parser("tune-fit", help="calibrate, tune, and fit")
    fit.add_argument("--x", type=Path, required=True)
    fit.add_argument("--y", type=Path, required=True)
    fit.add_argument("--shape", type=int, nargs="+", default=None,
                     help="expected tensor shape (validated against the x header)")
    fit.add_argument("--grids-file", type=Path, default=None,
                     help="key=value file with grids and chain settings")
    fit.add_argument("--seed", type=int, required=True)
    fit.add_argument("--out", type=Path, required=True)
    fit.add_argument("--pool-valid", action="store_true",
                     help="refit on train+validation after tuning")
    fit.add_argument("--no-standardize", action="store_true",
                     help="fit the raw response instead of standardizing it")
    fit.add_argument("--cold-start", action="store_true",
                     help="cold-start every grid point (non-warm-start mode)")
    fit.add_argument("--jobs", type=int, default=1,
                     help="parallel workers for cold-start grid points")

    rep = sub.add_parser("report", help="evaluate a fit against the truth")
    rep.add_argument("--fit", type=Path, required=True)
    rep.add_argument("--truth", type=Path, required=True)
    rep.add_argument("--test-x", type=Path, required=True)
    rep.add_argument("--test-y", type=Path, required=True)
    rep.add_argument("--out", type=Path, required=True)
    return parser


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    mask = fileio.read_mask_file(args.mask) if args.mask else None
    if mask is None and args.shape is not None:
        mask = default_mask(args.setting, tuple(args.shape))
    setting = make_setting(args.setting, mask=mask, rng=rng,
                           eigenfield_count=args.eigenfields)
    sigma2_eps = calibrate_noise(setting, rng)
    x, y, _ = generate(setting, args.n, rng, sigma2_eps=sigma2_eps)
    fileio.write_tensor_file(out / "x.txt", x, setting.shape)
    fileio.write_value_file(out / "y.txt", y)
    fileio.write_truth_manifest(out / "truth.json", setting, sigma2_eps)
    if args.n_test > 0:
        xt, yt, _ = generate(setting, args.n_test, rng, sigma2_eps=sigma2_eps)
        fileio.write_tensor_file(out / "x_test.txt", xt, setting.shape)
        fileio.write_value_file(out / "y_test.txt", yt)
    return EXIT_OK


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _load_run_settings(path, shape: TensorShape, k: int):
    """Grids and chain configuration from a flat key=value file."""
    grids = Grids.defaults(shape, k)
    cfg_kw = dict(total_iters=20_000, burn_in=10_000, warmstart_offset=2_000,
                  thinning=1)
    if path is not None:
        doc = fileio.read_keyvalue_file(path)
        pk = shape.size * k
        if "p0_mult" in doc:
            grids_p0 = tuple(m * pk for m in _parse_floats(doc["p0_mult"]))
        elif "p0" in doc:
            grids_p0 = _parse_floats(doc["p0"])
        else:
            grids_p0 = grids.p0
        grids = Grids(
            p0=grids_p0,
            r=_parse_floats(doc["r"]) if "r" in doc else grids.r,
            rho=_parse_floats(doc["rho"]) if "rho" in doc else grids.rho,
        )
        for key in cfg_kw:
            if key in doc:
                cfg_kw[key] = int(doc[key])
    return grids, ChainConfig(**cfg_kw)


def cmd_tune_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x, shape = fileio.read_tensor_file(args.x)
    if args.shape is not None and tuple(args.shape) != shape.dims:
        raise ValueError(
            f"--shape {tuple(args.shape)} does not match x header {shape.dims}"
        )
    y = fileio.read_value_file(args.y)
    if y.size != x.shape[0]:
        raise ValueError("x and y disagree on the number of observations")

    seeds = np.random.SeedSequence(args.seed).spawn(4)
    split_rng = np.random.default_rng(seeds[0])
    n = y.size
    n_valid = n // 6  # train : validation = 5 : 1
    perm = split_rng.permutation(n)
    valid_idx, train_idx = perm[:n_valid], perm[n_valid:]

    if args.no_standardize:
        y_mean, y_scale = 0.0, 1.0
    else:
        y_mean = float(y[train_idx].mean())
        y_scale = float(y[train_idx].std())
        if y_scale <= 0:
            raise ValueError("response is constant; cannot standardize")
    y_std = (y - y_mean) / y_scale

    k = basis_dimension(train_idx.size)
    basis = basis_from_samples(x[train_idx].ravel(), k)
    graph = build_grid_graph(shape)
    full = Dataset.build(shape, x, y_std, basis)
    train = full.subset(train_idx)
    valid = full.subset(valid_idx)

    grids, cfg = _load_run_settings(args.grids_file, shape, k)
    hp_base = HyperParams.defaults(shape, k, eps0=0.1, lambda_u=1.0)

    t_start = time.time()
    calibration = calibrate_eps0(
        train, graph, basis, hp_base, cfg, np.random.default_rng(seeds[1]),
        rho1=grids.rho[0],
    )
    hp_base = hp_base.replace(eps0=calibration.eps0,
                              lambda_u=calibration.lambda_u)

    result = greedy_search(
        train, valid, graph, basis, grids, hp_base, cfg,
        seed=int(seeds[2].generate_state(1)[0]),
        warm_start=not args.cold_start, jobs=args.jobs,
    )
    result.calibration = calibration

    final_data = full.subset(perm) if args.pool_valid else train
    hp_final = hp_base.replace(p0=result.best_p0, r=result.best_r,
                               rho_alpha=result.best_rho)
    final_rng = np.random.default_rng(seeds[3])
    samples = run_chain(ridge_init(final_data, basis, hp_final), final_data,
                        graph, basis, hp_final, cfg, final_rng)
    fit = summarize(samples, basis)

    _write_fit_outputs(out, fit, samples, result, y_mean, y_scale,
                       time.time() - t_start)
    if samples.longest_reject_run >= 500 or not np.isfinite(fit.beta_hat).all():
        raise NumericFailure("final chain diverged; partial artifacts written")
    return EXIT_OK


def _write_fit_outputs(out: Path, fit: FitResult, samples, result, y_mean,
                       y_scale, elapsed) -> None:
    fileio.write_fit_file(
        out / "fit.json", fit, y_mean=y_mean, y_scale=y_scale,
        extra={
            "best_p0": result.best_p0,
            "best_r": result.best_r,
            "best_rho": result.best_rho,
            "best_validation_loss": result.best_loss,
        },
    )
    if fit.shape.ndim == 2:
        fileio.write_matrix_file(
            out / "inclusion_prob.txt",
            fit.inclusion_prob.reshape(fit.shape.dims, order="F"),
        )
    fileio.write_matrix_file(out / "beta_hat.txt", fit.beta_hat)
    grid = np.linspace(0.0, 1.0, 101)
    rows = []
    for t in np.flatnonzero(fit.active):
        rows.append(np.r_[t + 1, fit.component(int(t))(grid)])
    if rows:
        fileio.write_matrix_file(out / "fhat_grid.txt", np.array(rows))
    fileio.write_matrix_file(out / "train_trace.txt",
                             samples.train_error[:, None])
    fileio.write_matrix_file(out / "loss_stage1.txt", result.stage1_loss)
    fileio.write_matrix_file(out / "loss_stage2.txt", result.stage2_loss)
    cal = result.calibration
    fileio.write_keyvalue_file(out / "summary.txt", {
        "best_p0": result.best_p0,
        "best_r": result.best_r,
        "best_rho": result.best_rho,
        "best_validation_loss": result.best_loss,
        "eps0": cal.eps0 if cal else float("nan"),
        "lambda_u": cal.lambda_u if cal else float("nan"),
        "cutoff": fit.cutoff,
        "degenerate_cutoff": fit.degenerate_cutoff,
        "active_entries": int(fit.active.sum()),
        "y_mean": y_mean,
        "y_scale": y_scale,
        "chain_segments": result.n_segments,
        "elapsed_seconds": round(elapsed, 3),
    })


def cmd_report(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fit, y_mean, y_scale = fileio.read_fit_file(args.fit)
    setting, _ = fileio.read_truth_manifest(args.truth)
    test_x, shape = fileio.read_tensor_file(args.test_x)
    test_y = fileio.read_value_file(args.test_y)
    if shape.dims != fit.shape.dims or shape.dims != setting.shape.dims:
        raise ValueError("fit, truth, and test data disagree on the tensor shape")
    if test_y.size != test_x.shape[0]:
        raise ValueError("test x and y disagree on the number of observations")

    # undo the response standardization so everything is on the data scale
    rescaled = FitResult(
        shape=fit.shape,
        inclusion_prob=fit.inclusion_prob,
        cutoff=fit.cutoff,
        degenerate_cutoff=fit.degenerate_cutoff,
        active=fit.active,
        beta_hat=fit.beta_hat * y_scale,
        mu_hat=y_mean + y_scale * fit.mu_hat,
        basis=fit.basis,
        eps0=fit.eps0,
    )
    scores = metrics(setting, rescaled, test_x, test_y)
    fileio.write_keyvalue_file(out / "metrics.txt", scores)
    fileio.write_matrix_file(out / "heatmap_fhat.txt", rescaled.magnitude_map())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "tune-fit": cmd_tune_fit,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
