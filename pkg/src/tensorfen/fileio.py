"""Plain-text file formats for the batch pipeline.

Covariate tensors: a header line ``N P1 ... PD`` followed by one line per
observation holding the tensor entries in row-major order, written with 17
significant digits for exact float64 round trips.  Internally entries live in
the column-major vectorized order of the index graph, so readers and writers
transpose between the two layouts.

Masks: a header ``P1 P2`` then P1 rows of P2 values in [0, 1]; zero marks an
inactive entry, positive values are grayscale weights.

The simulation truth manifest and the fit result are JSON documents carrying
everything needed to reconstruct the generating functions and the fitted
model (including the spline basis and the response standardization).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import TensorShape
from .selection import FitResult
from .simulate import ShapeMask, SimSetting
from .spline import SplineBasis

FLOAT_FMT = "%.17g"


def _fmt(values) -> str:
    return " ".join(FLOAT_FMT % v for v in np.asarray(values, dtype=float).ravel())


def _row_major(row: np.ndarray, dims) -> np.ndarray:
    return row.reshape(dims, order="F").ravel(order="C")


def _col_major(row: np.ndarray, dims) -> np.ndarray:
    return row.reshape(dims, order="C").ravel(order="F")


def write_tensor_file(path, x: np.ndarray, shape: TensorShape) -> None:
    x = np.asarray(x, dtype=float)
    with open(path, "w") as fh:
        fh.write(" ".join(str(v) for v in (x.shape[0], *shape.dims)) + "\n")
        for row in x:
            fh.write(_fmt(_row_major(row, shape.dims)) + "\n")


def read_tensor_file(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) < 2:
            raise ValueError(f"{path}: malformed tensor header")
        n = int(header[0])
        shape = TensorShape(tuple(int(v) for v in header[1:]))
        x = np.empty((n, shape.size))
        for i in range(n):
            row = np.array(fh.readline().split(), dtype=float)
            if row.size != shape.size:
                raise ValueError(f"{path}: row {i} has {row.size} values")
            x[i] = _col_major(row, shape.dims)
    return x, shape


def write_value_file(path, y: np.ndarray) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(y, dtype=float).ravel():
            fh.write(FLOAT_FMT % v + "\n")


def read_value_file(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=1)


def write_mask_file(path, mask: ShapeMask) -> None:
    p1, p2 = mask.weights.shape
    with open(path, "w") as fh:
        fh.write(f"{p1} {p2}\n")
        for row in mask.weights:
            fh.write(_fmt(row) + "\n")


def read_mask_file(path) -> ShapeMask:
    with open(path) as fh:
        p1, p2 = (int(v) for v in fh.readline().split())
        weights = np.array(
            [np.array(fh.readline().split(), dtype=float) for _ in range(p1)]
        )
    if weights.shape != (p1, p2):
        raise ValueError(f"{path}: mask body does not match header")
    return ShapeMask.from_weights(weights)


def write_matrix_file(path, matrix: np.ndarray) -> None:
    np.savetxt(path, np.asarray(matrix, dtype=float), fmt=FLOAT_FMT)


def read_matrix_file(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=2)


def write_keyvalue_file(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def read_keyvalue_file(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# truth manifest


def write_truth_manifest(path, setting: SimSetting, sigma2_eps: float) -> None:
    doc = {
        "setting": setting.setting_id,
        "snr": setting.snr,
        "linear": setting.linear,
        "shape": list(setting.shape.dims),
        "sigma2_eps": sigma2_eps,
        "mask_weights": setting.mask.weights.tolist(),
        "fields": {
            name: getattr(setting, name).tolist()
            for name in ("a", "b", "c", "d", "m")
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_truth_manifest(path):
    doc = json.loads(Path(path).read_text())
    mask = ShapeMask.from_weights(np.array(doc["mask_weights"], dtype=float))
    fields = {k: np.array(v, dtype=float) for k, v in doc["fields"].items()}
    setting = SimSetting(
        setting_id=int(doc["setting"]),
        snr=float(doc["snr"]),
        linear=bool(doc["linear"]),
        mask=mask,
        **fields,
    )
    return setting, float(doc["sigma2_eps"])


# ---------------------------------------------------------------------------
# fit result


def write_fit_file(path, fit: FitResult, y_mean: float = 0.0,
                   y_scale: float = 1.0, extra: dict | None = None) -> None:
    basis = fit.basis
    doc = {
        "shape": list(fit.shape.dims),
        "cutoff": fit.cutoff,
        "degenerate_cutoff": fit.degenerate_cutoff,
        "eps0": fit.eps0,
        "mu_hat": fit.mu_hat,
        "inclusion_prob": fit.inclusion_prob.tolist(),
        "active": fit.active.astype(int).tolist(),
        "beta_hat": fit.beta_hat.tolist(),
        "basis": {
            "order": basis.order,
            "knots": basis.knots.tolist(),
            "transform": basis.transform.tolist(),
            "omega": basis.omega.tolist(),
            "r_matrix": basis.r_matrix.tolist(),
            "norm_phi1_sq": basis.norm_phi1_sq,
            "delta_prime": basis.delta_prime,
        },
        "standardize": {"mean": y_mean, "scale": y_scale},
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_fit_file(path):
    doc = json.loads(Path(path).read_text())
    b = doc["basis"]
    basis = SplineBasis(
        order=int(b["order"]),
        knots=np.array(b["knots"], dtype=float),
        transform=np.array(b["transform"], dtype=float),
        omega=np.array(b["omega"], dtype=float),
        r_matrix=np.array(b["r_matrix"], dtype=float),
        norm_phi1_sq=float(b["norm_phi1_sq"]),
        delta_prime=float(b["delta_prime"]),
    )
    fit = FitResult(
        shape=TensorShape(tuple(doc["shape"])),
        inclusion_prob=np.array(doc["inclusion_prob"], dtype=float),
        cutoff=float(doc["cutoff"]),
        degenerate_cutoff=bool(doc["degenerate_cutoff"]),
        active=np.array(doc["active"], dtype=int).astype(bool),
        beta_hat=np.array(doc["beta_hat"], dtype=float),
        mu_hat=float(doc["mu_hat"]),
        basis=basis,
        eps0=float(doc["eps0"]),
    )
    std = doc.get("standardize", {"mean": 0.0, "scale": 1.0})
    return fit, float(std["mean"]), float(std["scale"])
