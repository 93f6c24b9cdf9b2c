"""Tensor index lattices, their neighbor graphs, and graph Laplacians.

Entries of a D-way covariate array are identified by 1-based multi-indices
``(i_1, ..., i_D)``.  Two entries are neighbors when their multi-indices
differ by one in exactly one coordinate, which turns the index set into a
grid graph.  The same graph drives both the fusion/Laplacian penalties of
the coefficient prior and the construction of spatially smooth simulation
signals (low-frequency Laplacian eigenvectors).

Vectorization is column-major: ``t = i_1 + sum_{d>=2} (i_d - 1) * P_1...P_{d-1}``,
so ``t`` runs from 1 to ``P_1 * ... * P_D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import prod

import numpy as np


@dataclass(frozen=True)
class TensorShape:
    """Dimensions ``(P_1, ..., P_D)`` of the covariate array."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) == 0:
            raise ValueError("shape must have at least one dimension")
        if any(d < 1 for d in dims):
            raise ValueError(f"all dimensions must be >= 1, got {dims}")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return prod(self.dims)


def vectorize_index(index: tuple[int, ...], shape: TensorShape) -> int:
    """Map a 1-based multi-index to its 1-based vectorized position."""
    dims = shape.dims
    if len(index) != len(dims):
        raise IndexError(f"index {index} has wrong length for shape {dims}")
    t = 0
    stride = 1
    for i, p in zip(index, dims):
        if not 1 <= i <= p:
            raise IndexError(f"index {index} out of range for shape {dims}")
        t += (i - 1) * stride
        stride *= p
    return t + 1


def devectorize_index(t: int, shape: TensorShape) -> tuple[int, ...]:
    """Inverse of :func:`vectorize_index`."""
    if not 1 <= t <= shape.size:
        raise IndexError(f"vectorized index {t} out of range for shape {shape.dims}")
    rem = t - 1
    out = []
    for p in shape.dims:
        out.append(rem % p + 1)
        rem //= p
    return tuple(out)


@dataclass(frozen=True)
class IndexGraph:
    """Neighbor graph of a tensor index lattice.

    ``edges`` holds 1-based vectorized index pairs ``(t, t')`` with
    ``t < t'``, sorted lexicographically.  An edge is present iff the two
    multi-indices are at L1 distance one.
    """

    shape: TensorShape
    edges: np.ndarray  # (n_edges, 2) int64, 1-based, t < t'

    @property
    def node_count(self) -> int:
        return self.shape.size

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def edge_tail(self) -> np.ndarray:
        """0-based tail node of each edge (read-only convenience view)."""
        return self.edges[:, 0] - 1

    @cached_property
    def edge_head(self) -> np.ndarray:
        """0-based head node of each edge."""
        return self.edges[:, 1] - 1

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        np.add.at(deg, self.edge_tail, 1)
        np.add.at(deg, self.edge_head, 1)
        return deg


def build_grid_graph(shape: TensorShape | tuple[int, ...]) -> IndexGraph:
    """Build the lattice neighbor graph for a tensor shape.

    The edge count equals ``sum_d (P_d - 1) * prod_{d' != d} P_{d'}``.
    """
    if not isinstance(shape, TensorShape):
        shape = TensorShape(tuple(shape))
    # 0-based vectorized ids laid out on the lattice (column-major order).
    ids = np.arange(shape.size, dtype=np.int64).reshape(shape.dims, order="F")
    tails = []
    heads = []
    for axis in range(shape.ndim):
        if shape.dims[axis] < 2:
            continue
        lo = [slice(None)] * shape.ndim
        hi = [slice(None)] * shape.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        tails.append(ids[tuple(lo)].ravel())
        heads.append(ids[tuple(hi)].ravel())
    if tails:
        edges = np.stack(
            [np.concatenate(tails) + 1, np.concatenate(heads) + 1], axis=1
        )
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return IndexGraph(shape=shape, edges=edges)


@dataclass(frozen=True)
class Laplacian:
    """Dense graph Laplacian ``L = D - A`` with its degree vector."""

    matrix: np.ndarray
    degrees: np.ndarray


def laplacian(graph: IndexGraph) -> Laplacian:
    """Dense Laplacian of the lattice graph (rows sum to zero, PSD)."""
    n = graph.node_count
    lap = np.zeros((n, n))
    tail, head = graph.edge_tail, graph.edge_head
    lap[tail, head] -= 1.0
    lap[head, tail] -= 1.0
    deg = graph.degrees.astype(float)
    lap[np.arange(n), np.arange(n)] = deg
    return Laplacian(matrix=lap, degrees=deg)


def smooth_eigvectors(graph: IndexGraph, count: int) -> list[np.ndarray]:
    """The ``count`` smoothest Laplacian eigenfields of a 2-way lattice.

    Returns eigenvectors of the graph Laplacian sorted by ascending
    eigenvalue, each reshaped column-major to a ``P_1 x P_2`` matrix.  The
    first field is constant (kernel of the Laplacian).  Signs are fixed so
    the first entry above tolerance is positive, which keeps downstream
    random-field generators deterministic.
    """
    if graph.shape.ndim != 2:
        raise ValueError("smooth eigenfields are defined for 2-way shapes only")
    if not 1 <= count < graph.node_count:
        raise ValueError(
            f"count must be in [1, {graph.node_count - 1}], got {count}"
        )
    lap = laplacian(graph).matrix
    eigvals, eigvecs = np.linalg.eigh(lap)
    fields = []
    p1, p2 = graph.shape.dims
    for l in range(count):
        v = eigvecs[:, l]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            v = -v
        fields.append(v.reshape((p1, p2), order="F"))
    return fields
