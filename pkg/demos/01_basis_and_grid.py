"""Walk through the two geometric building blocks: the lattice graph of a
matrix covariate and the centered orthonormal spline basis.

Run:  python3 demos/01_basis_and_grid.py
"""

import numpy as np

from tensorfen.grid import build_grid_graph, laplacian, smooth_eigvectors
from tensorfen.spline import build_basis

rng = np.random.default_rng(0)

# --- the index lattice of a 6x6 matrix covariate ---------------------------
graph = build_grid_graph((6, 6))
print(f"6x6 lattice: {graph.node_count} nodes, {graph.edge_count} edges")
lap = laplacian(graph)
eigvals = np.linalg.eigvalsh(lap.matrix)
print(f"Laplacian spectrum: min={eigvals[0]:.2e}, max={eigvals[-1]:.2f}, "
      f"rank={np.sum(eigvals > 1e-10)}")

# the smoothest eigenfields drive the simulated coefficient surfaces
fields = smooth_eigvectors(graph, 3)
print("second-smoothest eigenfield (one sign change across the grid):")
print(np.round(fields[1], 2))

# --- the spline basis -------------------------------------------------------
# dimension rule: K = round(n^(1/5)); 600 training samples give K = 4
samples = rng.uniform(size=3000)
basis = build_basis(600, samples)
print(f"\nbasis dimension K = {basis.k} (order {basis.order}), "
      f"interior knots at {np.round(basis.knots[basis.order:-basis.order], 3)}")

xs = np.linspace(0, 1, 5)
print("phi evaluated on a coarse grid (rows = x values):")
print(np.round(basis.design_matrix(xs), 3))

# the three defining properties, checked by quadrature
from tensorfen.spline import _span_quadrature

qx, qw = _span_quadrature(basis.knots, 12)
vals = basis.design_matrix(qx)
gram = (vals * qw[:, None]).T @ vals
print(f"\nmax |integral of phi|      = {np.abs(vals.T @ qw).max():.2e}")
print(f"max |gram - identity|      = {np.abs(gram - np.eye(basis.k)).max():.2e}")
print(f"curvature weights omega    = {np.round(basis.omega, 3)}")
print("(omega[0] = 0: the first basis function is the affine one)")
