"""Inside a Kolmogorov-Arnold layer.

Each edge (input p -> output j) carries its own learnable univariate
function phi(x) = w_b * silu(x) + w_s * sum_i c_i * B_i(x), where B_i are
cubic B-splines on a uniform grid over [-1, 1].  This script inspects the
basis, fits one edge to a target function, and shows a layer evaluating
and differentiating.
"""

import numpy as np

import fuzzykan.tensor as T
from fuzzykan.kan import SplineGrid, bspline_basis, kan_init, kan_layer_forward

grid = SplineGrid()  # order 3, 5 intervals on [-1, 1] -> 8 basis functions
print("knots:", grid.knots())
print("num basis functions:", grid.num_basis)

x = np.linspace(-1, 1, 5)
basis = bspline_basis(x, grid)
print("\nbasis values at", x)
print(np.round(basis, 4))
print("row sums (partition of unity):", basis.sum(axis=1))

# --- fit a single edge's spline to sin(pi x) -------------------------------
fit_x = np.linspace(-1, 1, 64)
design = bspline_basis(fit_x, grid)
coeffs, *_ = np.linalg.lstsq(design, np.sin(np.pi * fit_x), rcond=None)

layer = kan_init(1, 1, grid)
layer.coeffs.data[0, 0] = coeffs
layer.w_b.data[:] = 0.0  # spline term only

probe = np.linspace(-1, 1, 9)
out = kan_layer_forward(T.Tensor(probe[:, None]), layer).data[:, 0]
print("\nspline fit of sin(pi x):")
for p, o in zip(probe, out):
    print(f"  x={p:+.2f}  spline={o:+.4f}  target={np.sin(np.pi * p):+.4f}")

# --- gradients flow through basis derivatives ------------------------------
xt = T.Tensor(np.array([[0.3]]), requires_grad=True)
loss = T.reduce_sum(kan_layer_forward(xt, layer))
loss.backward()
_, dbasis = bspline_basis(np.array(0.3), grid, with_derivative=True)
print("\nd(output)/dx at 0.3:", float(xt.grad[0, 0]))
print("direct spline derivative:", float(dbasis @ coeffs))
