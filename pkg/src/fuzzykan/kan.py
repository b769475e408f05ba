"""Kolmogorov-Arnold layers with B-spline learnable edge activations.

Each edge carries phi(x) = w_b * silu(x) + w_s * sum_i c_i * B_i(x); a layer
output sums its incoming edge functions, and stacking layers composes the
outer/inner univariate functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T


@dataclass(frozen=True)
class SplineGrid:
    """Uniform extended knot grid for degree-`order` B-splines.

    The knot vector extends `order` uniform steps beyond each end of
    [lo, hi], giving `intervals + order` basis functions that form a
    partition of unity inside the range.
    """

    order: int = 3
    intervals: int = 5
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("spline order must be >= 0")
        if self.intervals < 1:
            raise ValueError("grid must have at least one interval")
        if not self.lo < self.hi:
            raise ValueError("grid range must satisfy lo < hi")

    @property
    def num_basis(self) -> int:
        return self.intervals + self.order

    def knots(self) -> np.ndarray:
        h = (self.hi - self.lo) / self.intervals
        return self.lo + np.arange(-self.order, self.intervals + self.order + 1) * h


def bspline_basis(x, grid: SplineGrid, with_derivative: bool = False):
    """Cox-de Boor basis values B_i(x) (and optionally dB_i/dx).

    Works on arrays of any shape; the basis index is appended as a trailing
    axis.  Values outside [lo, hi] are evaluated on the extended knots
    rather than clamped.
    """
    t = grid.knots()
    k = grid.order
    x = np.asarray(x, dtype=float)
    xe = x[..., None]

    basis = ((xe >= t[:-1]) & (xe < t[1:])).astype(float)
    # move x == hi from the first extension interval into the top in-range
    # interval, keeping the in-range partition of unity closed on the right
    top = grid.intervals + k - 1
    at_hi = x == grid.hi
    basis[..., top] = np.where(at_hi, 1.0, basis[..., top])
    if k > 0:  # k == 0 has no interval beyond hi to double-count
        basis[..., top + 1] = np.where(at_hi, 0.0, basis[..., top + 1])

    prev = None
    for deg in range(1, k + 1):
        prev = basis
        left = (xe - t[: -(deg + 1)]) / (t[deg:-1] - t[: -(deg + 1)]) * basis[..., :-1]
        right = (t[deg + 1 :] - xe) / (t[deg + 1 :] - t[1:-deg]) * basis[..., 1:]
        basis = left + right

    if not with_derivative:
        return basis

    if k == 0:
        return basis, np.zeros_like(basis)
    deriv = k * (
        prev[..., :-1] / (t[k:-1] - t[:-k - 1]) - prev[..., 1:] / (t[k + 1 :] - t[1:-k])
    )
    return basis, deriv


@dataclass
class KanLayerParams:
    """Trainable state of one KAN layer.

    coeffs: [out, in, num_basis] spline coefficients c_i per edge.
    w_b, w_s: [out, in] scales of the silu base term and the spline term.
    """

    in_features: int
    out_features: int
    grid: SplineGrid
    coeffs: T.Tensor
    w_b: T.Tensor
    w_s: T.Tensor

    def parameters(self):
        return [self.coeffs, self.w_b, self.w_s]


def kan_init(in_features: int, out_features: int, grid: SplineGrid | None = None, seed: int = 0) -> KanLayerParams:
    """Seeded initialization: c ~ N(0, 0.1/sqrt(num_basis)), w_b = w_s = 1."""
    grid = grid or SplineGrid()
    rng = np.random.default_rng(seed)
    scale = 0.1 / np.sqrt(grid.num_basis)
    coeffs = T.Tensor(rng.normal(0.0, scale, (out_features, in_features, grid.num_basis)), requires_grad=True)
    w_b = T.Tensor(np.ones((out_features, in_features)), requires_grad=True)
    w_s = T.Tensor(np.ones((out_features, in_features)), requires_grad=True)
    return KanLayerParams(in_features, out_features, grid, coeffs, w_b, w_s)


def kan_layer_forward(x: T.Tensor, params: KanLayerParams) -> T.Tensor:
    """out[s,j] = sum_p w_b[j,p]*silu(x[s,p]) + w_s[j,p]*sum_i c[j,p,i]*B_i(x[s,p])."""
    if x.ndim != 2 or x.shape[1] != params.in_features:
        raise ValueError(f"expected input [N,{params.in_features}], got {x.shape}")

    basis, dbasis = bspline_basis(x.data, params.grid, with_derivative=True)  # [N,n,nb]
    sil = T.silu_values(x.data)
    c, wb, ws = params.coeffs, params.w_b, params.w_s

    out_data = np.einsum("sp,jp->sj", sil, wb.data, optimize=True)
    out_data += np.einsum("spi,jpi,jp->sj", basis, c.data, ws.data, optimize=True)

    def backward(g):
        T.accumulate_grad(wb, np.einsum("sj,sp->jp", g, sil, optimize=True))
        T.accumulate_grad(
            ws, np.einsum("sj,spi,jpi->jp", g, basis, c.data, optimize=True)
        )
        T.accumulate_grad(
            c, np.einsum("sj,jp,spi->jpi", g, ws.data, basis, optimize=True)
        )
        if x.requires_grad:
            dx = T.silu_derivative(x.data) * np.einsum("sj,jp->sp", g, wb.data, optimize=True)
            dx += np.einsum("sj,jp,jpi,spi->sp", g, ws.data, c.data, dbasis, optimize=True)
            T.accumulate_grad(x, dx)

    return T.from_op(out_data, (x, c, wb, ws), backward)


def kan_stack_forward(x: T.Tensor, layers) -> T.Tensor:
    """Compose kan_layer_forward over a list of layers."""
    out = x
    for i, layer in enumerate(layers):
        if out.shape[1] != layer.in_features:
            raise ValueError(
                f"layer {i} expects {layer.in_features} features, got {out.shape[1]}"
            )
        out = kan_layer_forward(out, layer)
    return out
