"""Diagnostic property suites: gradient, pooling-oracle, and spline checks.

These back the `fuzzykan check` CLI subcommand and are reused by the test
suite.  Gradient checks compare analytic gradients against central finite
differences; fuzzy-pooling inputs are kept away from membership breakpoints
and score ties, where the piecewise definitions are legitimately
non-differentiable.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .kan import SplineGrid, bspline_basis, kan_init, kan_stack_forward
from .model import ModelConfig, build_lenet
from .pooling import MembershipParams, PoolConfig, fuzzy_window_reference, pool

GRAD_TOL = 1e-4
FD_STEP = 1e-5
BREAKPOINT_MARGIN = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all entries."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def finite_difference_grad(loss_fn, t: T.Tensor, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of scalar loss_fn() w.r.t. tensor t."""
    grad = np.zeros_like(t.data)
    flat = t.data.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        up = loss_fn()
        flat[i] = original - h
        down = loss_fn()
        flat[i] = original
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def gradient_check(loss_builder, tensors, h: float = FD_STEP) -> float:
    """Max relative error between backward() gradients and finite differences.

    loss_builder() must rebuild the forward graph from the tensors' current
    data and return the scalar loss Tensor.
    """
    for t in tensors:
        t.zero_grad()
    loss = loss_builder()
    loss.backward()
    analytic = [np.array(t.grad, copy=True) for t in tensors]

    worst = 0.0
    for t, a in zip(tensors, analytic):
        numeric = finite_difference_grad(lambda: float(loss_builder().data), t, h=h)
        worst = max(worst, relative_error(a, numeric))
    return worst


def _away_from(values: np.ndarray, points, margin: float) -> bool:
    values = np.asarray(values)
    return all(np.abs(values - p).min() > margin for p in points)


def sample_fuzzy_safe_input(shape, rng, params: MembershipParams, lo=-1.0, hi=8.0, margin=BREAKPOINT_MARGIN):
    """Random values in [lo, hi] at least `margin` from every breakpoint."""
    points = params.breakpoints()
    x = rng.uniform(lo, hi, shape)
    for _ in range(100):
        bad = np.zeros(x.shape, dtype=bool)
        for p in points:
            bad |= np.abs(x - p) <= margin
        if not bad.any():
            return x
        x[bad] = rng.uniform(lo, hi, int(bad.sum()))
    raise RuntimeError("could not sample inputs away from membership breakpoints")


def _fuzzy_score_margins(x: np.ndarray, config: PoolConfig) -> float:
    """Smallest gap between the winning score and the runner-up, any window."""
    from .pooling import fuzzify

    win = T._window_view(np.asarray(x, dtype=float), config.k, config.stride)
    gaps = []
    for patch in win.reshape(-1, config.k, config.k):
        scores = []
        for pi in fuzzify(patch, config.membership):
            s = 0.0
            for p in pi.ravel():
                s = s + p - s * p
            scores.append(s)
        top, second = sorted(scores)[-1], sorted(scores)[-2]
        gaps.append(top - second)
    return min(gaps)


def check_pool_oracle(n_windows: int = 1000, k: int = 2, seed: int = 0):
    """Vectorized pooling vs the scalar per-window reference, exact match.

    Returns (ok, max_abs_diff) over all three pooling kinds.
    """
    rng = np.random.default_rng(seed)
    params = MembershipParams()
    worst = 0.0
    x = rng.uniform(-1.0, 8.0, (n_windows, 1, k, k))
    for kind in ("max", "average", "fuzzy"):
        config = PoolConfig(kind=kind, k=k, stride=k)
        out = pool(T.Tensor(x), config).data.reshape(-1)
        for w in range(n_windows):
            patch = x[w, 0]
            if kind == "max":
                expected = patch.max()
            elif kind == "average":
                s = 0.0
                for v in patch.ravel():
                    s = s + v
                expected = s / patch.size
            else:
                expected = fuzzy_window_reference(patch, params)
            worst = max(worst, abs(out[w] - expected))
    return worst == 0.0, worst


def check_spline(grid: SplineGrid | None = None, n_points: int = 2001):
    """Partition of unity and non-negativity across the grid range."""
    grid = grid or SplineGrid()
    x = np.linspace(grid.lo, grid.hi, n_points)
    basis = bspline_basis(x, grid)
    deviation = float(np.abs(basis.sum(axis=-1) - 1.0).max())
    min_value = float(basis.min())
    ok = deviation < 1e-9 and min_value >= -1e-15
    return ok, deviation, min_value


def tiny_fuzzy_kan_setup(seed: int = 0, head: str = "kan", pooling_kind: str = "fuzzy"):
    """A 2-filter, 8x8-input model plus a batch safe for finite differences.

    Scans seeds until every non-smooth point (relu kinks, membership
    breakpoints, argmax/score ties) is comfortably far from the realized
    activations, so central differences are valid.
    """
    for trial in range(seed, seed + 200):
        rng = np.random.default_rng(trial)
        config = ModelConfig(
            dataset="mnist",
            pooling=PoolConfig(kind=pooling_kind, k=2, stride=2),
            head=head,
            head_widths=(3,),
            seed=trial,
        )
        model = build_lenet(config, input_hw=8, conv_channels=(2, 2), conv_kernel=(3, 2), n_classes=3)
        images = rng.uniform(0.0, 1.0, (2, 1, 8, 8))
        labels = rng.integers(0, 3, 2)
        if _setup_is_smooth(model, images, config):
            return model, images, labels
    raise RuntimeError("no finite-difference-safe seed found")


def _setup_is_smooth(model, images, config) -> bool:
    margin = BREAKPOINT_MARGIN
    p = model.params
    act = config.conv_activation
    x = T.Tensor(images)
    h = T.conv2d(x, p["conv1.weight"], p["conv1.bias"])
    if np.abs(h.data).min() <= margin:  # relu kink
        return False
    h = T.activate(act, h)
    if not _pool_input_is_smooth(h.data, config):
        return False
    h = pool(h, config.pooling)
    h = T.conv2d(h, p["conv2.weight"], p["conv2.bias"])
    if np.abs(h.data).min() <= margin:
        return False
    h = T.activate(act, h)
    if not _pool_input_is_smooth(h.data, config):
        return False
    h = pool(h, config.pooling)
    flat = h.data.reshape(h.shape[0], -1)
    if config.head == "mlp":
        hh = T.flatten(h)
        widths = config.resolved_head_widths()
        for i in range(len(widths)):
            hh = T.bias_add(hh @ p[f"fc{i}.weight"], p[f"fc{i}.bias"])
            if np.abs(hh.data).min() <= margin:
                return False
            hh = T.activate(act, hh)
    else:
        # spline pieces join with C^(order-1) smoothness; only order < 2
        # would make knot crossings a finite-difference hazard
        if model.kan_layers[0].grid.order < 2:
            knots = model.kan_layers[0].grid.knots()
            if not _away_from(flat, knots, margin):
                return False
    return True


def _pool_input_is_smooth(values, config) -> bool:
    margin = BREAKPOINT_MARGIN
    if config.pooling.kind == "fuzzy":
        if not _away_from(values, config.pooling.membership.breakpoints(), margin):
            return False
        if _fuzzy_score_margins(values, config.pooling) <= margin:
            return False
        return True
    if config.pooling.kind == "max":
        win = T._window_view(np.asarray(values, dtype=float), config.pooling.k, config.pooling.stride)
        for patch in win.reshape(-1, config.pooling.k * config.pooling.k):
            top, second = np.sort(patch)[-2:][::-1]
            if top - second <= margin:
                return False
    return True


def check_gradients(seed: int = 0):
    """Finite-difference check of the tiny fuzzy-KAN composite.

    Returns (ok, worst_relative_error).
    """
    model, images, labels = tiny_fuzzy_kan_setup(seed=seed)
    tensors = [t for _, t in model.parameters()]
    x = T.Tensor(images, requires_grad=True)
    tensors.append(x)

    def loss_builder():
        return T.softmax_cross_entropy(model.forward(x), labels)

    worst = gradient_check(loss_builder, tensors)
    return worst < GRAD_TOL, worst


def check_kan_gradients(seed: int = 0):
    """Finite-difference check of a small 2-layer KAN stack."""
    rng = np.random.default_rng(seed)
    grid = SplineGrid()
    layers = [kan_init(4, 3, grid, seed=seed), kan_init(3, 2, grid, seed=seed + 1)]
    x = T.Tensor(rng.uniform(-2.0, 2.0, (3, 4)), requires_grad=True)
    labels = rng.integers(0, 2, 3)
    tensors = [x] + [t for layer in layers for t in layer.parameters()]

    def loss_builder():
        return T.softmax_cross_entropy(kan_stack_forward(x, layers), labels)

    worst = gradient_check(loss_builder, tensors)
    return worst < GRAD_TOL, worst
