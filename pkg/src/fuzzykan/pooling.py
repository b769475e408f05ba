"""Subsampling layers: max, average, and Type-1 fuzzy pooling.

Fuzzy pooling processes each channel's k-by-k window through four stages:
fuzzify with three fixed triangular memberships, aggregate each fuzzified
window with the fuzzy algebraic sum, keep the membership set with the
largest score, and collapse the window by center-of-gravity defuzzification.

The vectorized ``pool`` path reproduces the scalar per-window semantics of
``fuzzy_window_reference`` bit-for-bit (same operations, same fold order),
which the test suite asserts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T

COG_EPS = 1e-12
POOL_KINDS = ("max", "average", "fuzzy")


@dataclass(frozen=True)
class MembershipParams:
    """Breakpoints of the three triangular memberships, derived from r_max.

    With the default r_max = 6: c=1, d=3, a=1.5, m=3, b=4.5, r=3, q=4.5.
    All negative inputs saturate mu1 to 1; inputs above q saturate mu3 to 1.
    """

    r_max: float = 6.0

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")

    @property
    def d(self):
        return self.r_max / 2.0

    @property
    def c(self):
        return self.d / 3.0

    @property
    def a(self):
        return self.r_max / 4.0

    @property
    def m(self):
        return self.r_max / 2.0

    @property
    def b(self):
        return self.m + self.a

    @property
    def r(self):
        return self.r_max / 2.0

    @property
    def q(self):
        return self.r + self.r_max / 4.0

    def breakpoints(self):
        """Distinct abscissae where some membership is non-smooth."""
        return sorted({self.c, self.d, self.a, self.m, self.b, self.r, self.q})


@dataclass(frozen=True)
class PoolConfig:
    kind: str = "max"
    k: int = 2
    stride: int = 2
    membership: MembershipParams = field(default_factory=MembershipParams)

    def __post_init__(self):
        if self.kind not in POOL_KINDS:
            raise ValueError(f"pooling kind must be one of {POOL_KINDS}, got {self.kind!r}")
        if self.k < 1 or self.stride < 1:
            raise ValueError("window size and stride must be >= 1")


@dataclass
class FuzzyPatch:
    """Outcome of fuzzify/aggregate/select for one window."""

    memberships: np.ndarray
    selected: int  # winning membership set, 1-based
    scores: tuple


def membership(v: int, x, params: MembershipParams):
    """Evaluate triangular membership mu_v at x (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if v == 1:
        out = np.where(x > params.d, 0.0, np.where(x < params.c, 1.0, (params.d - x) / (params.d - params.c)))
    elif v == 2:
        out = np.where(
            (x <= params.a) | (x >= params.b),
            0.0,
            np.where(x <= params.m, (x - params.a) / (params.m - params.a), (params.b - x) / (params.b - params.m)),
        )
    elif v == 3:
        out = np.where(x < params.r, 0.0, np.where(x > params.q, 1.0, (x - params.r) / (params.q - params.r)))
    else:
        raise ValueError(f"membership index must be 1, 2 or 3, got {v}")
    return out if out.ndim else float(out)


def membership_derivative(v: int, x, params: MembershipParams):
    """d(mu_v)/dx; at breakpoints the branch whose bound is inclusive wins."""
    x = np.asarray(x, dtype=float)
    if v == 1:
        out = np.where((x >= params.c) & (x <= params.d), -1.0 / (params.d - params.c), 0.0)
    elif v == 2:
        out = np.where(
            (x > params.a) & (x <= params.m),
            1.0 / (params.m - params.a),
            np.where((x > params.m) & (x < params.b), -1.0 / (params.b - params.m), 0.0),
        )
    elif v == 3:
        out = np.where((x >= params.r) & (x <= params.q), 1.0 / (params.q - params.r), 0.0)
    else:
        raise ValueError(f"membership index must be 1, 2 or 3, got {v}")
    return out if out.ndim else float(out)


def fuzzify(patch, params: MembershipParams):
    """Map one crisp patch to its three membership arrays."""
    patch = np.asarray(patch, dtype=float)
    return tuple(membership(v, patch, params) for v in (1, 2, 3))


def algebraic_sum_score(memberships) -> float:
    """Fold the fuzzy algebraic sum x+y-x*y over all entries (row-major)."""
    values = np.ravel(np.asarray(memberships, dtype=float))
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("membership values must lie in [0, 1]")
    s = 0.0
    for p in values:
        s = s + p - s * p
    return float(s)


def select_fuzzy_patch(scores, patches) -> FuzzyPatch:
    """Keep the membership set with the largest score; ties pick lowest v."""
    scores = tuple(float(s) for s in scores)
    v_star = int(np.argmax(scores)) + 1
    return FuzzyPatch(memberships=np.asarray(patches[v_star - 1], dtype=float), selected=v_star, scores=scores)


def defuzzify_cog(patch, memberships) -> float:
    """Center of gravity; a vanishing membership mass falls back to the mean."""
    patch = np.asarray(patch, dtype=float)
    pi = np.asarray(memberships, dtype=float)
    if patch.shape != pi.shape:
        raise ValueError(f"shape mismatch: patch {patch.shape} vs memberships {pi.shape}")
    num = 0.0
    den = 0.0
    for p, w in zip(patch.ravel(), pi.ravel()):
        num = num + w * p
        den = den + w
    if den < COG_EPS:
        s = 0.0
        for p in patch.ravel():
            s = s + p
        return float(s / patch.size)
    return float(num / den)


def fuzzy_window_reference(patch, params: MembershipParams) -> float:
    """Independent scalar implementation of the whole fuzzy-pooling window.

    Deliberately self-contained (own piecewise code, own folds) so it can
    serve as an oracle for the vectorized path.
    """
    patch = np.asarray(patch, dtype=float)
    c, d = params.c, params.d
    a, m, b = params.a, params.m, params.b
    r, q = params.r, params.q

    def mu1(x):
        if x > d:
            return 0.0
        if x < c:
            return 1.0
        return (d - x) / (d - c)

    def mu2(x):
        if x <= a or x >= b:
            return 0.0
        if x <= m:
            return (x - a) / (m - a)
        return (b - x) / (b - m)

    def mu3(x):
        if x < r:
            return 0.0
        if x > q:
            return 1.0
        return (x - r) / (q - r)

    flat = [float(x) for x in patch.ravel()]
    best_v, best_score, best_pi = 0, -1.0, None
    for v, mu in enumerate((mu1, mu2, mu3)):
        pi = [mu(x) for x in flat]
        s = 0.0
        for p in pi:
            s = s + p - s * p
        if s > best_score:
            best_v, best_score, best_pi = v, s, pi

    num = 0.0
    den = 0.0
    for w, x in zip(best_pi, flat):
        num = num + w * x
        den = den + w
    if den < COG_EPS:
        s = 0.0
        for x in flat:
            s = s + x
        return s / len(flat)
    return num / den


# -- vectorized pooling over tensors --------------------------------------


def pool(x: T.Tensor, config: PoolConfig) -> T.Tensor:
    """Apply the configured pooling to [N,C,H,W], per channel slice."""
    if x.ndim != 4:
        raise ValueError("pool expects [N,C,H,W]")
    n, ch, h, w = x.shape
    k, s = config.k, config.stride
    T._check_pool_geometry(h, w, k, s)
    win = T._window_view(x.data, k, s)  # [N,C,Ho,Wo,k,k] view
    ho, wo = win.shape[2], win.shape[3]

    if config.kind == "max":
        flat = win.reshape(n, ch, ho, wo, k * k)
        idx = flat.argmax(axis=-1)  # first occurrence on ties
        out_data = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

        def backward(g):
            dx = np.zeros_like(x.data)
            ni, ci, ii, ji = np.indices((n, ch, ho, wo))
            rows = ii * s + idx // k
            cols = ji * s + idx % k
            np.add.at(dx, (ni, ci, rows, cols), g)
            T.accumulate_grad(x, dx)

        return T.from_op(out_data, (x,), backward)

    if config.kind == "average":
        acc = np.zeros((n, ch, ho, wo), dtype=x.data.dtype)
        for u in range(k):
            for v in range(k):
                acc = acc + win[..., u, v]
        out_data = acc / (k * k)

        def backward(g):
            dx = np.zeros_like(x.data)
            gs = g / (k * k)
            for u in range(k):
                for v in range(k):
                    dx[:, :, u : u + ho * s : s, v : v + wo * s : s] += gs
            T.accumulate_grad(x, dx)

        return T.from_op(out_data, (x,), backward)

    # fuzzy
    params = config.membership
    pis = np.empty((3,) + win.shape, dtype=x.data.dtype)
    for vi in range(3):
        pis[vi] = membership(vi + 1, win, params)

    scores = np.zeros((3, n, ch, ho, wo), dtype=x.data.dtype)
    for u in range(k):
        for v in range(k):
            p = pis[..., u, v]
            scores = scores + p - scores * p

    v_star = scores.argmax(axis=0)  # first max -> lowest v on ties
    sel = np.take_along_axis(pis, v_star[None, ..., None, None], axis=0)[0]

    num = np.zeros((n, ch, ho, wo), dtype=x.data.dtype)
    den = np.zeros((n, ch, ho, wo), dtype=x.data.dtype)
    mean_acc = np.zeros((n, ch, ho, wo), dtype=x.data.dtype)
    for u in range(k):
        for v in range(k):
            num = num + sel[..., u, v] * win[..., u, v]
            den = den + sel[..., u, v]
            mean_acc = mean_acc + win[..., u, v]
    guard = den < COG_EPS
    safe_den = np.where(guard, 1.0, den)
    out_data = np.where(guard, mean_acc / (k * k), num / safe_den)

    def backward(g):
        # selection v* is held constant; memberships are differentiated
        dmu = np.empty_like(pis)
        for vi in range(3):
            dmu[vi] = membership_derivative(vi + 1, win, params)
        dsel = np.take_along_axis(dmu, v_star[None, ..., None, None], axis=0)[0]

        den_e = safe_den[..., None, None]
        num_e = num[..., None, None]
        dwin = (sel + dsel * win) / den_e - num_e * dsel / (den_e * den_e)
        dwin = np.where(guard[..., None, None], 1.0 / (k * k), dwin)

        dx = np.zeros_like(x.data)
        for u in range(k):
            for v in range(k):
                dx[:, :, u : u + ho * s : s, v : v + wo * s : s] += g * dwin[..., u, v]
        T.accumulate_grad(x, dx)

    return T.from_op(out_data, (x,), backward)
