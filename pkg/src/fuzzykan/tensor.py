"""Dense N-dimensional tensors with reverse-mode automatic differentiation.

Every layer in the library is a composition of the primitives defined here,
so gradients of arbitrary model compositions are obtained mechanically by
calling ``backward()`` on a scalar loss.

Numerics policy: float64 by default (float32 opt-in via
``set_default_dtype``), and the forward reductions of ``matmul`` and
``conv2d`` accumulate in strict row-major sequential order so that they
agree bit-for-bit with naive nested-loop reference implementations.
"""

from __future__ import annotations

import itertools

import numpy as np

_DEFAULT_DTYPE = np.float64
_DEBUG = False
_MACHINE_EPS = np.finfo(np.float64).eps
_node_counter = itertools.count()


def set_default_dtype(dtype):
    """Set the dtype used for newly created tensors (float64 or float32)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}; use float64 or float32")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


def set_debug_checks(enabled: bool):
    """Enable per-op finite checks and div-by-near-zero detection."""
    global _DEBUG
    _DEBUG = bool(enabled)


def debug_checks_enabled() -> bool:
    return _DEBUG


class Tensor:
    """A dense array plus an optional gradient buffer and graph linkage.

    Tensors created by primitive ops remember their parents and a backward
    rule; ``backward()`` on a scalar walks the recorded graph once in
    reverse topological order, accumulating gradients into every reachable
    tensor that has ``requires_grad`` set.
    """

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self.node_id = next(_node_counter)
        self._parents = ()
        self._backward = None
        self._backward_done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph traversal -------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(node) into .grad for every reachable node.

        ``self`` must be a scalar.  Calling backward a second time on the
        same node is an error: the graph's saved intermediates are only
        valid for one pass and gradients would double-accumulate.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        if self._backward_done:
            raise RuntimeError("backward already called on this graph; build a fresh graph")

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        self._backward_done = True

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return elementwise("add", self, other)

    def __radd__(self, other):
        return elementwise("add", self, other)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __mul__(self, other):
        return elementwise("mul", self, other)

    def __rmul__(self, other):
        return elementwise("mul", self, other)

    def __truediv__(self, other):
        return elementwise("div", self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return elementwise("mul", self, -1.0)


def accumulate_grad(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def from_op(data, parents, backward):
    """Wrap an op result, wiring the graph only if a parent needs grad."""
    out = Tensor(data)
    if _DEBUG and not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite values produced by a forward op")
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _as_operand(b):
    """Split an operand into (tensor-or-None, raw value)."""
    if isinstance(b, Tensor):
        return b, b.data
    return None, float(b)


# -- elementwise arithmetic ----------------------------------------------


def elementwise(kind: str, a: Tensor, b):
    """Elementwise add/sub/mul/div of equal-shape tensors or tensor-scalar.

    Broadcasting beyond a scalar right operand is deliberately unsupported.
    """
    if kind not in ("add", "sub", "mul", "div"):
        raise ValueError(f"unknown elementwise kind {kind!r}")
    b_t, b_val = _as_operand(b)
    if b_t is not None and b_t.data.size != 1 and b_t.shape != a.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b_t.shape}")

    if kind == "add":
        out_data = a.data + b_val
    elif kind == "sub":
        out_data = a.data - b_val
    elif kind == "mul":
        out_data = a.data * b_val
    else:
        if _DEBUG and np.any(np.abs(b_val) < _MACHINE_EPS):
            raise ZeroDivisionError("division by value below machine epsilon")
        out_data = a.data / b_val

    def backward(g):
        if kind == "add":
            accumulate_grad(a, g)
            if b_t is not None:
                accumulate_grad(b_t, g if b_t.shape == a.shape else g.sum().reshape(b_t.shape))
        elif kind == "sub":
            accumulate_grad(a, g)
            if b_t is not None:
                gb = -g
                accumulate_grad(b_t, gb if b_t.shape == a.shape else gb.sum().reshape(b_t.shape))
        elif kind == "mul":
            accumulate_grad(a, g * b_val)
            if b_t is not None:
                gb = g * a.data
                accumulate_grad(b_t, gb if b_t.shape == a.shape else gb.sum().reshape(b_t.shape))
        else:
            accumulate_grad(a, g / b_val)
            if b_t is not None:
                gb = -g * a.data / (b_val * b_val)
                accumulate_grad(b_t, gb if b_t.shape == a.shape else gb.sum().reshape(b_t.shape))

    parents = (a,) if b_t is None else (a, b_t)
    return from_op(out_data, parents, backward)


def add(a, b):
    return elementwise("add", a, b)


def sub(a, b):
    return elementwise("sub", a, b)


def mul(a, b):
    return elementwise("mul", a, b)


def div(a, b):
    return elementwise("div", a, b)


# -- linear algebra -------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-D tensors; forward sums over k sequentially."""
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} x {b.shape}")

    # optimize=False + C-contiguous operands keeps the k-accumulation
    # strictly sequential, so results match a triple-loop reference exactly
    out_data = np.einsum(
        "ik,kj->ij",
        np.ascontiguousarray(a.data),
        np.ascontiguousarray(b.data),
        optimize=False,
    )

    def backward(g):
        accumulate_grad(a, g @ b.data.T)
        accumulate_grad(b, a.data.T @ g)

    return from_op(out_data, (a, b), backward)


def _window_view(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Strided [N,C,Ho,Wo,k,k] view over k-by-k windows (no copy)."""
    n, c, h, w = x.shape
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1
    s0, s1, s2, s3 = x.strides
    return np.lib.stride_tricks.as_strided(
        x, (n, c, ho, wo, k, k), (s0, s1, s2 * stride, s3 * stride, s2, s3)
    )


def _check_pool_geometry(h, w, k, stride):
    if (h - k) % stride != 0 or (w - k) % stride != 0 or h < k or w < k:
        raise ValueError(
            f"window {k}x{k} with stride {stride} does not tile input {h}x{w} exactly"
        )


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None, stride: int = 1) -> Tensor:
    """Valid (no-padding) 2-D cross-correlation.

    out[n,f,i,j] = bias[f] + sum_{c,u,v} x[n,c,i*s+u,j*s+v] * kernels[f,c,u,v]
    """
    if x.ndim != 4 or kernels.ndim != 4:
        raise ValueError("conv2d expects input [N,C,H,W] and kernels [F,C,k,k]")
    n, c, h, w = x.shape
    f, ck, kh, kw = kernels.shape
    if ck != c or kh != kw:
        raise ValueError(f"kernel shape {kernels.shape} incompatible with input {x.shape}")
    k = kh
    _check_pool_geometry(h, w, k, stride)
    ho = (h - k) // stride + 1
    wo = (w - k) // stride + 1

    win = _window_view(x.data, k, stride)
    # im2col with the reduction axis ordered (c, u, v) to match the naive
    # nested-loop summation order
    col = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * k * k)
    w_t = np.ascontiguousarray(kernels.data.reshape(f, c * k * k).T)
    out2 = np.einsum("ik,kj->ij", col, w_t, optimize=False)
    if bias is not None:
        out2 = out2 + bias.data[None, :]
    out_data = out2.reshape(n, ho, wo, f).transpose(0, 3, 1, 2)

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        if bias is not None:
            accumulate_grad(bias, g2.sum(axis=0))
        accumulate_grad(kernels, (g2.T @ col).reshape(f, c, k, k))
        if x.requires_grad:
            dcol = g2 @ w_t.T
            dwin = dcol.reshape(n, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
            dx = np.zeros_like(x.data)
            for u in range(k):
                for v in range(k):
                    dx[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride] += dwin[
                        :, :, :, :, u, v
                    ]
            accumulate_grad(x, dx)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return from_op(out_data, parents, backward)


# -- activations ----------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def silu_values(z: np.ndarray) -> np.ndarray:
    """SiLU on raw arrays: z * sigmoid(z)."""
    return z * _sigmoid(z)


def silu_derivative(z: np.ndarray) -> np.ndarray:
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def activate(kind: str, x: Tensor) -> Tensor:
    """Elementwise relu / silu / tanh with analytic backward."""
    if kind == "relu":
        out_data = np.maximum(x.data, 0.0)
        # derivative at 0 taken from the x <= 0 branch
        dact = (x.data > 0).astype(x.data.dtype)
    elif kind == "silu":
        out_data = silu_values(x.data)
        dact = silu_derivative(x.data)
    elif kind == "tanh":
        out_data = np.tanh(x.data)
        dact = 1.0 - out_data * out_data
    else:
        raise ValueError(f"unknown activation {kind!r}")

    def backward(g):
        accumulate_grad(x, g * dact)

    return from_op(out_data, (x,), backward)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax likelihood over a batch of class indices."""
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be [N,K], got {logits.shape}")
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"labels must lie in [0, {k})")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    log_probs = z - np.log(denom)
    loss = -log_probs[np.arange(n), labels].mean()
    softmax = ez / denom

    def backward(g):
        d = softmax.copy()
        d[np.arange(n), labels] -= 1.0
        accumulate_grad(logits, float(g) * d / n)

    return from_op(loss, (logits,), backward)


# -- shape and reduction primitives ---------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def backward(g):
        accumulate_grad(x, g.reshape(x.shape))

    return from_op(out_data, (x,), backward)


def flatten(x: Tensor) -> Tensor:
    """Collapse all but the leading (batch) dimension."""
    return reshape(x, (x.shape[0], -1))


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the trailing two dimensions by `pad` on every side."""
    if x.ndim != 4:
        raise ValueError("pad2d expects [N,C,H,W]")
    out_data = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

    def backward(g):
        accumulate_grad(x, g[:, :, pad:-pad or None, pad:-pad or None])

    return from_op(out_data, (x,), backward)


def window_extract(x: Tensor, k: int, stride: int) -> Tensor:
    """Materialize k-by-k stride-s patches as a [N,C,Ho,Wo,k,k] tensor."""
    if x.ndim != 4:
        raise ValueError("window_extract expects [N,C,H,W]")
    _, _, h, w = x.shape
    _check_pool_geometry(h, w, k, stride)
    win = _window_view(x.data, k, stride)
    out_data = win.copy()
    n, c, ho, wo = out_data.shape[:4]

    def backward(g):
        dx = np.zeros_like(x.data)
        for u in range(k):
            for v in range(k):
                dx[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride] += g[
                    :, :, :, :, u, v
                ]
        accumulate_grad(x, dx)

    return from_op(out_data, (x,), backward)


def reduce_sum(x: Tensor, axis=None) -> Tensor:
    out_data = x.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            accumulate_grad(x, np.broadcast_to(g, x.shape).copy())
        else:
            accumulate_grad(x, np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    return from_op(out_data, (x,), backward)


def reduce_mean(x: Tensor, axis=None) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    out_data = x.data.mean(axis=axis)

    def backward(g):
        if axis is None:
            accumulate_grad(x, np.broadcast_to(g / count, x.shape).copy())
        else:
            accumulate_grad(x, np.broadcast_to(np.expand_dims(g / count, axis), x.shape).copy())

    return from_op(out_data, (x,), backward)


def reduce_max(x: Tensor, axis: int) -> Tensor:
    """Max along one axis; gradient routes to the first occurrence."""
    out_data = x.data.max(axis=axis)
    idx = x.data.argmax(axis=axis)

    def backward(g):
        dx = np.zeros_like(x.data)
        np.put_along_axis(
            dx, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis
        )
        accumulate_grad(x, dx)

    return from_op(out_data, (x,), backward)


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """Add a length-K bias row to every row of a [N,K] tensor."""
    if x.ndim != 2 or b.ndim != 1 or b.shape[0] != x.shape[1]:
        raise ValueError(f"bias_add expects [N,K] and [K], got {x.shape} and {b.shape}")
    out_data = x.data + b.data[None, :]

    def backward(g):
        accumulate_grad(x, g)
        accumulate_grad(b, g.sum(axis=0))

    return from_op(out_data, (x, b), backward)


def gather_rows(x: Tensor, indices) -> Tensor:
    """Select rows by index with scatter-add backward."""
    indices = np.asarray(indices)
    out_data = x.data[indices]

    def backward(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, indices, g)
        accumulate_grad(x, dx)

    return from_op(out_data, (x,), backward)
