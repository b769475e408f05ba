"""Assembly of the six compared architectures.

A LeNet backbone (conv 6@5x5 -> act -> pool -> conv 16@5x5 -> act -> pool ->
flatten 400) is combined with one of three pooling kinds and either an MLP
head (400-120-84-10) or a KAN head (400-84-10).  Pooling is parameter-free,
so all three variants of a head share the same parameter count.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .kan import KanLayerParams, SplineGrid, kan_init, kan_stack_forward
from .pooling import MembershipParams, PoolConfig, pool

CHECKPOINT_MAGIC = b"FKAN"
CHECKPOINT_VERSION = 1

DATASET_CHANNELS = {"mnist": 1, "fashion-mnist": 1, "cifar10": 3}
DEFAULT_MLP_WIDTHS = (120, 84)
DEFAULT_KAN_WIDTHS = (84,)


@dataclass(frozen=True)
class ModelConfig:
    dataset: str = "mnist"
    pooling: PoolConfig = field(default_factory=PoolConfig)
    head: str = "mlp"
    conv_activation: str = "relu"
    kan_grid: SplineGrid = field(default_factory=SplineGrid)
    head_widths: tuple | None = None
    kan_squash: bool = False
    seed: int = 42

    def __post_init__(self):
        if self.dataset not in DATASET_CHANNELS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.head not in ("mlp", "kan"):
            raise ValueError(f"head must be 'mlp' or 'kan', got {self.head!r}")
        if self.conv_activation not in ("relu", "tanh"):
            raise ValueError(f"conv activation must be relu or tanh, got {self.conv_activation!r}")

    @property
    def in_channels(self) -> int:
        return DATASET_CHANNELS[self.dataset]

    def resolved_head_widths(self) -> tuple:
        if self.head_widths is not None:
            return tuple(self.head_widths)
        return DEFAULT_MLP_WIDTHS if self.head == "mlp" else DEFAULT_KAN_WIDTHS


def config_to_dict(config: ModelConfig) -> dict:
    return {
        "dataset": config.dataset,
        "pooling": {
            "kind": config.pooling.kind,
            "k": config.pooling.k,
            "stride": config.pooling.stride,
            "r_max": config.pooling.membership.r_max,
        },
        "head": config.head,
        "conv_activation": config.conv_activation,
        "kan_grid": {
            "order": config.kan_grid.order,
            "intervals": config.kan_grid.intervals,
            "lo": config.kan_grid.lo,
            "hi": config.kan_grid.hi,
        },
        "head_widths": list(config.head_widths) if config.head_widths is not None else None,
        "kan_squash": config.kan_squash,
        "seed": config.seed,
    }


def config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(
        dataset=d["dataset"],
        pooling=PoolConfig(
            kind=d["pooling"]["kind"],
            k=d["pooling"]["k"],
            stride=d["pooling"]["stride"],
            membership=MembershipParams(r_max=d["pooling"]["r_max"]),
        ),
        head=d["head"],
        conv_activation=d["conv_activation"],
        kan_grid=SplineGrid(**d["kan_grid"]),
        head_widths=tuple(d["head_widths"]) if d.get("head_widths") is not None else None,
        kan_squash=d.get("kan_squash", False),
        seed=d["seed"],
    )


def config_digest(config: ModelConfig) -> bytes:
    payload = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(payload).digest()


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class Model:
    """An ordered parameter set plus the forward function they define."""

    def __init__(self, config: ModelConfig, params: dict, kan_layers: list, arch: dict):
        self.config = config
        self.params = params  # name -> Tensor, insertion ordered
        self.kan_layers = kan_layers
        self.arch = arch

    def parameters(self):
        return list(self.params.items())

    @property
    def parameter_count(self) -> int:
        return sum(t.size for _, t in self.parameters())

    def zero_grad(self):
        for _, t in self.parameters():
            t.zero_grad()

    def forward(self, batch) -> T.Tensor:
        x = batch if isinstance(batch, T.Tensor) else T.Tensor(batch)
        expected = (self.arch["in_channels"], self.arch["input_hw"], self.arch["input_hw"])
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ValueError(f"expected input [N,{expected[0]},{expected[1]},{expected[2]}], got {x.shape}")
        act = self.config.conv_activation
        p = self.params

        h = T.conv2d(x, p["conv1.weight"], p["conv1.bias"])
        h = T.activate(act, h)
        h = pool(h, self.config.pooling)
        h = T.conv2d(h, p["conv2.weight"], p["conv2.bias"])
        h = T.activate(act, h)
        h = pool(h, self.config.pooling)
        h = T.flatten(h)

        if self.config.head == "mlp":
            n_hidden = len(self.config.resolved_head_widths())
            for i in range(n_hidden + 1):
                h = T.bias_add(h @ p[f"fc{i}.weight"], p[f"fc{i}.bias"])
                if i < n_hidden:
                    h = T.activate(act, h)
            return h
        if self.config.kan_squash:
            h = T.activate("tanh", h)
        return kan_stack_forward(h, self.kan_layers)

    # -- checkpointing ---------------------------------------------------

    def save(self, path):
        digest = config_digest(self.config)
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<I", CHECKPOINT_VERSION))
            f.write(struct.pack("<I", len(digest)))
            f.write(digest)
            items = self.parameters()
            f.write(struct.pack("<I", len(items)))
            for name, t in items:
                encoded = name.encode()
                f.write(struct.pack("<I", len(encoded)))
                f.write(encoded)
                f.write(struct.pack("<I", t.ndim))
                f.write(struct.pack(f"<{t.ndim}I", *t.shape))
                f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, config: ModelConfig) -> "Model":
        model = build(config)
        with open(path, "rb") as f:
            if f.read(4) != CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a FKAN checkpoint")
            (version,) = struct.unpack("<I", f.read(4))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {version}")
            (dlen,) = struct.unpack("<I", f.read(4))
            digest = f.read(dlen)
            if digest != config_digest(config):
                raise ValueError(f"{path}: checkpoint config digest does not match")
            (count,) = struct.unpack("<I", f.read(4))
            for _ in range(count):
                (nlen,) = struct.unpack("<I", f.read(4))
                name = f.read(nlen).decode()
                (rank,) = struct.unpack("<I", f.read(4))
                dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
                values = np.frombuffer(
                    f.read(8 * int(np.prod(dims))), dtype="<f8"
                ).reshape(dims)
                if name not in model.params:
                    raise ValueError(f"{path}: unexpected tensor {name!r}")
                target = model.params[name]
                if target.shape != dims:
                    raise ValueError(f"{path}: tensor {name!r} shape {dims} != {target.shape}")
                target.data = values.astype(target.data.dtype)
        return model


def build_lenet(
    config: ModelConfig,
    input_hw: int = 32,
    conv_channels: tuple = (6, 16),
    conv_kernel: int = 5,
    n_classes: int = 10,
) -> Model:
    """Construct a model; the non-default arguments exist for tiny test builds."""
    rng = np.random.default_rng(config.seed)
    c_in = config.in_channels
    f1, f2 = conv_channels
    k1, k2 = (conv_kernel, conv_kernel) if isinstance(conv_kernel, int) else conv_kernel
    pk, ps = config.pooling.k, config.pooling.stride

    def after_pool(hw, k):
        hw = hw - k + 1
        if hw < pk or (hw - pk) % ps != 0:
            raise ValueError(f"pooling {pk}/{ps} does not tile feature map of size {hw}")
        return (hw - pk) // ps + 1

    hw1 = after_pool(input_hw, k1)
    hw2 = after_pool(hw1, k2)
    flat = f2 * hw2 * hw2

    params: dict[str, T.Tensor] = {}

    def param(name, values):
        t = T.Tensor(values, requires_grad=True)
        params[name] = t
        return t

    param("conv1.weight", _glorot_uniform(rng, (f1, c_in, k1, k1), c_in * k1 * k1, f1 * k1 * k1))
    param("conv1.bias", np.zeros(f1))
    param("conv2.weight", _glorot_uniform(rng, (f2, f1, k2, k2), f1 * k2 * k2, f2 * k2 * k2))
    param("conv2.bias", np.zeros(f2))

    kan_layers: list[KanLayerParams] = []
    widths = (flat,) + config.resolved_head_widths() + (n_classes,)
    if config.head == "mlp":
        for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
            param(f"fc{i}.weight", _glorot_uniform(rng, (n_in, n_out), n_in, n_out))
            param(f"fc{i}.bias", np.zeros(n_out))
    else:
        for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
            layer = kan_init(n_in, n_out, config.kan_grid, seed=rng.integers(2**31))
            params[f"kan{i}.coeffs"] = layer.coeffs
            params[f"kan{i}.w_b"] = layer.w_b
            params[f"kan{i}.w_s"] = layer.w_s
            kan_layers.append(layer)

    arch = {
        "input_hw": input_hw,
        "in_channels": c_in,
        "conv_channels": conv_channels,
        "conv_kernel": (k1, k2),
        "flatten_width": flat,
        "n_classes": n_classes,
    }
    return Model(config, params, kan_layers, arch)


def build(config: ModelConfig) -> Model:
    return build_lenet(config)


def variant(config: ModelConfig, **changes) -> ModelConfig:
    """Convenience for deriving one of the six compared configurations."""
    return replace(config, **changes)
