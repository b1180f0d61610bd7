"""The nine candidate edge operations.

Every operation maps a (batch, length, dim) tensor to the same shape:
three plain 1-D convolutions, three dilated ones, two stride-1 poolings,
and the zero map used to prune an edge. Settings are fixed per kind.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autograd as ag
from .autograd import Tensor

# canonical order; argmax ties in derivation break toward the lower index
OP_KINDS = (
    "Conv3",
    "Conv5",
    "Conv7",
    "Dilated2",
    "Dilated4",
    "Dilated6",
    "AvgPool",
    "MaxPool",
    "None",
)

# kind -> (filter_size, padding, dilation); dilation None means a plain window
_OP_TABLE = {
    "Conv3": (3, 1, None),
    "Conv5": (5, 2, None),
    "Conv7": (7, 3, None),
    "Dilated2": (3, 2, 2),
    "Dilated4": (3, 4, 4),
    "Dilated6": (3, 6, 6),
    "AvgPool": (3, 1, None),
    "MaxPool": (3, 1, None),
    "None": (None, None, None),
}

_CONV_KINDS = frozenset({"Conv3", "Conv5", "Conv7", "Dilated2", "Dilated4", "Dilated6"})

OP_FAMILIES = {
    "Conv": ("Conv3", "Conv5", "Conv7"),
    "DilatedConv": ("Dilated2", "Dilated4", "Dilated6"),
    "Pooling": ("AvgPool", "MaxPool"),
    "None": ("None",),
}


@dataclass
class OperationSpec:
    """One candidate operation with its settings and (for convs) parameters."""

    kind: str
    filter_size: int | None
    padding: int | None
    dilation: int | None
    kernel: Tensor | None = None
    bias: Tensor | None = None

    def parameters(self) -> list[Tensor]:
        if self.kernel is None:
            return []
        return [self.kernel, self.bias]

    def is_conv(self) -> bool:
        return self.kind in _CONV_KINDS


def make_op(kind: str) -> OperationSpec:
    if kind not in _OP_TABLE:
        raise ValueError(f"unknown operation kind {kind!r}")
    fsize, padding, dilation = _OP_TABLE[kind]
    return OperationSpec(kind=kind, filter_size=fsize, padding=padding, dilation=dilation)


def init_parameters(op: OperationSpec, dim: int, rng_seed) -> OperationSpec:
    """Return a copy of `op` with freshly drawn parameters.

    Conv kernels are uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)),
    fan_in = filter_size * dim and fan_out = dim; biases start at zero.
    Pooling and the zero map carry no parameters. Deterministic per seed.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    if not op.is_conv():
        return replace(op, kernel=None, bias=None)
    rng = np.random.default_rng(rng_seed)
    fan_in = op.filter_size * dim
    s = np.sqrt(6.0 / (fan_in + dim))
    kernel = Tensor(rng.uniform(-s, s, size=(op.filter_size, dim, dim)), requires_grad=True)
    bias = Tensor(np.zeros(dim), requires_grad=True)
    return replace(op, kernel=kernel, bias=bias)


def apply(op: OperationSpec, x: Tensor) -> Tensor:
    """Apply one candidate operation; output shape equals input shape."""
    if x.ndim != 3:
        raise ValueError(f"apply({op.kind}): expected (batch, length, dim) input, got {x.shape}")
    if op.kind == "None":
        return ag.scalar_mul(x, 0.0)
    if op.kind == "AvgPool":
        return ag.avg_pool1d(x, op.filter_size, padding=op.padding)
    if op.kind == "MaxPool":
        return ag.max_pool1d(x, op.filter_size, padding=op.padding)
    if op.kernel is None:
        raise ValueError(f"apply({op.kind}): parameters not initialized")
    return ag.conv1d(x, op.kernel, op.bias, padding=op.padding, dilation=op.dilation or 1)


def op_family(kind: str) -> str:
    for family, kinds in OP_FAMILIES.items():
        if kind in kinds:
            return family
    raise ValueError(f"unknown operation kind {kind!r}")


def op_settings(kind: str) -> dict:
    """Settings dict as exported in architecture JSON."""
    fsize, padding, dilation = _OP_TABLE[kind]
    return {"filter_size": fsize, "padding": padding, "dilation": dilation}
