"""Dense float64 tensors with reverse-mode automatic differentiation.

Every primitive records its inputs and a vector-Jacobian closure on the
tensor it produces, together with a global sequence number. ``backward``
walks the records reachable from a scalar root in reverse execution
order, visiting each exactly once, and accumulates gradients into every
tensor that requires them. Repeated ``backward`` calls keep adding into
``grad`` until the grads are reset.

Shapes must match exactly; the only implicit broadcasts are the bias add
over the last axis in ``affine`` and the single scalar factor in
``scalar_mul``. Primitives never clamp: non-finite values propagate.
"""

from __future__ import annotations

import itertools

import numpy as np

_EXECUTION_COUNTER = itertools.count()


class Tensor:
    """A dense float64 array plus the bookkeeping needed for backward."""

    __slots__ = ("data", "requires_grad", "grad", "_children", "_vjp", "_seq")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._children: tuple[Tensor, ...] = ()
        self._vjp = None
        self._seq = next(_EXECUTION_COUNTER)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scalar_mul(other, -1.0))

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scalar_mul(self, float(other))

    def __rmul__(self, other):
        return scalar_mul(self, float(other))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _from_op(data: np.ndarray, children: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(c.requires_grad for c in children)
    out.grad = None
    out._children = children
    out._vjp = vjp if out.requires_grad else None
    out._seq = next(_EXECUTION_COUNTER)
    return out


def _require_same_shape(name: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ValueError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


def _require_tensor(name: str, *args):
    for a in args:
        if not isinstance(a, Tensor):
            raise TypeError(f"{name}: expected Tensor, got {type(a).__name__}")


def backward(root: Tensor):
    """Run reverse-mode accumulation from a scalar root.

    Each call computes the full gradient of ``root`` and adds it into the
    ``grad`` of every reachable tensor with ``requires_grad``.
    """
    if root.data.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")

    nodes = []
    seen = {id(root)}
    stack = [root]
    while stack:
        t = stack.pop()
        nodes.append(t)
        for c in t._children:
            if id(c) not in seen:
                seen.add(id(c))
                stack.append(c)
    nodes.sort(key=lambda t: t._seq, reverse=True)

    pending: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for t in nodes:
        g = pending.pop(id(t), None)
        if g is None:
            continue
        if t.requires_grad:
            t.grad = g.copy() if t.grad is None else t.grad + g
        if t._vjp is None:
            continue
        for child, gc in zip(t._children, t._vjp(g)):
            if gc is None or not child.requires_grad:
                continue
            acc = pending.get(id(child))
            pending[id(child)] = gc if acc is None else acc + gc


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_tensor("add", a, b)
    _require_same_shape("add", a, b)
    return _from_op(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_tensor("mul", a, b)
    _require_same_shape("mul", a, b)
    return _from_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scalar_mul(x: Tensor, s) -> Tensor:
    """Multiply by a python scalar or a single-element Tensor (grad flows to both)."""
    _require_tensor("scalar_mul", x)
    if isinstance(s, Tensor):
        if s.size != 1:
            raise ValueError(f"scalar_mul: scalar factor must have one element, got shape {s.shape}")
        sval = float(s.data.reshape(()))

        def vjp(g, x=x, s=s, sval=sval):
            return g * sval, np.array((g * x.data).sum()).reshape(s.shape)

        return _from_op(x.data * sval, (x, s), vjp)
    sval = float(s)
    return _from_op(x.data * sval, (x,), lambda g: (g * sval,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_tensor("matmul", a, b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul: expected 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    return _from_op(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b over the last axis of x; the one sanctioned broadcast."""
    _require_tensor("affine", x, w, b)
    if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[1]:
        raise ValueError(f"affine: weight/bias mismatch {w.shape} vs {b.shape}")
    if x.ndim < 1 or x.shape[-1] != w.shape[0]:
        raise ValueError(f"affine: shape mismatch {x.shape} vs {w.shape}")

    def vjp(g):
        lead = tuple(range(g.ndim - 1))
        gx = np.matmul(g, w.data.T)
        gw = np.tensordot(x.data, g, axes=(lead, lead))
        gb = g.sum(axis=lead) if lead else g.copy()
        return gx, gw, gb

    return _from_op(np.matmul(x.data, w.data) + b.data, (x, w, b), vjp)


def relu(x: Tensor) -> Tensor:
    _require_tensor("relu", x)
    return _from_op(np.maximum(x.data, 0.0), (x,), lambda g: (g * (x.data > 0.0),))


def log(x: Tensor) -> Tensor:
    _require_tensor("log", x)
    return _from_op(np.log(x.data), (x,), lambda g: (g / x.data,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    _require_tensor("softmax", x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return _from_op(s, (x,), vjp)


def _normalize_axes(name: str, ndim: int, axis) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    axes = tuple(sorted(a % ndim for a in axis))
    if len(set(axes)) != len(axes):
        raise ValueError(f"{name}: repeated axis in {axis}")
    return axes


def tensor_sum(x: Tensor, axis=None) -> Tensor:
    _require_tensor("sum", x)
    axes = _normalize_axes("sum", x.ndim, axis)

    def vjp(g):
        expanded = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(expanded, x.shape).copy(),)

    return _from_op(x.data.sum(axis=axes), (x,), vjp)


def tensor_mean(x: Tensor, axis=None) -> Tensor:
    _require_tensor("mean", x)
    axes = _normalize_axes("mean", x.ndim, axis)
    count = 1
    for a in axes:
        count *= x.shape[a]

    def vjp(g):
        expanded = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(expanded, x.shape) / count,)

    return _from_op(x.data.mean(axis=axes), (x,), vjp)


# spec op names; tensor_* spellings avoid shadowing the builtins inside this module
sum = tensor_sum
mean = tensor_mean


def gather_rows(table: Tensor, ids) -> Tensor:
    """Row lookup table[ids]; gradient scatters back into the table."""
    _require_tensor("gather_rows", table)
    if table.ndim != 2:
        raise ValueError(f"gather_rows: table must be 2-D, got {table.shape}")
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ValueError(f"gather_rows: ids must be integers, got dtype {ids.dtype}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(
            f"gather_rows: ids out of range [0, {table.shape[0]}), got "
            f"[{ids.min()}, {ids.max()}]"
        )

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.ravel(), g.reshape(-1, table.shape[1]))
        return (gt,)

    return _from_op(table.data[ids], (table,), vjp)


def _pad_length_axis(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (padding, padding), (0, 0)))


def _check_seq_input(name: str, x: Tensor):
    if x.ndim != 3:
        raise ValueError(f"{name}: expected (batch, length, dim) input, got {x.shape}")


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor, padding: int = 0, dilation: int = 1) -> Tensor:
    """1-D convolution over the length axis, stride 1.

    Input is zero-padded by `padding` on both sides; consecutive filter
    taps are `dilation` positions apart. Kernel shape is
    (filter_size, dim_in, dim_out).
    """
    _require_tensor("conv1d", x, kernel, bias)
    _check_seq_input("conv1d", x)
    if kernel.ndim != 3 or kernel.shape[1] != x.shape[2]:
        raise ValueError(f"conv1d: shape mismatch {x.shape} vs kernel {kernel.shape}")
    if bias.shape != (kernel.shape[2],):
        raise ValueError(f"conv1d: bias shape {bias.shape} vs kernel {kernel.shape}")
    fsize = kernel.shape[0]
    length = x.shape[1]
    out_len = length + 2 * padding - (fsize - 1) * dilation
    if out_len < 1:
        raise ValueError(
            f"conv1d: input length {length} too short for filter {fsize}, "
            f"padding {padding}, dilation {dilation}"
        )
    xp = _pad_length_axis(x.data, padding)
    out = np.broadcast_to(bias.data, (x.shape[0], out_len, kernel.shape[2])).copy()
    for f in range(fsize):
        out += xp[:, f * dilation : f * dilation + out_len, :] @ kernel.data[f]

    def vjp(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(kernel.data)
        for f in range(fsize):
            window = slice(f * dilation, f * dilation + out_len)
            gxp[:, window, :] += g @ kernel.data[f].T
            gk[f] = np.tensordot(xp[:, window, :], g, axes=((0, 1), (0, 1)))
        gx = gxp[:, padding : padding + length, :] if padding else gxp
        return gx, gk, g.sum(axis=(0, 1))

    return _from_op(out, (x, kernel, bias), vjp)


def _pool_out_len(name: str, length: int, filter_size: int, padding: int, stride: int) -> int:
    out_len = (length + 2 * padding - filter_size) // stride + 1
    if out_len < 1:
        raise ValueError(
            f"{name}: input length {length} too short for filter {filter_size}, padding {padding}"
        )
    return out_len


def avg_pool1d(x: Tensor, filter_size: int, padding: int = 0, stride: int = 1) -> Tensor:
    """Sliding-window mean over the length axis; zero pads count in the average."""
    _require_tensor("avg_pool1d", x)
    _check_seq_input("avg_pool1d", x)
    out_len = _pool_out_len("avg_pool1d", x.shape[1], filter_size, padding, stride)
    xp = _pad_length_axis(x.data, padding)
    out = np.zeros((x.shape[0], out_len, x.shape[2]))
    for w in range(filter_size):
        out += xp[:, w : w + out_len * stride : stride, :]
    out /= filter_size

    def vjp(g):
        gxp = np.zeros_like(xp)
        for w in range(filter_size):
            gxp[:, w : w + out_len * stride : stride, :] += g / filter_size
        return (gxp[:, padding : padding + x.shape[1], :] if padding else gxp,)

    return _from_op(out, (x,), vjp)


def max_pool1d(x: Tensor, filter_size: int, padding: int = 0, stride: int = 1) -> Tensor:
    """Sliding-window max over the length axis.

    Zero pads participate in the max; gradient goes only to the first
    (lowest-index) maximal element of each window, and none of it to pads.
    """
    _require_tensor("max_pool1d", x)
    _check_seq_input("max_pool1d", x)
    out_len = _pool_out_len("max_pool1d", x.shape[1], filter_size, padding, stride)
    xp = _pad_length_axis(x.data, padding)
    windows = np.stack(
        [xp[:, w : w + out_len * stride : stride, :] for w in range(filter_size)], axis=0
    )
    argmax = windows.argmax(axis=0)  # first maximal index on ties
    out = np.take_along_axis(windows, argmax[None], axis=0)[0]

    def vjp(g):
        gxp = np.zeros_like(xp)
        for w in range(filter_size):
            gxp[:, w : w + out_len * stride : stride, :] += g * (argmax == w)
        return (gxp[:, padding : padding + x.shape[1], :] if padding else gxp,)

    return _from_op(out, (x,), vjp)


def safe_log(x: Tensor, eps: float = 1e-8) -> Tensor:
    """log with the argument clamped below at eps.

    Composite of primitives (relu shift), so the no-clamping rule for
    primitives stays intact: for x >= eps this is exactly log(x).
    """
    low = Tensor(np.full(x.shape, eps))
    shifted = add(relu(add(x, scalar_mul(low, -1.0))), low)
    return log(shifted)
