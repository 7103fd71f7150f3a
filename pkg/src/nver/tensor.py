"""Dense tensor values with reverse-mode differentiation.

A :class:`Tensor` wraps a contiguous row-major numpy float buffer and
remembers how it was produced. Calling :meth:`Tensor.backward` on a result
walks the recorded operations in reverse topological order, accumulating
gradients into every tensor that contributed to it.

Training runs in float32; gradient checking rebuilds the same graph in
float64 (finite differences are unreliable at single precision). Operations
therefore never hard-code a dtype: results inherit the dtype of their
inputs, and scalar constants are python floats so numpy keeps the array
dtype unchanged.

Only the broadcasting the model layers actually need is implemented:
matrix products against 2-D weight matrices, bias vectors over leading
axes, and same-shape elementwise arithmetic.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

Array = np.ndarray


class Tensor:
    """N-dimensional float array with an optional gradient slot.

    ``data`` is always C-contiguous, so ``data.ravel()`` is the flat
    row-major buffer and ``prod(shape) == data.size`` holds by construction.
    ``grad`` is ``None`` until a backward pass deposits into it.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(
        self,
        data: Array,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[], None] | None = None,
    ):
        data = np.asarray(data)
        if data.ndim and not data.flags.c_contiguous:
            data = np.ascontiguousarray(data)  # keeps 0-d scalars 0-d
        self.data = data
        self.grad: Array | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: Array | None = None) -> None:
        """Run reverse-mode accumulation from this tensor.

        ``seed`` defaults to ones, which for the usual scalar-loss case is
        d(loss)/d(loss) = 1. Visits every reachable node exactly once, in
        reverse topological order.
        """
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        if seed is None:
            seed = np.ones_like(self.data)
        _accumulate(self, np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"


def tensor(data, dtype=np.float32) -> Tensor:
    """Create a leaf tensor from array-like data."""
    return Tensor(np.asarray(data, dtype=dtype))


def _accumulate(t: Tensor, grad: Array) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += grad


# ---------------------------------------------------------------------------
# elementwise and linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``a @ b``.

    Supports ``[..., m, k] @ [k, n]`` (shared weight matrix, gradient summed
    over leading axes) and ``[..., m, k] @ [..., k, n]`` with identical
    leading axes. Anything else is a shape error.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul leading dimensions differ: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def backward():
        g = out.grad
        if b.ndim == 2:
            _accumulate(a, g @ b.data.T)
            a2 = a.data.reshape(-1, a.shape[-1])
            g2 = g.reshape(-1, g.shape[-1])
            _accumulate(b, a2.T @ g2)
        else:
            _accumulate(a, g @ np.swapaxes(b.data, -1, -2))
            _accumulate(b, np.swapaxes(a.data, -1, -2) @ g)

    out._backward = backward
    return out


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a vector ``bias`` of shape ``[n]`` onto ``x`` of shape ``[..., n]``."""
    if bias.ndim != 1 or x.shape[-1] != bias.shape[0]:
        raise ShapeError(f"bias {bias.shape} does not match input {x.shape}")
    out = Tensor(x.data + bias.data, (x, bias))

    def backward():
        _accumulate(x, out.grad)
        _accumulate(bias, out.grad.reshape(-1, bias.shape[0]).sum(axis=0))

    out._backward = backward
    return out


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeError(f"add shapes differ: {x.shape} vs {y.shape}")
    out = Tensor(x.data + y.data, (x, y))

    def backward():
        _accumulate(x, out.grad)
        _accumulate(y, out.grad)

    out._backward = backward
    return out


def mul(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeError(f"mul shapes differ: {x.shape} vs {y.shape}")
    out = Tensor(x.data * y.data, (x, y))

    def backward():
        _accumulate(x, out.grad * y.data)
        _accumulate(y, out.grad * x.data)

    out._backward = backward
    return out


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(x.data * c, (x,))

    def backward():
        _accumulate(x, out.grad * c)

    out._backward = backward
    return out


def add_const(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data + float(c), (x,))

    def backward():
        _accumulate(x, out.grad)

    out._backward = backward
    return out


def mul_array(x: Tensor, mask: Array) -> Tensor:
    """Multiply by a constant array of the same shape (dropout masks)."""
    if x.shape != mask.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match input {x.shape}")
    out = Tensor(x.data * mask, (x,))

    def backward():
        _accumulate(x, out.grad * mask)

    out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0), (x,))

    def backward():
        _accumulate(x, out.grad * (x.data > 0))

    out._backward = backward
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data), (x,))

    def backward():
        _accumulate(x, out.grad / x.data)

    out._backward = backward
    return out


def power(x: Tensor, exponent: float) -> Tensor:
    """Elementwise ``x ** exponent`` for a constant real exponent."""
    exponent = float(exponent)
    out = Tensor(x.data**exponent, (x,))

    def backward():
        _accumulate(x, out.grad * exponent * x.data ** (exponent - 1.0))

    out._backward = backward
    return out


def softmax(x: Tensor) -> Tensor:
    """Softmax over the trailing axis, stabilized by row-max subtraction."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, (x,))

    def backward():
        g = out.grad
        dot = (g * s).sum(axis=-1, keepdims=True)
        _accumulate(x, (g - dot) * s)

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))

    def backward():
        _accumulate(x, out.grad.reshape(x.shape))

    out._backward = backward
    return out


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    out = Tensor(np.transpose(x.data, axes), (x,))

    def backward():
        _accumulate(x, np.transpose(out.grad, inverse))

    out._backward = backward
    return out


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward():
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * out.ndim
            index[axis] = slice(lo, hi)
            _accumulate(part, out.grad[tuple(index)])

    out._backward = backward
    return out


def pick(x: Tensor, indices: Array) -> Tensor:
    """Select ``x[i, indices[i]]`` from a ``[batch, n]`` tensor."""
    if x.ndim != 2:
        raise ShapeError(f"pick expects a 2-D tensor, got {x.shape}")
    rows = np.arange(x.shape[0])
    out = Tensor(x.data[rows, indices], (x,))

    def backward():
        g = np.zeros_like(x.data)
        np.add.at(g, (rows, indices), out.grad)
        _accumulate(x, g)

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def sum_last(x: Tensor) -> Tensor:
    """Sum over the trailing axis: ``[..., n] -> [...]``."""
    out = Tensor(x.data.sum(axis=-1), (x,))

    def backward():
        _accumulate(x, np.broadcast_to(out.grad[..., None], x.shape))

    out._backward = backward
    return out


def mean_all(x: Tensor) -> Tensor:
    """Mean of all entries, as a 0-d tensor."""
    out = Tensor(np.asarray(x.data.mean(), dtype=x.data.dtype), (x,))

    def backward():
        _accumulate(x, np.full_like(x.data, out.grad / x.size))

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# convolution and pooling over [batch, channels, length]
# ---------------------------------------------------------------------------


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Valid 1-D cross-correlation, stride 1.

    ``x`` is ``[batch, c_in, length]``, ``weight`` is ``[c_out, c_in, k]``,
    ``bias`` is ``[c_out]``. Output length is ``length - k + 1``.
    """
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv1d input {x.shape} does not match weight {weight.shape}")
    k = weight.shape[2]
    if x.shape[2] < k:
        raise ShapeError(
            f"conv1d input length {x.shape[2]} shorter than kernel {k}"
        )
    # im2col: windows[b, c_in, l_out, k]
    windows = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=2)
    out_data = np.tensordot(windows, weight.data, axes=([1, 3], [1, 2]))
    out_data = np.ascontiguousarray(out_data.transpose(0, 2, 1)) + bias.data[:, None]
    out = Tensor(out_data, (x, weight, bias))

    def backward():
        g = out.grad  # [b, c_out, l_out]
        _accumulate(bias, g.sum(axis=(0, 2)))
        _accumulate(weight, np.tensordot(g, windows, axes=([0, 2], [0, 2])))
        # route each kernel tap back to the input positions it read
        gx = np.zeros_like(x.data)
        spread = np.tensordot(g, weight.data, axes=(1, 0))  # [b, l_out, c_in, k]
        spread = spread.transpose(0, 2, 1, 3)  # [b, c_in, l_out, k]
        l_out = g.shape[2]
        for tap in range(k):
            gx[:, :, tap : tap + l_out] += spread[:, :, :, tap]
        _accumulate(x, gx)

    out._backward = backward
    return out


def _segment_maxpool(x: Tensor, starts: Array, ends: Array) -> Tensor:
    """Max over per-output segments of the length axis of ``[b, c, l]``."""
    b, c, _ = x.shape
    n_out = len(starts)
    out_data = np.empty((b, c, n_out), dtype=x.data.dtype)
    argmax = np.empty((b, c, n_out), dtype=np.int64)
    # group output positions by segment width so each group is one vectorized max
    widths = ends - starts
    for width in np.unique(widths):
        sel = np.nonzero(widths == width)[0]
        idx = starts[sel][:, None] + np.arange(width)[None, :]
        seg = x.data[:, :, idx]  # [b, c, len(sel), width]
        out_data[:, :, sel] = seg.max(axis=-1)
        argmax[:, :, sel] = starts[sel][None, None, :] + seg.argmax(axis=-1)
    out = Tensor(out_data, (x,))

    def backward():
        gx = np.zeros_like(x.data)
        bi, ci, _ = np.indices(argmax.shape)
        np.add.at(gx, (bi, ci, argmax), out.grad)
        _accumulate(x, gx)

    out._backward = backward
    return out


def maxpool1d(x: Tensor, window: int = 2, stride: int = 2) -> Tensor:
    """Max pooling over ``[batch, channels, length]``; trailing remainder is dropped.

    Gradient is routed to the argmax position of each window only (first
    index wins ties).
    """
    length = x.shape[2]
    if length < window:
        raise ShapeError(f"maxpool window {window} exceeds length {length}")
    n_out = (length - window) // stride + 1
    starts = np.arange(n_out) * stride
    return _segment_maxpool(x, starts, starts + window)


def adaptive_maxpool1d(x: Tensor, out_length: int) -> Tensor:
    """Max pooling to a fixed number of output positions.

    Segment ``i`` covers ``[floor(i*l/out), ceil((i+1)*l/out))``; segments
    tile the input, so the output width is independent of the input length.
    """
    length = x.shape[2]
    if length < 1:
        raise ShapeError("adaptive maxpool needs a non-empty length axis")
    i = np.arange(out_length)
    starts = (i * length) // out_length
    ends = -((-(i + 1) * length) // out_length)  # ceil division
    return _segment_maxpool(x, starts, ends)
