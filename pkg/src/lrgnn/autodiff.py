"""Reverse-mode automatic differentiation over numpy arrays.

A small tape: each op records a closure that pushes the output gradient
back to its inputs. Graphs are built implicitly by doing arithmetic on
``Tensor`` objects; ``Tensor.backward()`` walks the tape in reverse
topological order. Tensors that do not require gradients short-circuit
the bookkeeping, so the same code path doubles as a plain-numpy forward.

The dispatch helpers at the bottom (``relu``, ``sigmoid``, ...) accept
either ``Tensor`` or ``ndarray`` and run the identical numpy kernels, so
taped and untaped evaluations are bit-identical.
"""

from __future__ import annotations

import numpy as np


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _sigmoid_raw(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


class Tensor:
    """Array node on the gradient tape."""

    # Make numpy defer to our reflected operators instead of looping ufuncs
    # over the object.
    __array_ufunc__ = None

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor to every reachable parameter."""
        if not self.requires_grad:
            raise RuntimeError(
                "backward() on a tensor with no recorded computation; "
                "run a forward pass over tensors that require gradients first"
            )
        if seed is None:
            if self.data.shape != ():
                raise RuntimeError("backward() without a seed needs a scalar tensor")
            seed = np.ones_like(self.data)

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
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        self._accumulate(_as_array(seed))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data + other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor._make(out_data, (self, other), bw)

    __radd__ = __add__

    def __neg__(self):
        def bw(g):
            self._accumulate(-g)

        return Tensor._make(-self.data, (self,), bw)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data - other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-g, other.data.shape))

        return Tensor._make(out_data, (self, other), bw)

    def __rsub__(self, other):
        return Tensor(other) - self

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data * other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor._make(out_data, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data / other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-g * self.data / (other.data * other.data), other.data.shape)
                )

        return Tensor._make(out_data, (self, other), bw)

    def __rtruediv__(self, other):
        return Tensor(other) / self

    def __matmul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")
        out_data = self.data @ other.data

        def bw(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return Tensor._make(out_data, (self, other), bw)

    def __rmatmul__(self, other):
        return Tensor(other) @ self

    @property
    def T(self) -> "Tensor":
        def bw(g):
            self._accumulate(g.T)

        return Tensor._make(self.data.T, (self,), bw)

    # -- elementwise nonlinearities -------------------------------------------

    def relu(self) -> "Tensor":
        out_data = np.maximum(self.data, 0.0)

        def bw(g):
            self._accumulate(g * (self.data > 0.0))

        return Tensor._make(out_data, (self,), bw)

    def sigmoid(self) -> "Tensor":
        s = _sigmoid_raw(self.data)

        def bw(g):
            self._accumulate(g * s * (1.0 - s))

        return Tensor._make(s, (self,), bw)

    def log1p(self) -> "Tensor":
        def bw(g):
            self._accumulate(g / (1.0 + self.data))

        return Tensor._make(np.log1p(self.data), (self,), bw)

    def sqrt(self) -> "Tensor":
        root = np.sqrt(self.data)

        def bw(g):
            self._accumulate(g * (0.5 / root))

        return Tensor._make(root, (self,), bw)

    def square(self) -> "Tensor":
        def bw(g):
            self._accumulate(g * (2.0 * self.data))

        return Tensor._make(self.data * self.data, (self,), bw)

    # -- reductions and structure ----------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out_data = np.sum(self.data, axis=axis, keepdims=keepdims)

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return Tensor._make(out_data, (self,), bw)


# ---------------------------------------------------------------------------
# Functions over Tensor or ndarray. Each pair of branches runs the same
# numpy kernel, keeping taped and plain evaluations bit-identical.
# ---------------------------------------------------------------------------


def relu(x):
    return x.relu() if isinstance(x, Tensor) else np.maximum(x, 0.0)


def sigmoid(x):
    return x.sigmoid() if isinstance(x, Tensor) else _sigmoid_raw(x)


def log1p(x):
    return x.log1p() if isinstance(x, Tensor) else np.log1p(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Tensor) else np.sqrt(x)


def square(x):
    return x.square() if isinstance(x, Tensor) else x * x


def tsum(x, axis=None, keepdims: bool = False):
    if isinstance(x, Tensor):
        return x.sum(axis=axis, keepdims=keepdims)
    return np.sum(x, axis=axis, keepdims=keepdims)


def minimum(a, b):
    """Elementwise min; ties route the gradient to the first operand."""
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return np.minimum(a, b)
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    out_data = np.minimum(a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * (a.data <= b.data), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * (b.data < a.data), b.data.shape))

    return Tensor._make(out_data, (a, b), bw)


def maximum(a, b):
    """Elementwise max; ties route the gradient to the first operand."""
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return np.maximum(a, b)
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    out_data = np.maximum(a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * (a.data >= b.data), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * (b.data > a.data), b.data.shape))

    return Tensor._make(out_data, (a, b), bw)


def concat(parts, axis: int = 1):
    """Concatenate along `axis`; parts may mix Tensor and ndarray."""
    if not any(isinstance(p, Tensor) for p in parts):
        return np.concatenate(parts, axis=axis)
    tensors = [p if isinstance(p, Tensor) else Tensor(p) for p in parts]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor._make(out_data, tuple(tensors), bw)


def gather_rows(x, idx: np.ndarray):
    """Select rows `x[idx]`; the gradient scatter-adds back."""
    idx = np.asarray(idx, dtype=np.intp)
    if not isinstance(x, Tensor):
        return x[idx]
    out_data = x.data[idx]

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        x._accumulate(gx)

    return Tensor._make(out_data, (x,), bw)


def scatter_max(messages, targets: np.ndarray, n_rows: int):
    """Per-row elementwise max of `messages` grouped by `targets`.

    Rows of the output with no contributing message are zero. The
    gradient is routed to exactly one contributor per coordinate: the
    first maximal message in list order, so callers control tie-breaking
    by how they order the message rows.
    """
    targets = np.asarray(targets, dtype=np.intp)
    is_tensor = isinstance(messages, Tensor)
    msg_data = messages.data if is_tensor else messages
    out_data = np.zeros((n_rows, msg_data.shape[1]), dtype=np.float64)
    groups: list[np.ndarray | None] = [None] * n_rows
    for n in range(n_rows):
        idx = np.nonzero(targets == n)[0]
        if idx.size:
            groups[n] = idx
            out_data[n] = msg_data[idx].max(axis=0)
    if not is_tensor:
        return out_data

    def bw(g):
        gm = np.zeros_like(msg_data)
        for n, idx in enumerate(groups):
            if idx is None:
                continue
            winners = idx[msg_data[idx].argmax(axis=0)]
            gm[winners, np.arange(msg_data.shape[1])] += g[n]
        messages._accumulate(gm)

    return Tensor._make(out_data, (messages,), bw)


def scatter_sum(values, targets: np.ndarray, n_rows: int):
    """Sum `values` (1-D, one entry per target) into `n_rows` bins."""
    targets = np.asarray(targets, dtype=np.intp)
    is_tensor = isinstance(values, Tensor)
    val_data = values.data if is_tensor else values
    out_data = np.zeros(n_rows, dtype=np.float64)
    np.add.at(out_data, targets, val_data)
    if not is_tensor:
        return out_data

    def bw(g):
        values._accumulate(g[targets])

    return Tensor._make(out_data, (values,), bw)


def value(x) -> np.ndarray:
    """Underlying ndarray of a Tensor, or the array itself."""
    return x.data if isinstance(x, Tensor) else np.asarray(x)
