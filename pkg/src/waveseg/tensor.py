"""Dense tensors with reverse-mode automatic differentiation.

The engine is deliberately small: contiguous row-major numpy buffers, a
per-forward-pass tape of parent links and gradient closures, and exactly the
operations the rest of the package needs.  Broadcasting is restricted to
scalar-against-anything; all other binary operations require equal shapes.
Shape changes (tiling a vector over rows or over a spatial grid, pixel
repetition) are explicit operations with their own adjoints, never implicit
broadcasts, so every gradient path is auditable.

Tensors are immutable once produced by an operation; sharing them read-only
across threads is safe.  Gradient accumulation and parameter updates require
exclusive access, and a tape belongs to a single training step.  Calling
``backward`` frees the tape: parent links and closures are dropped, leaf
gradients are kept (and accumulate across backward calls until zeroed).

Set ``set_finite_checks(True)`` to assert that no operation produces NaN/Inf
from finite inputs; the test suite enables this, training leaves it off.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError

_FINITE_CHECKS = False


def set_finite_checks(enabled: bool) -> None:
    """Globally enable/disable NaN/Inf assertions on every op output."""
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


def _check_finite(arr):
    if _FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise AssertionError("operation produced a non-finite value from finite inputs")


def _contig(arr):
    """Row-major copy that, unlike ascontiguousarray, keeps 0-d shapes."""
    arr = np.asarray(arr)
    return arr if arr.ndim == 0 else np.ascontiguousarray(arr)


class Tensor:
    """A dense n-dimensional array, optionally participating in the tape.

    ``data`` is a contiguous row-major float32 or float64 buffer.  ``grad``
    is populated by ``backward`` for leaves with ``requires_grad`` and has
    the same shape as ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.array(data, dtype=dtype, order="C")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._grad_fn = None

    # -- construction -----------------------------------------------------

    @classmethod
    def _wrap(cls, arr, parents, grad_fn):
        """Internal: wrap an op result, recording the tape if any parent needs it."""
        _check_finite(arr)
        out = cls.__new__(cls)
        out.data = arr
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._grad_fn = grad_fn
        else:
            out._parents = ()
            out._grad_fn = None
        return out

    @classmethod
    def zeros(cls, shape, dtype=np.float64, requires_grad=False):
        return cls(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)

    # -- basics -----------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        """A read-only view of the underlying buffer."""
        view = self.data.view()
        view.flags.writeable = False
        return view

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # -- binary elementwise -----------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    @staticmethod
    def _check_binary(a, b):
        if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
            raise DimensionError(
                f"operands have incompatible shapes {a.data.shape} and {b.data.shape}"
            )

    @staticmethod
    def _unbroadcast(g, ref):
        """Reduce a gradient back to the shape of a (possibly scalar) operand."""
        if g.shape == ref.data.shape:
            return g
        return np.asarray(g.sum(), dtype=g.dtype).reshape(ref.data.shape)

    def add(self, other):
        b = self._coerce(other)
        self._check_binary(self, b)
        a = self

        def grad_fn(g):
            return (Tensor._unbroadcast(g, a), Tensor._unbroadcast(g, b))

        return Tensor._wrap(self.data + b.data, (self, b), grad_fn)

    def sub(self, other):
        b = self._coerce(other)
        self._check_binary(self, b)
        a = self

        def grad_fn(g):
            return (Tensor._unbroadcast(g, a), Tensor._unbroadcast(-g, b))

        return Tensor._wrap(self.data - b.data, (self, b), grad_fn)

    def mul(self, other):
        b = self._coerce(other)
        self._check_binary(self, b)
        a = self

        def grad_fn(g):
            return (
                Tensor._unbroadcast(g * b.data, a),
                Tensor._unbroadcast(g * a.data, b),
            )

        return Tensor._wrap(self.data * b.data, (self, b), grad_fn)

    __add__ = add
    __radd__ = add
    __sub__ = sub
    __mul__ = mul
    __rmul__ = mul

    def __rsub__(self, other):
        return self._coerce(other).sub(self)

    # -- unary elementwise ------------------------------------------------

    def neg(self):
        def grad_fn(g):
            return (-g,)

        return Tensor._wrap(-self.data, (self,), grad_fn)

    __neg__ = neg

    def abs(self):
        x = self.data

        def grad_fn(g):
            # Subgradient at exactly 0 is defined as 0.
            return (g * np.sign(x),)

        return Tensor._wrap(np.abs(x), (self,), grad_fn)

    def cos(self):
        x = self.data

        def grad_fn(g):
            return (-g * np.sin(x),)

        return Tensor._wrap(np.cos(x), (self,), grad_fn)

    def sin(self):
        x = self.data

        def grad_fn(g):
            return (g * np.cos(x),)

        return Tensor._wrap(np.sin(x), (self,), grad_fn)

    def sigmoid(self):
        x = self.data
        # exp of a non-positive argument only: stable for large |x|.
        z = np.exp(-np.abs(x))
        y = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

        def grad_fn(g):
            return (g * y * (1.0 - y),)

        return Tensor._wrap(y, (self,), grad_fn)

    def relu(self):
        x = self.data

        def grad_fn(g):
            return (g * (x > 0),)

        return Tensor._wrap(np.maximum(x, 0), (self,), grad_fn)

    def log(self):
        x = self.data

        def grad_fn(g):
            return (g / x,)

        return Tensor._wrap(np.log(x), (self,), grad_fn)

    def pow(self, exponent):
        x = self.data
        p = float(exponent)

        def grad_fn(g):
            return (g * p * x ** (p - 1.0),)

        return Tensor._wrap(x**p, (self,), grad_fn)

    __pow__ = pow

    # -- matmul and reductions ---------------------------------------------

    def matmul(self, other):
        b = other if isinstance(other, Tensor) else Tensor(np.asarray(other))
        a = self
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise DimensionError(
                f"matmul requires rank-2 operands, got {a.data.shape} and {b.data.shape}"
            )
        if a.data.shape[1] != b.data.shape[0]:
            raise DimensionError(
                f"matmul inner extents disagree: {a.data.shape} x {b.data.shape}"
            )

        def grad_fn(g):
            return (g @ b.data.T, a.data.T @ g)

        return Tensor._wrap(a.data @ b.data, (a, b), grad_fn)

    __matmul__ = matmul

    def sum(self, axis=None, keepdims=False):
        x = self.data

        def grad_fn(g):
            if axis is None:
                return (np.full(x.shape, 1.0, dtype=x.dtype) * g,)
            gx = g
            if not keepdims:
                for ax in sorted(np.atleast_1d(axis)):
                    gx = np.expand_dims(gx, int(ax))
            return (np.broadcast_to(gx, x.shape),)

        return Tensor._wrap(np.sum(x, axis=axis, keepdims=keepdims), (self,), grad_fn)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else np.prod(
            [self.data.shape[int(a)] for a in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def softmax(self, axis=-1):
        """Numerically stabilized softmax along ``axis``."""
        x = self.data
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / np.sum(e, axis=axis, keepdims=True)

        def grad_fn(g):
            dot = np.sum(g * y, axis=axis, keepdims=True)
            return (y * (g - dot),)

        return Tensor._wrap(y, (self,), grad_fn)

    # -- structural ops -----------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape

        def grad_fn(g):
            return (g.reshape(old),)

        return Tensor._wrap(_contig(self.data.reshape(shape)), (self,), grad_fn)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.data.ndim)))
        inverse = tuple(np.argsort(axes))

        def grad_fn(g):
            return (_contig(g.transpose(inverse)),)

        return Tensor._wrap(_contig(self.data.transpose(axes)), (self,), grad_fn)

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, key):
        """Basic (slice/int/ellipsis) indexing; the adjoint scatters into zeros."""
        x = self.data
        out = x[key]

        def grad_fn(g):
            gx = np.zeros(x.shape, dtype=x.dtype)
            gx[key] = g
            return (gx,)

        return Tensor._wrap(_contig(out), (self,), grad_fn)

    def tile_rows(self, n):
        """[d] -> [n, d] by row repetition; adjoint sums over rows."""
        if self.data.ndim != 1:
            raise DimensionError(f"tile_rows expects a vector, got shape {self.data.shape}")

        def grad_fn(g):
            return (g.sum(axis=0),)

        return Tensor._wrap(np.tile(self.data, (int(n), 1)), (self,), grad_fn)

    def tile_spatial(self, height, width):
        """[C] -> [C, height, width] by spatial repetition; adjoint sums over space."""
        if self.data.ndim != 1:
            raise DimensionError(f"tile_spatial expects a vector, got shape {self.data.shape}")
        out = np.ascontiguousarray(
            np.broadcast_to(self.data[:, None, None], (self.data.shape[0], height, width))
        )

        def grad_fn(g):
            return (g.sum(axis=(1, 2)),)

        return Tensor._wrap(out, (self,), grad_fn)

    def repeat_pixels(self, factor):
        """[C, H, W] -> [C, H*f, W*f] nearest-neighbor; adjoint sums each block."""
        if self.data.ndim != 3:
            raise DimensionError(f"repeat_pixels expects [C,H,W], got shape {self.data.shape}")
        f = int(factor)
        c, h, w = self.data.shape
        out = np.repeat(np.repeat(self.data, f, axis=1), f, axis=2)

        def grad_fn(g):
            return (g.reshape(c, h, f, w, f).sum(axis=(2, 4)),)

        return Tensor._wrap(out, (self,), grad_fn)

    # -- backward ------------------------------------------------------------

    def backward(self, free_graph=True):
        """Reverse sweep from a scalar; populates ``grad`` on requiring leaves.

        Repeated calls (after fresh forward passes) accumulate into existing
        leaf gradients; zero them between steps.  With ``free_graph`` the tape
        is dropped afterwards, which is the production default.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
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
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones(self.data.shape, dtype=self.data.dtype)
        for node in reversed(order):
            if node._grad_fn is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._grad_fn(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                g = np.asarray(g, dtype=parent.data.dtype)
                parent.grad = g if parent.grad is None else parent.grad + g

        if free_graph:
            for node in order:
                if node._grad_fn is not None:
                    node._grad_fn = None
                    node._parents = ()
                    node.grad = None


class Parameter(Tensor):
    """A named leaf tensor with ``requires_grad`` always on."""

    __slots__ = ("name",)

    def __init__(self, name, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = str(name)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape}, dtype={self.data.dtype})"


def custom_op(data, parents, grad_fn):
    """Build a tensor from a hand-written primitive.

    ``grad_fn(g)`` must return one gradient array (or None) per parent.  Used
    by modules that fuse what would otherwise be long op chains (wavelet
    lifting steps, layer normalization).
    """
    return Tensor._wrap(_contig(data), tuple(parents), grad_fn)


def concat(tensors, axis=0):
    """Concatenate along ``axis``; the adjoint splits the gradient back."""
    tensors = list(tensors)
    arrays = [t.data for t in tensors]
    sizes = [a.shape[axis] for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        return tuple(
            np.ascontiguousarray(np.take(g, range(offsets[i], offsets[i + 1]), axis=axis))
            for i in range(len(tensors))
        )

    return Tensor._wrap(np.concatenate(arrays, axis=axis), tensors, grad_fn)


def softmax(x, axis=-1):
    if not isinstance(x, Tensor):
        x = Tensor(x)
    return x.softmax(axis=axis)


def softmax_np(x, axis=-1):
    """Plain-ndarray softmax used on inference-only paths."""
    x = np.asarray(x)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)
