"""Dense double-precision tensors with reverse-mode automatic differentiation.

The graph is built define-by-run: every operation links its output tensor to
its parents together with a vector-Jacobian closure. ``backward`` replays the
recorded chain in reverse topological order, visiting each node exactly once.
Graphs are single-use; a second backward through the same loss raises.

A tensor and the graph hanging off it belong to one thread for the duration
of a forward/backward episode. Distinct episodes on distinct tensors may run
concurrently; there is no shared mutable state besides the debug flag below.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Raised when operand dimensions do not satisfy an operation's contract."""


# When True, every forward op asserts its output is finite. Costs a pass over
# the data, so it is off by default and flipped on in tests / debugging.
CHECK_FINITE = False

_grad_enabled = True


class no_grad:
    """Context manager that suspends graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """N-d array of float64 with optional gradient tracking.

    ``grad`` is populated (as a same-shape ndarray) by ``backward``; it
    accumulates across episodes until ``zero_grad`` resets it.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_vjp", "_consumed")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._consumed = False

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
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        """Run reverse-mode differentiation from this scalar loss."""
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Small operator sugar; the heavy ops live at module level.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if CHECK_FINITE and not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite values in forward op output")
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad = t.grad + g


def _topo(root: Tensor) -> list[Tensor]:
    """Reverse-postorder (topological) list of graph nodes, iteratively."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on.

    Each recorded operation's vjp runs exactly once. The graph cannot be
    replayed: a second backward through the same loss raises RuntimeError.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward already ran on this graph; rebuild the forward pass")
    loss._consumed = True
    order = _topo(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        _accumulate(node, g)
        if node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg
        # Free the closure so intermediate buffers can be collected.
        node._vjp = None


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data
    return _node(
        data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data
    return _node(
        data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data
    return _node(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def scale(a: Tensor, s: float) -> Tensor:
    return _node(a.data * s, (a,), lambda g: (g * s,))


def relu(a: Tensor) -> Tensor:
    # Gradient at exactly 0 is 0, by convention.
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sqrt(a: Tensor) -> Tensor:
    root = np.sqrt(a.data)
    return _node(root, (a,), lambda g: (g / (2.0 * root),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def transpose2d(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose2d expects a matrix, got shape {a.shape}")
    return _node(np.ascontiguousarray(a.data.T), (a,), lambda g: (g.T,))


def sum_all(a: Tensor) -> Tensor:
    return _node(
        np.asarray(a.data.sum()),
        (a,),
        lambda g: (np.broadcast_to(g, a.data.shape).copy(),),
    )


def mean_axes(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Mean over ``axes`` with those axes kept as size-1 dims."""
    count = 1
    for ax in axes:
        count *= a.data.shape[ax]
    data = a.data.mean(axis=axes, keepdims=True)
    return _node(
        data,
        (a,),
        lambda g: (np.broadcast_to(g / count, a.data.shape).copy(),),
    )


def l2norm(a: Tensor) -> Tensor:
    """Euclidean norm over all elements (not squared, not averaged)."""
    return sqrt(sum_all(mul(a, a)))


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape[0]}x{a.shape[1]} @ {b.shape[0]}x{b.shape[1]}"
        )
    data = a.data @ b.data
    return _node(data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def softmax_rows(m: Tensor) -> Tensor:
    """Row-wise softmax of a matrix, with max subtraction for stability."""
    if m.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {m.shape}")
    shifted = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return (y * (g - dot),)

    return _node(y, (m,), vjp)


# ---------------------------------------------------------------------------
# image-shaped ops (N, C, H, W)


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each (sample, channel) plane to zero mean, unit variance.

    No learned affine terms; population variance over the spatial plane.
    """
    if x.ndim != 4:
        raise ShapeError(f"instance_norm expects (N,C,H,W), got shape {x.shape}")
    m = x.data.shape[2] * x.data.shape[3]
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    xc = x.data - mu
    var = (xc * xc).sum(axis=(2, 3), keepdims=True) / m
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def vjp(g):
        gm = g.mean(axis=(2, 3), keepdims=True)
        gym = (g * y).mean(axis=(2, 3), keepdims=True)
        return ((g - gm - y * gym) * inv,)

    return _node(y, (x,), vjp)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Replicate each pixel into a factor x factor block."""
    if x.ndim != 4:
        raise ShapeError(f"upsample_nearest expects (N,C,H,W), got shape {x.shape}")
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return _node(x.data.copy(), (x,), lambda g: (g,))
    n, c, h, w = x.data.shape
    data = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def vjp(g):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return _node(data, (x,), vjp)


def pad2d(x: Tensor, pad: int, mode: str = "zero") -> Tensor:
    """Pad the two spatial dims by ``pad`` on every side, zero or reflect."""
    if x.ndim != 4:
        raise ShapeError(f"pad2d expects (N,C,H,W), got shape {x.shape}")
    if pad == 0:
        return x
    n, c, h, w = x.data.shape
    widths = ((0, 0), (0, 0), (pad, pad), (pad, pad))
    if mode == "zero":
        data = np.pad(x.data, widths, mode="constant")
        return _node(data, (x,), lambda g: (g[:, :, pad:-pad, pad:-pad],))
    if mode == "reflect":
        if h <= pad or w <= pad:
            raise ShapeError(f"reflect pad {pad} needs spatial dims > pad, got {h}x{w}")
        data = np.pad(x.data, widths, mode="reflect")
        # Each padded position mirrors a source pixel; fold gradients back by
        # scatter-adding through the same reflection index map.
        idx = np.pad(
            np.arange(h * w).reshape(h, w), ((pad, pad), (pad, pad)), mode="reflect"
        ).ravel()

        def vjp(g):
            hp, wp = h + 2 * pad, w + 2 * pad
            flat = np.zeros((h * w, n * c))
            np.add.at(flat, idx, g.transpose(2, 3, 0, 1).reshape(hp * wp, n * c))
            return (flat.reshape(h, w, n, c).transpose(2, 3, 0, 1).copy(),)

        return _node(data, (x,), vjp)
    raise ValueError(f"unknown padding mode {mode!r}")


def _conv_core(xp: Tensor, kernel: Tensor, bias: Tensor, stride: int) -> Tensor:
    x = np.ascontiguousarray(xp.data)
    w = np.ascontiguousarray(kernel.data)
    b = np.ascontiguousarray(bias.data)
    data = kernels.conv2d_forward(x, w, b, stride)
    _, _, hp, wp = x.shape
    _, _, kh, kw = w.shape

    def vjp(g):
        g = np.ascontiguousarray(g)
        dx = kernels.conv2d_grad_input(w, g, stride, hp, wp) if xp.requires_grad else None
        dw = kernels.conv2d_grad_kernel(x, g, stride, kh, kw) if kernel.requires_grad else None
        db = g.sum(axis=(0, 2, 3)) if bias.requires_grad else None
        return (dx, dw, db)

    return _node(data, (xp, kernel, bias), vjp)


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor,
    stride: int = 1,
    padding: str = "zero",
    pad_size: int = 0,
) -> Tensor:
    """2-D cross-correlation over an (N,C,H,W) batch.

    Output height is (H + 2*pad_size - kH)/stride + 1 and the division must
    be exact, otherwise the shape contract is violated and we raise.
    """
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be (N,C,H,W), got shape {x.shape}")
    if kernel.ndim != 4:
        raise ShapeError(f"conv2d kernel must be (O,C,kH,kW), got shape {kernel.shape}")
    if bias.ndim != 1 or bias.shape[0] != kernel.shape[0]:
        raise ShapeError(
            f"bias shape {bias.shape} does not match {kernel.shape[0]} output channels"
        )
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels but kernel expects {kernel.shape[1]}"
        )
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if pad_size < 0:
        raise ShapeError(f"pad_size must be >= 0, got {pad_size}")
    _, _, h, w = x.shape
    _, _, kh, kw = kernel.shape
    hp, wp = h + 2 * pad_size, w + 2 * pad_size
    if kh > hp or kw > wp:
        raise ShapeError(
            f"kernel {kh}x{kw} larger than padded input {hp}x{wp}"
        )
    if (hp - kh) % stride != 0 or (wp - kw) % stride != 0:
        raise ShapeError(
            f"output size not exact: padded {hp}x{wp}, kernel {kh}x{kw}, stride {stride}"
        )
    return _conv_core(pad2d(x, pad_size, padding), kernel, bias, stride)


# ---------------------------------------------------------------------------
# verification oracle


def finite_diff_grad(f, x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``, coordinate-wise.

    ``f`` must be deterministic; it receives a fresh Tensor each call and may
    return a Tensor or a float.
    """

    def ev(arr):
        with no_grad():
            out = f(Tensor(arr))
        return out.item() if isinstance(out, Tensor) else float(out)

    base = x.data.copy()
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = ev(base)
        flat[i] = orig - h
        fm = ev(base)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
