"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and, when any input requires gradients,
records a backward closure.  Graphs are built dynamically per forward pass;
``backward()`` on a scalar runs the tape in reverse topological order.
Subgraphs that touch no trainable parameter are pruned at construction, so
forward passes through frozen weights cost no tape.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        if requires_grad and parents:
            self._parents = parents
            self._backward = backward
        else:
            self._parents = ()
            self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph ------------------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if not np.isfinite(self.data).all():
            raise FloatingPointError("loss is not finite")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            fn = node._backward
            if fn is not None:
                fn(node.grad)
                node.grad = None  # interior grads are not retained
            node._parents = ()
            node._backward = None

    def _accum(self, g: np.ndarray) -> None:
        self.grad = g if self.grad is None else self.grad + g

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / np.asarray(other, dtype=DTYPE))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = self.data.reshape(shape)
        if not self.requires_grad:
            return Tensor(out_data)
        src_shape = self.data.shape
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g.reshape(src_shape))
        return out

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.data.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        out_data = self.data.transpose(axes)
        if not self.requires_grad:
            return Tensor(out_data)
        inv = np.argsort(axes)
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g.transpose(inv))
        return out

    @property
    def T(self):
        return self.transpose()

    # -- reductions / unary -----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        if not self.requires_grad:
            return Tensor(out_data)
        shape = self.data.shape
        out = Tensor(out_data, True, (self,))

        def bwd(g):
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            self._accum(np.broadcast_to(gg, shape).copy())

        out._backward = bwd
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def relu(self):
        out_data = np.maximum(self.data, 0.0)
        if not self.requires_grad:
            return Tensor(out_data)
        mask = self.data > 0.0
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g * mask)
        return out

    def tanh(self):
        out_data = np.tanh(self.data)
        if not self.requires_grad:
            return Tensor(out_data)
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g * (1.0 - out_data * out_data))
        return out

    def sigmoid(self):
        out_data = 1.0 / (1.0 + np.exp(-self.data))
        if not self.requires_grad:
            return Tensor(out_data)
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g * out_data * (1.0 - out_data))
        return out

    def exp(self):
        out_data = np.exp(self.data)
        if not self.requires_grad:
            return Tensor(out_data)
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g * out_data)
        return out

    def log(self):
        out_data = np.log(self.data)
        if not self.requires_grad:
            return Tensor(out_data)
        src = self.data
        out = Tensor(out_data, True, (self,))
        out._backward = lambda g: self._accum(g / src)
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data
    rg = a.requires_grad or b.requires_grad
    if not rg:
        return Tensor(out_data)
    out = Tensor(out_data, True, (a, b))

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    out._backward = bwd
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data
    rg = a.requires_grad or b.requires_grad
    if not rg:
        return Tensor(out_data)
    out = Tensor(out_data, True, (a, b))

    def bwd(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    out._backward = bwd
    return out


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    out_data = a.data ** p
    if not a.requires_grad:
        return Tensor(out_data)
    src = a.data
    out = Tensor(out_data, True, (a,))
    out._backward = lambda g: a._accum(g * p * src ** (p - 1.0))
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = np.matmul(a.data, b.data)
    rg = a.requires_grad or b.requires_grad
    if not rg:
        return Tensor(out_data)
    out = Tensor(out_data, True, (a, b))

    def bwd(g):
        if a.requires_grad:
            if b.data.ndim == 1:
                ga = np.multiply.outer(g, b.data) if g.ndim else g * b.data
            else:
                ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accum(ga if ga.shape == a.data.shape
                     else _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            if a.data.ndim == 1:
                gb = np.multiply.outer(a.data, g) if g.ndim else a.data * g
            else:
                gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accum(gb if gb.shape == b.data.shape
                     else _unbroadcast(gb, b.data.shape))

    out._backward = bwd
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    if not any(t.requires_grad for t in tensors):
        return Tensor(out_data)
    sizes = [t.data.shape[axis] for t in tensors]
    out = Tensor(out_data, True, tuple(tensors))

    def bwd(g):
        splits = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        for t, gt in zip(tensors, splits):
            if t.requires_grad:
                t._accum(gt)

    out._backward = bwd
    return out


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)
    if not any(t.requires_grad for t in tensors):
        return Tensor(out_data)
    out = Tensor(out_data, True, tuple(tensors))

    def bwd(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accum(np.take(g, i, axis=axis))

    out._backward = bwd
    return out


def gather_rows(t, index) -> Tensor:
    """Row lookup ``t[index]`` along axis 0 (embedding-style gather)."""
    t = as_tensor(t)
    idx = np.asarray(index, dtype=np.intp)
    out_data = t.data[idx]
    if not t.requires_grad:
        return Tensor(out_data)
    shape = t.data.shape
    out = Tensor(out_data, True, (t,))

    def bwd(g):
        gt = np.zeros(shape, dtype=DTYPE)
        np.add.at(gt, idx, g)
        t._accum(gt)

    out._backward = bwd
    return out


def gather_rc(t, rows, cols) -> Tensor:
    """Pointwise 2-d lookup ``t[rows, cols]`` returning a 1-d tensor."""
    t = as_tensor(t)
    r = np.asarray(rows, dtype=np.intp)
    c = np.asarray(cols, dtype=np.intp)
    out_data = t.data[r, c]
    if not t.requires_grad:
        return Tensor(out_data)
    shape = t.data.shape
    out = Tensor(out_data, True, (t,))

    def bwd(g):
        gt = np.zeros(shape, dtype=DTYPE)
        np.add.at(gt, (r, c), g)
        t._accum(gt)

    out._backward = bwd
    return out


def narrow(t, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis."""
    t = as_tensor(t)
    sl = [slice(None)] * t.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    out_data = t.data[sl]
    if not t.requires_grad:
        return Tensor(out_data)
    shape = t.data.shape
    out = Tensor(out_data, True, (t,))

    def bwd(g):
        gt = np.zeros(shape, dtype=DTYPE)
        gt[sl] = g
        t._accum(gt)

    out._backward = bwd
    return out


def softmax(t, axis: int = -1) -> Tensor:
    t = as_tensor(t)
    x = t.data
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e / e.sum(axis=axis, keepdims=True)
    if not t.requires_grad:
        return Tensor(s)
    out = Tensor(s, True, (t,))

    def bwd(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        t._accum(s * (g - dot))

    out._backward = bwd
    return out


def log_softmax(t, axis: int = -1) -> Tensor:
    t = as_tensor(t)
    x = t.data
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out_data = z - lse
    if not t.requires_grad:
        return Tensor(out_data)
    p = np.exp(out_data)
    out = Tensor(out_data, True, (t,))

    def bwd(g):
        t._accum(g - p * g.sum(axis=axis, keepdims=True))

    out._backward = bwd
    return out


def logsumexp(t, axis: int = 0, keepdims: bool = False) -> Tensor:
    """log Σ exp along ``axis``; safe for -inf entries (zero gradient)."""
    t = as_tensor(t)
    x = t.data
    m = np.max(x, axis=axis, keepdims=True)
    msafe = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - msafe)
    s = e.sum(axis=axis, keepdims=True)
    out_k = msafe + np.log(s)
    out_k = np.where(np.isfinite(m), out_k, m)  # all -inf column stays -inf
    out_data = out_k if keepdims else np.squeeze(out_k, axis=axis)
    if not t.requires_grad:
        return Tensor(out_data)
    safe_s = np.where(s > 0.0, s, 1.0)
    p = e / safe_s
    out = Tensor(out_data, True, (t,))

    def bwd(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        t._accum(p * gg)

    out._backward = bwd
    return out


def layer_norm(t, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then rescale."""
    t, gamma, beta = as_tensor(t), as_tensor(gamma), as_tensor(beta)
    x = t.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xn = xc * inv
    out_data = gamma.data * xn + beta.data
    rg = t.requires_grad or gamma.requires_grad or beta.requires_grad
    if not rg:
        return Tensor(out_data)
    out = Tensor(out_data, True, (t, gamma, beta))

    def bwd(g):
        if gamma.requires_grad:
            gamma._accum(_unbroadcast(g * xn, gamma.data.shape))
        if beta.requires_grad:
            beta._accum(_unbroadcast(g, beta.data.shape))
        if t.requires_grad:
            gx = g * gamma.data
            t._accum(inv * (gx - gx.mean(axis=-1, keepdims=True)
                            - xn * (gx * xn).mean(axis=-1, keepdims=True)))

    out._backward = bwd
    return out


def normalized(t, eps: float = 1e-5) -> np.ndarray:
    """The pre-affine layer-norm output, for diagnostics."""
    x = as_tensor(t).data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / np.sqrt(var + eps)


def cross_entropy(logits, targets, reduction: str = "mean") -> Tensor:
    """Softmax cross-entropy of [T, C] logits against integer targets."""
    logp = log_softmax(logits, axis=-1)
    rows = np.arange(len(np.atleast_1d(targets)))
    picked = gather_rc(logp, rows, np.asarray(targets, dtype=np.intp))
    total = -picked.sum()
    if reduction == "mean":
        return total * (1.0 / max(1, len(rows)))
    return total


def pair_bilinear(h, d, u) -> Tensor:
    """out[n, l] = h[n] · U[l] · d[n] for per-pair label scoring.

    ``h`` and ``d`` are [N, A] and [N, B]; ``u`` is [L, A, B].
    """
    h, d, u = as_tensor(h), as_tensor(d), as_tensor(u)
    hd, dd, ud = h.data, d.data, u.data
    out_data = np.einsum("na,lab,nb->nl", hd, ud, dd, optimize=True)
    rg = h.requires_grad or d.requires_grad or u.requires_grad
    if not rg:
        return Tensor(out_data)
    out = Tensor(out_data, True, (h, d, u))

    def bwd(g):
        if h.requires_grad:
            h._accum(np.einsum("nl,lab,nb->na", g, ud, dd, optimize=True))
        if d.requires_grad:
            d._accum(np.einsum("nl,lab,na->nb", g, ud, hd, optimize=True))
        if u.requires_grad:
            u._accum(np.einsum("nl,na,nb->lab", g, hd, dd, optimize=True))

    out._backward = bwd
    return out
