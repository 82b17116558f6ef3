"""A small graph-based reverse-mode autodiff over numpy float64 arrays.

Each ``Tensor`` keeps its parents and a closure that pushes the output
gradient back to them; ``backward`` walks the graph in reverse topological
order. Only the primitives the policy needs are implemented. Applying any
other numpy ufunc to a ``Tensor`` raises ``InvalidArgument``.
"""
import numpy as np

from ..errors import InvalidArgument


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Tensor:
    __array_priority__ = 1000

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad = None
        self.name = name

    # ------------------------------------------------------------------ basics
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return self.transpose()

    def item(self):
        return float(self.data)

    def __float__(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r})"

    def _make(self, data, parents, backward):
        if not any(p.requires_grad for p in parents):
            return Tensor(data)
        return Tensor(data, parents, backward)

    def backward(self, grad=None):
        if grad is None:
            if self.size != 1:
                raise InvalidArgument("backward without a seed gradient needs a scalar")
            grad = np.ones_like(self.data)
        order, seen = [], set()

        def visit(t):
            stack = [(t, False)]
            while stack:
                node, done = stack.pop()
                if done:
                    order.append(node)
                    continue
                if id(node) in seen:
                    continue
                seen.add(id(node))
                stack.append((node, True))
                for p in node.parents:
                    if p.requires_grad and id(p) not in seen:
                        stack.append((p, False))

        visit(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node.parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for p, gp in zip(node.parents, node._backward(g)):
                if gp is None or not p.requires_grad:
                    continue
                grads[id(p)] = grads[id(p)] + gp if id(p) in grads else gp

    # ------------------------------------------------------------------ arithmetic
    def __add__(self, other):
        o = as_tensor(other)
        a, b = self.shape, o.shape
        return self._make(self.data + o.data, (self, o),
                          lambda g: (_unbroadcast(g, a) if self.requires_grad else None,
                                     _unbroadcast(g, b) if o.requires_grad else None))

    __radd__ = __add__

    def __neg__(self):
        return self._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        o = as_tensor(other)
        a, b = self.data, o.data
        return self._make(a * b, (self, o),
                          lambda g: (_unbroadcast(g * b, a.shape) if self.requires_grad else None,
                                     _unbroadcast(g * a, b.shape) if o.requires_grad else None))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = as_tensor(other)
        a, b = self.data, o.data
        return self._make(a / b, (self, o),
                          lambda g: (_unbroadcast(g / b, a.shape),
                                     _unbroadcast(-g * a / (b * b), b.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, k):
        if isinstance(k, Tensor):
            raise InvalidArgument("tensor exponents are not supported")
        a = self.data
        return self._make(a ** k, (self,), lambda g: (g * k * a ** (k - 1),))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    # ------------------------------------------------------------------ elementwise
    def tanh(self):
        y = np.tanh(self.data)
        return self._make(y, (self,), lambda g: (g * (1.0 - y * y),))

    def exp(self):
        y = np.exp(self.data)
        return self._make(y, (self,), lambda g: (g * y,))

    def log(self):
        a = self.data
        return self._make(np.log(a), (self,), lambda g: (g / a,))

    def clip(self, lo, hi):
        a = self.data
        inside = (a >= lo) & (a <= hi)
        return self._make(np.clip(a, lo, hi), (self,), lambda g: (g * inside,))

    # ------------------------------------------------------------------ reductions and shape
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims=False):
        n = self.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return self._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.ndim)))
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return self._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    def __getitem__(self, idx):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)
        return self._make(self.data[idx], (self,), back)

    def log_softmax(self, axis=-1):
        a = self.data
        z = a - a.max(axis=axis, keepdims=True)
        y = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
        p = np.exp(y)
        return self._make(y, (self,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))

    def softmax(self, axis=-1):
        return self.log_softmax(axis).exp()

    # ------------------------------------------------------------------ numpy interop
    _UFUNCS = {
        np.add: lambda a, b: as_tensor(a) + b,
        np.subtract: lambda a, b: as_tensor(a) - b,
        np.multiply: lambda a, b: as_tensor(a) * b,
        np.true_divide: lambda a, b: as_tensor(a) / b,
        np.negative: lambda a: -as_tensor(a),
        np.matmul: lambda a, b: matmul(a, b),
        np.tanh: lambda a: as_tensor(a).tanh(),
        np.exp: lambda a: as_tensor(a).exp(),
        np.log: lambda a: as_tensor(a).log(),
    }

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        fn = self._UFUNCS.get(ufunc)
        if method != "__call__" or fn is None or kwargs:
            raise InvalidArgument(f"unsupported primitive for autodiff: {ufunc.__name__}.{method}")
        return fn(*inputs)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a, b):
    """Batched matrix product with numpy broadcasting; 1-D operands are promoted."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise InvalidArgument("matmul needs operands of rank >= 1")
    if a.ndim == 1:
        return matmul(a.reshape(1, -1), b).reshape(*b.shape[:-2], b.shape[-1])
    if b.ndim == 1:
        return matmul(a, b.reshape(-1, 1)).reshape(a.shape[:-1])
    if a.shape[-1] != b.shape[-2]:
        raise InvalidArgument(f"matmul shape mismatch {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def back(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(B, -1, -2)), A.shape) if a.requires_grad else None
        gb = _unbroadcast(np.matmul(np.swapaxes(A, -1, -2), g), B.shape) if b.requires_grad else None
        return ga, gb
    return a._make(np.matmul(A, B), (a, b), back)


def concat(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]
    out = np.concatenate([t.data for t in ts], axis=axis)
    return ts[0]._make(out, tuple(ts), lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    return concat([t.reshape(*t.shape[:axis], 1, *t.shape[axis:]) for t in ts], axis=axis)


def minimum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    return a._make(np.minimum(a.data, b.data), (a, b),
                   lambda g: (_unbroadcast(g * take_a, a.shape), _unbroadcast(g * ~take_a, b.shape)))


def grad(loss_fn, params):
    """Evaluate ``loss_fn(leaves)`` and return ``(loss, {name: dloss/dparam})``.

    ``params`` maps names to arrays; the loss function receives the same
    mapping with every array wrapped as a differentiable leaf.
    """
    leaves = {k: Tensor(v, requires_grad=True, name=k) for k, v in params.items()}
    loss = loss_fn(leaves)
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise InvalidArgument("loss function must return a scalar Tensor")
    if loss.requires_grad:
        loss.backward()
    return loss.item(), {k: (np.zeros_like(params[k], dtype=float) if t.grad is None else t.grad)
                         for k, t in leaves.items()}
