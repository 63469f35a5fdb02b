"""Tape-free reverse-mode differentiation over numpy arrays.

Each :class:`Var` remembers its parents together with closures that map the
output cotangent to parent cotangents. Plain ``np.ndarray`` operands are
treated as constants, so a graph only ever contains nodes that depend on a
trainable leaf. The op set is deliberately small: dense-layer algebra,
elementwise transcendental functions, slicing/reshaping and reductions.
"""
from __future__ import annotations

import numpy as np

from ..errors import UnsupportedGraphError


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _node(out, *links):
    """Build a Var from (operand, vjp) pairs, dropping constant operands."""
    parents = tuple((p, fn) for p, fn in links if isinstance(p, Var))
    if not parents:
        return out
    return Var(out, parents)


class Var:
    __slots__ = ("value", "grad", "parents")
    __array_priority__ = 1000

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.parents = parents

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    def __bool__(self):
        raise UnsupportedGraphError(
            "branching on a differentiable value is not supported; "
            "use value(x) explicitly if the branch is meant to be constant"
        )

    def _compare(self, other):
        raise UnsupportedGraphError("comparisons on differentiable values are not supported")

    __lt__ = __le__ = __gt__ = __ge__ = _compare

    def __float__(self):
        if self.value.size != 1:
            raise TypeError("only size-1 Vars convert to float")
        return float(self.value.reshape(()))

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return _node(-self.value, (self, lambda g: -g))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        return mean(self, axis=axis)

    # backward -----------------------------------------------------------
    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
        if seed is None:
            if self.value.size != 1:
                raise UnsupportedGraphError("backward() without seed needs a scalar output")
            seed = np.ones_like(self.value)
        order = _topological(self)
        for node in order:
            node.grad = None
        self.grad = np.asarray(seed, dtype=float)
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in node.parents:
                contrib = vjp(g)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


# binary ops -----------------------------------------------------------------

def add(a, b):
    av, bv = value(a), value(b)
    return _node(av + bv,
                 (a, lambda g: _unbroadcast(g, av.shape)),
                 (b, lambda g: _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value(a), value(b)
    return _node(av - bv,
                 (a, lambda g: _unbroadcast(g, av.shape)),
                 (b, lambda g: -_unbroadcast(g, bv.shape)))


def mul(a, b):
    av, bv = value(a), value(b)
    return _node(av * bv,
                 (a, lambda g: _unbroadcast(g * bv, av.shape)),
                 (b, lambda g: _unbroadcast(g * av, bv.shape)))


def div(a, b):
    av, bv = value(a), value(b)
    out = av / bv
    return _node(out,
                 (a, lambda g: _unbroadcast(g / bv, av.shape)),
                 (b, lambda g: _unbroadcast(-g * out / bv, bv.shape)))


def power(a, exponent):
    if isinstance(exponent, Var):
        raise UnsupportedGraphError("only constant exponents are supported")
    av = value(a)
    if exponent == 2:
        return _node(av * av, (a, lambda g: 2.0 * g * av))
    return _node(av ** exponent, (a, lambda g: g * exponent * av ** (exponent - 1)))


def square(a):
    return power(a, 2)


def matmul(a, b):
    av, bv = value(a), value(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise UnsupportedGraphError("matmul is defined for 2-D operands only")
    return _node(av @ bv,
                 (a, lambda g: g @ bv.T),
                 (b, lambda g: av.T @ g))


# unary / structural ops -----------------------------------------------------

def transpose(a):
    return _node(value(a).T, (a, lambda g: g.T))


def reshape(a, *shape):
    if len(shape) == 1 and isinstance(shape[0], tuple):
        shape = shape[0]
    av = value(a)
    return _node(av.reshape(shape), (a, lambda g: g.reshape(av.shape)))


def getitem(a, index):
    av = value(a)

    def vjp(g):
        out = np.zeros_like(av)
        if _fancy(index):
            np.add.at(out, index, g)
        else:
            out[index] = g
        return out

    return _node(av[index], (a, vjp))


def _fancy(index):
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def sum_(a, axis=None, keepdims=False):
    av = value(a)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape).copy()

    return _node(av.sum(axis=axis, keepdims=keepdims), (a, vjp))


def mean(a, axis=None):
    av = value(a)
    n = av.size if axis is None else np.prod([av.shape[i] for i in np.atleast_1d(axis)])
    return sum_(a, axis=axis) / float(n)


def tanh(a):
    out = np.tanh(value(a))
    return _node(out, (a, lambda g: g * (1.0 - out * out)))


def sin(a):
    av = value(a)
    return _node(np.sin(av), (a, lambda g: g * np.cos(av)))


def cos(a):
    av = value(a)
    return _node(np.cos(av), (a, lambda g: -g * np.sin(av)))


def exp(a):
    out = np.exp(value(a))
    return _node(out, (a, lambda g: g * out))


def concatenate(items, axis=0):
    values = [value(x) for x in items]
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])
    links = []
    for x, lo, hi in zip(items, bounds[:-1], bounds[1:]):
        sl = [slice(None)] * values[0].ndim
        sl[axis] = slice(lo, hi)
        links.append((x, lambda g, sl=tuple(sl): g[sl]))
    return _node(np.concatenate(values, axis=axis), *links)
