"""Dense networks: parameters, Xavier initialization, forward passes, gradients."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigurationError
from . import autodiff as ad
from .autodiff import Var, value

ACTIVATIONS = ("tanh", "sin", "identity")


@dataclass(frozen=True)
class LayerShape:
    fan_in: int
    fan_out: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_out < 1:
            raise ConfigurationError(f"layer sizes must be positive, got {self.fan_in}->{self.fan_out}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")


def mlp_shapes(n_in, n_out, depth, width, activation="tanh"):
    """``depth`` hidden layers of ``width`` units followed by a linear read-out."""
    sizes = [n_in] + [width] * depth + [n_out]
    acts = [activation] * depth + ["identity"]
    return [LayerShape(a, b, act) for a, b, act in zip(sizes[:-1], sizes[1:], acts)]


def check_chain(shapes: Sequence[LayerShape]):
    if not shapes:
        raise ConfigurationError("a network needs at least one layer")
    for l, (prev, nxt) in enumerate(zip(shapes[:-1], shapes[1:])):
        if prev.fan_out != nxt.fan_in:
            raise ConfigurationError(
                f"layer {l} emits {prev.fan_out} values but layer {l + 1} expects {nxt.fan_in}")
    if shapes[-1].activation != "identity":
        raise ConfigurationError("the last layer must use the identity activation")


@dataclass
class NetParams:
    shapes: list[LayerShape]
    layers: list[tuple[object, object]] = field(repr=False)

    @property
    def n_in(self):
        return self.shapes[0].fan_in

    @property
    def n_out(self):
        return self.shapes[-1].fan_out

    @property
    def total_count(self):
        return sum(value(w).size + value(b).size for w, b in self.layers)

    def arrays(self):
        return [a for pair in self.layers for a in pair]

    def names(self, prefix=""):
        return [f"{prefix}layer{l}.{kind}" for l in range(len(self.layers)) for kind in ("weight", "bias")]

    def with_arrays(self, arrays):
        arrays = list(arrays)
        return NetParams(list(self.shapes), [(arrays[2 * l], arrays[2 * l + 1]) for l in range(len(self.shapes))])

    def to_dict(self):
        return {
            "layers": [
                {
                    "fan_in": s.fan_in,
                    "fan_out": s.fan_out,
                    "activation": s.activation,
                    "weight": np.asarray(value(w)).ravel().tolist(),
                    "bias": np.asarray(value(b)).ravel().tolist(),
                }
                for s, (w, b) in zip(self.shapes, self.layers)
            ]
        }

    @classmethod
    def from_dict(cls, data):
        shapes, layers = [], []
        for entry in data["layers"]:
            s = LayerShape(int(entry["fan_in"]), int(entry["fan_out"]), entry["activation"])
            w = np.asarray(entry["weight"], dtype=float).reshape(s.fan_out, s.fan_in)
            b = np.asarray(entry["bias"], dtype=float).reshape(s.fan_out)
            shapes.append(s)
            layers.append((w, b))
        check_chain(shapes)
        return cls(shapes, layers)


def net_init(shapes: Sequence[LayerShape], seed) -> NetParams:
    """Xavier-uniform weights, zero biases. ``seed`` may be an int or a Generator."""
    shapes = list(shapes)
    check_chain(shapes)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for s in shapes:
        bound = np.sqrt(6.0 / (s.fan_in + s.fan_out))
        layers.append((rng.uniform(-bound, bound, size=(s.fan_out, s.fan_in)), np.zeros(s.fan_out)))
    return NetParams(shapes, layers)


_ACT = {"tanh": ad.tanh, "sin": ad.sin, "identity": lambda z: z}


def net_forward(params: NetParams, x):
    """Evaluate the network on one input vector or a batch of rows.

    Works on plain arrays and on graphs alike: if any parameter is a
    :class:`Var` the result is a differentiable node.
    """
    single = value(x).ndim == 1
    h = x.reshape(1, -1) if single else x
    if value(h).shape[-1] != params.n_in:
        raise ConfigurationError(f"input has {value(h).shape[-1]} entries, network expects {params.n_in}")
    for s, (w, b) in zip(params.shapes, params.layers):
        h = _ACT[s.activation](h @ ad.transpose(w) + b)
    return h[0] if single else h


def net_forward_tangents(params: NetParams, x, directions):
    """Forward pass plus directional derivatives with respect to the input.

    ``x`` is a constant batch (N, n_in) and ``directions`` a list of input-space
    vectors. Returns ``(y, [dy/dv for v in directions])``, all differentiable in
    the parameters, so second-order losses (derivatives of the network output
    in its inputs) can still be back-propagated to the weights.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.n_in:
        raise ConfigurationError(f"expected a batch of shape (N, {params.n_in})")
    h = x
    dh = [np.asarray(v, dtype=float).reshape(1, -1) for v in directions]
    for s, (w, b) in zip(params.shapes, params.layers):
        wt = ad.transpose(w)
        z = h @ wt + b
        dz = [d @ wt for d in dh]
        if s.activation == "tanh":
            h = ad.tanh(z)
            slope = 1.0 - h * h
        elif s.activation == "sin":
            h = ad.sin(z)
            slope = ad.cos(z)
        else:
            h, slope = z, None
        dh = dz if slope is None else [slope * d for d in dz]
    return h, dh


def value_and_grad(loss_builder: Callable, params):
    """Return ``(loss, grads)`` where grads mirrors the structure of ``params``.

    ``params`` is any container exposing ``arrays()`` and ``with_arrays()``.
    """
    leaves = [Var(a) for a in params.arrays()]
    out = loss_builder(params.with_arrays(leaves))
    if not isinstance(out, Var):
        # loss does not depend on the parameters at all
        return float(np.asarray(out)), params.with_arrays([np.zeros_like(a) for a in params.arrays()])
    out.backward()
    grads = [np.zeros_like(leaf.value) if leaf.grad is None else leaf.grad for leaf in leaves]
    return float(out.value), params.with_arrays(grads)


def loss_gradient(loss_builder: Callable, params):
    return value_and_grad(loss_builder, params)[1]


def save_checkpoint(obj, path):
    Path(path).write_text(json.dumps(obj.to_dict(), indent=1))


def load_netparams(path) -> NetParams:
    return NetParams.from_dict(json.loads(Path(path).read_text()))
