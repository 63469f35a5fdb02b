"""Branch-trunk operator networks (one or two branches, shared trunk)."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import spectral
from .errors import ConfigurationError
from .nn import autodiff as ad
from .nn.autodiff import value
from .nn.mlp import NetParams, mlp_shapes, net_forward, net_init


@dataclass
class OperatorNet:
    branches: list
    trunk: NetParams
    p: int
    n_flux: int = 1

    def __post_init__(self):
        if not 1 <= len(self.branches) <= 2:
            raise ConfigurationError("one or two branch networks are supported")
        for i, b in enumerate(self.branches):
            if b.n_out != self.p:
                raise ConfigurationError(f"branch {i} emits {b.n_out} values, expected p={self.p}")
        if self.trunk.n_out != self.p * self.n_flux:
            raise ConfigurationError(f"trunk emits {self.trunk.n_out} values, expected {self.n_flux}*{self.p}")

    @property
    def nets(self):
        return list(self.branches) + [self.trunk]

    @property
    def total_count(self):
        return sum(n.total_count for n in self.nets)

    def arrays(self):
        return [a for n in self.nets for a in n.arrays()]

    def names(self):
        out = []
        for i, b in enumerate(self.branches):
            out += b.names(f"branch{i}.")
        return out + self.trunk.names("trunk.")

    def with_arrays(self, arrays):
        arrays = list(arrays)
        nets, pos = [], 0
        for n in self.nets:
            k = 2 * len(n.layers)
            nets.append(n.with_arrays(arrays[pos:pos + k]))
            pos += k
        return OperatorNet(nets[:-1], nets[-1], self.p, self.n_flux)

    def to_dict(self):
        return {"kind": "operator-net", "p": self.p, "n_flux": self.n_flux,
                "branches": [b.to_dict() for b in self.branches], "trunk": self.trunk.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "operator-net":
            raise ConfigurationError("not an operator-net checkpoint")
        return cls([NetParams.from_dict(b) for b in d["branches"]], NetParams.from_dict(d["trunk"]),
                   int(d["p"]), int(d["n_flux"]))


def build_operator_net(branch_inputs, trunk_dim, depth, width, p, activation="tanh", n_flux=1, seed=0):
    """Xavier-initialized net; every sub-network has ``depth`` hidden layers of ``width``."""
    rng = np.random.default_rng(seed)
    branches = [net_init(mlp_shapes(m, p, depth, width, activation), rng) for m in branch_inputs]
    trunk = net_init(mlp_shapes(trunk_dim, n_flux * p, depth, width, activation), rng)
    return OperatorNet(branches, trunk, p, n_flux)


def branch_latent(net: OperatorNet, inputs, outer=False):
    """Branch features, combined multiplicatively when there are two branches.

    With ``outer=True`` every row of the first input is paired with every row
    of the second (result has ``len(in0) * len(in1)`` rows, first index slow).
    """
    if len(inputs) != len(net.branches):
        raise ConfigurationError(f"{len(net.branches)} branch inputs expected, got {len(inputs)}")
    outs = [net_forward(b, np.atleast_2d(np.asarray(x, dtype=float))) for b, x in zip(net.branches, inputs)]
    if len(outs) == 1:
        return outs[0]
    b1, b2 = outs
    if outer:
        n1, n2 = value(b1).shape[0], value(b2).shape[0]
        prod = ad.reshape(b1, (n1, 1, net.p)) * ad.reshape(b2, (1, n2, net.p))
        return ad.reshape(prod, (n1 * n2, net.p))
    if value(b1).shape[0] != value(b2).shape[0]:
        raise ConfigurationError("paired branch inputs need equal batch sizes")
    return b1 * b2


def trunk_latent(net: OperatorNet, points):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != net.trunk.n_in:
        raise ConfigurationError(f"trunk expects {net.trunk.n_in}-D points, got {points.shape[1]}-D")
    return net_forward(net.trunk, points)


def contract(net: OperatorNet, b, t):
    """Per flux component: sum_k b_k t_k, as a list of (batch, n_points) arrays/nodes."""
    p = net.p
    return [b @ ad.transpose(t[:, d * p:(d + 1) * p]) for d in range(net.n_flux)]


def eval_flux(net: OperatorNet, branch_inputs, trunk_points, outer=False):
    """Plain evaluation. Returns an array of shape (batch, n_flux, n_points)."""
    b = branch_latent(net, branch_inputs, outer)
    t = trunk_latent(net, trunk_points)
    return np.stack([value(c) for c in contract(net, b, t)], axis=1)


class NetFluxMap:
    """``u -> j`` for time stepping: project u onto the basis, encode, evaluate.

    The trunk output on the grid never changes, so it is computed once.
    Extra branch inputs (e.g. a scalar model parameter) are fixed per map.
    """

    def __init__(self, net: OperatorNet, basis: spectral.BasisSpec, extra_inputs=()):
        self.net = net
        self.basis = basis
        self.extra = [np.atleast_2d(np.asarray(x, dtype=float)) for x in extra_inputs]
        if len(self.extra) + 1 != len(net.branches):
            raise ConfigurationError("number of extra inputs does not match the branch count")
        t = trunk_latent(net, basis.points())
        self._trunk = [t[:, d * net.p:(d + 1) * net.p] for d in range(net.n_flux)]

    def coefficients(self, values):
        return spectral.project(self.basis, values)

    def __call__(self, values):
        x = spectral.encode(self.basis, self.coefficients(values))[None, :]
        b = branch_latent(self.net, [x] + self.extra)[0]
        return np.stack([(t @ b).reshape(self.basis.shape) for t in self._trunk])


def save_operator(net: OperatorNet, path, extra=None):
    doc = net.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_operator(path):
    doc = json.loads(Path(path).read_text())
    return OperatorNet.from_dict(doc), doc
