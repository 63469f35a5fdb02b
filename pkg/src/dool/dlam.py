"""Least-action training for the damped wave equation u_tt + 2 lam u_t = u_xx.

The field is u(x, t) = Phi(y(x, t)) where y is a plain MLP and the output
layer Phi pins u(., 0) = f and u(., T) = g for every parameter value:

    Phi(y) = sin(pi t / T) y + sin(T - t) / sin(T) f(x) + sin(t) / sin(T) g(x)

Training minimizes the exponentially weighted action
    sum over a space-time grid of e^{2 lam t} (u_t^2 - u_x^2).
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NumericalFailure
from .nn import autodiff as ad
from .nn.adam import AdamState, adam_step
from .nn.autodiff import value
from .nn.mlp import NetParams, mlp_shapes, net_forward, net_forward_tangents, net_init, value_and_grad
from .trainer import TrainReport


@dataclass(frozen=True)
class TrigSeries:
    """c + sum of a * cos(k x) and b * sin(k x) terms; enough for the boundary data used here."""

    const: float = 0.0
    cos: tuple = ()  # (k, amplitude) pairs
    sin: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.const)
        for k, a in self.cos:
            out = out + a * np.cos(k * x)
        for k, a in self.sin:
            out = out + a * np.sin(k * x)
        return out

    def dx(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in self.cos:
            out = out - a * k * np.sin(k * x)
        for k, a in self.sin:
            out = out + a * k * np.cos(k * x)
        return out

    def to_dict(self):
        return {"const": self.const, "cos": [list(p) for p in self.cos], "sin": [list(p) for p in self.sin]}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d.get("const", 0.0)), tuple(tuple(p) for p in d.get("cos", ())),
                   tuple(tuple(p) for p in d.get("sin", ())))


@dataclass
class NdnnParams:
    core: NetParams
    T: float = 1.0
    f: TrigSeries = field(default_factory=lambda: TrigSeries(cos=((1.0, 1.0),)))
    g: TrigSeries = field(default_factory=TrigSeries)
    half_width: float = np.pi

    def __post_init__(self):
        if self.core.n_in != 2 or self.core.n_out != 1:
            raise ConfigurationError("the core network must map (x, t) to one value")
        if self.T <= 0 or abs(np.sin(self.T)) < 1e-8:
            raise ConfigurationError(f"T={self.T} makes sin(T) vanish; the output layer needs sin(T) != 0")

    def arrays(self):
        return self.core.arrays()

    def names(self):
        return self.core.names("core.")

    def with_arrays(self, arrays):
        return NdnnParams(self.core.with_arrays(arrays), self.T, self.f, self.g, self.half_width)

    def to_dict(self):
        return {"kind": "ndnn", "T": self.T, "half_width": self.half_width, "f": self.f.to_dict(),
                "g": self.g.to_dict(), "core": self.core.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(NetParams.from_dict(d["core"]), float(d["T"]), TrigSeries.from_dict(d["f"]),
                   TrigSeries.from_dict(d["g"]), float(d["half_width"]))


def build_ndnn(depth=4, width=70, activation="tanh", seed=0, **kw):
    return NdnnParams(net_init(mlp_shapes(2, 1, depth, width, activation), seed), **kw)


def _weights(params, x, t):
    T, sT = params.T, np.sin(params.T)
    return np.sin(np.pi * t / T), np.sin(T - t) / sT, np.sin(t) / sT


def ndnn_eval(params: NdnnParams, x, t):
    """u(x, t) at matching arrays of points."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    pts = np.column_stack([x.ravel(), t.ravel()])
    y = value(net_forward(params.core, pts))[:, 0].reshape(x.shape)
    a, b, c = _weights(params, x, t)
    return a * y + b * params.f(x) + c * params.g(x)


def ndnn_fields(params: NdnnParams, x, t):
    """(u, u_x, u_t) at flat point arrays; differentiable in the core parameters."""
    x = np.asarray(x, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    T, sT = params.T, np.sin(params.T)
    y, (yx, yt) = net_forward_tangents(params.core, np.column_stack([x, t]), [[1.0, 0.0], [0.0, 1.0]])
    y, yx, yt = y[:, 0], yx[:, 0], yt[:, 0]
    a, b, c = _weights(params, x, t)
    da = (np.pi / T) * np.cos(np.pi * t / T)
    db, dc = -np.cos(T - t) / sT, np.cos(t) / sT
    f, g = params.f(x), params.g(x)
    u = a * y + (b * f + c * g)
    ux = a * yx + (b * params.f.dx(x) + c * params.g.dx(x))
    ut = a * yt + da * y + (db * f + dc * g)
    return u, ux, ut


def action_grid(params: NdnnParams, nx, nt):
    """x_k = -I + 2kI/nx (k = 1..nx), t_n = nT/nt (n = 1..nt), flattened with x fastest."""
    I = params.half_width
    x = -I + 2.0 * I * np.arange(1, nx + 1) / nx
    t = params.T * np.arange(1, nt + 1) / nt
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return xx.ravel(), tt.ravel()


def action_loss(params: NdnnParams, nx=128, nt=128, damping=1.0, grid=None):
    """(2I T / (nx nt)) * sum of e^{2 lam t} (u_t^2 - u_x^2) over the grid."""
    x, t = action_grid(params, nx, nt) if grid is None else grid
    _, ux, ut = ndnn_fields(params, x, t)
    w = np.exp(2.0 * damping * t) * (2.0 * params.half_width * params.T / (nx * nt))
    return ad.sum_(w * (ut * ut - ux * ux))


def action_of_field(u_t, u_x, t, half_width, T, nx, nt, damping=1.0):
    """Same discrete action for precomputed derivative arrays (used as an oracle)."""
    return float((2.0 * half_width * T / (nx * nt)) * np.sum(np.exp(2.0 * damping * t) * (u_t ** 2 - u_x ** 2)))


@dataclass
class DlamConfig:
    depth: int = 4
    width: int = 35
    activation: str = "tanh"
    T: float = 1.0
    half_width: float = np.pi
    f: TrigSeries = field(default_factory=lambda: TrigSeries(cos=((1.0, 1.0),)))
    g: TrigSeries = field(default_factory=TrigSeries)
    nx: int = 64
    nt: int = 64
    damping: float = 1.0
    epochs: int = 10000
    lr: float = 5e-4
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 1 or self.nx < 2 or self.nt < 2:
            raise ConfigurationError("epochs must be >= 1 and the grid at least 2 x 2")
        if self.T <= 0 or abs(np.sin(self.T)) < 1e-8:
            raise ConfigurationError(f"T={self.T} makes sin(T) vanish")
        if self.activation not in ("tanh", "sin"):
            raise ConfigurationError("activation must be tanh or sin")

    def echo(self):
        d = {k: v for k, v in self.__dict__.items() if k not in ("f", "g")}
        return {**d, "f": self.f.to_dict(), "g": self.g.to_dict()}


def train_dlam(config: DlamConfig, params: NdnnParams | None = None):
    t0 = time.perf_counter()
    if params is None:
        params = build_ndnn(config.depth, config.width, config.activation, config.seed, T=config.T,
                            f=config.f, g=config.g, half_width=config.half_width)
    grid = action_grid(params, config.nx, config.nt)
    state = AdamState.for_params(params, lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        loss, grads = value_and_grad(
            lambda p: action_loss(p, config.nx, config.nt, config.damping, grid), params)
        if not np.isfinite(loss):
            raise NumericalFailure(f"non-finite action at epoch {epoch}")
        if epoch % config.log_every == 0 or epoch == config.epochs - 1:
            history.append((epoch, loss))
        params, state = adam_step(params, grads, state)
    final = float(value(action_loss(params, config.nx, config.nt, config.damping, grid)))
    return TrainReport(history, params, time.perf_counter() - t0, config.echo(), None, None, final)


def exact_damped_wave(x, t, T=1.0):
    return (1.0 - t / T) * np.exp(-t) * np.cos(x)


def solution_grid(params: NdnnParams, nx=128, nt=128):
    """Field on x_k (k = 1..nx) and t_n = nT/nt (n = 0..nt); returns (x, t, u[nt+1, nx])."""
    I = params.half_width
    x = -I + 2.0 * I * np.arange(1, nx + 1) / nx
    t = params.T * np.arange(0, nt + 1) / nt
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return x, t, ndnn_eval(params, xx, tt)


def energy_series(params: NdnnParams, nx=128, nt=128):
    """Wave energy 1/2 int (u_t^2 + u_x^2) dx at each t_n = nT/nt, n = 0..nt."""
    I = params.half_width
    x = -I + 2.0 * I * np.arange(1, nx + 1) / nx
    t = params.T * np.arange(0, nt + 1) / nt
    tt, xx = np.meshgrid(t, x, indexing="ij")
    _, ux, ut = ndnn_fields(params, xx.ravel(), tt.ravel())
    dens = 0.5 * (value(ut) ** 2 + value(ux) ** 2).reshape(tt.shape)
    return t, dens.sum(axis=1) * (2.0 * I / nx)


def write_solution(params: NdnnParams, outdir, nx=128, nt=128, meta=None):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    x, t, u = solution_grid(params, nx, nt)
    with open(out / "fields.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for n, tn in enumerate(t):
            for k, xk in enumerate(x):
                w.writerow([repr(float(tn)), repr(float(xk)), repr(float(u[n, k]))])
    te, e = energy_series(params, nx, nt)
    with open(out / "energy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E"])
        for a, b in zip(te, e):
            w.writerow([repr(float(a)), repr(float(b))])
    (out / "ndnn.json").write_text(json.dumps(params.to_dict(), indent=1))
    if meta is not None:
        (out / "meta.json").write_text(json.dumps(meta, indent=2, default=str))
