"""Unsupervised Rayleighian training of operator nets, plus a supervised baseline."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .errors import ConfigurationError, NumericalFailure
from .models import ModelSpec, flux_coefficients
from .nn import autodiff as ad
from .nn.adam import AdamState, adam_step
from .nn.autodiff import value
from .nn.mlp import value_and_grad
from .operator import OperatorNet, branch_latent, build_operator_net, contract, trunk_latent

ACTIVATIONS = ("tanh", "sin")


@dataclass
class TrainConfig:
    model: ModelSpec
    sampling: spectral.SamplingSpec
    n_samples: int = 50
    depth: int = 3
    width: int = 50
    p: int = 120
    activation: str = "tanh"
    epochs: int = 20000
    lr: float = 5e-4
    seed: int = 0
    log_every: int = 100
    # two-branch mode: gamma1 drawn uniformly from gamma_range, n_gammas draws
    gamma_range: tuple | None = None
    n_gammas: int | None = None
    # Fokker-Planck: pick the shift C so that min(u + C) >= min_shifted over the samples
    min_shifted: float | None = 0.5

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be at least 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}")
        if self.lr < 0 or self.log_every < 1 or self.depth < 1 or self.width < 1 or self.p < 1:
            raise ConfigurationError("lr must be >= 0; depth, width, p and log_every must be positive")
        if (self.gamma_range is None) != (self.n_gammas is None):
            raise ConfigurationError("gamma_range and n_gammas go together")
        if self.gamma_range is not None:
            lo, hi = self.gamma_range
            if not lo < hi or self.n_gammas < 1:
                raise ConfigurationError("gamma_range must be increasing and n_gammas positive")
            if self.model.name not in ("cahn_hilliard_1d", "cahn_hilliard_2d", "allen_cahn"):
                raise ConfigurationError("the gamma1 branch applies to Cahn-Hilliard and Allen-Cahn models")

    @property
    def multi_input(self):
        return self.gamma_range is not None

    def echo(self):
        return {"model": self.model.to_dict(), "sampling": self.sampling.to_dict(), "n_samples": self.n_samples,
                "depth": self.depth, "width": self.width, "p": self.p, "activation": self.activation,
                "epochs": self.epochs, "lr": self.lr, "seed": self.seed, "log_every": self.log_every,
                "gamma_range": None if self.gamma_range is None else list(self.gamma_range),
                "n_gammas": self.n_gammas, "min_shifted": self.min_shifted}


@dataclass
class TrainReport:
    loss_history: list  # (epoch, loss) pairs
    final_params: OperatorNet
    wall_time: float
    config_echo: dict
    model: ModelSpec | None = None
    floor: float | None = None
    final_loss: float | None = None
    extra: dict = field(default_factory=dict)

    def losses(self):
        return np.array([v for _, v in self.loss_history])

    def to_dict(self):
        return {"schema_version": 1, "loss_history": [[int(e), float(v)] for e, v in self.loss_history],
                "final_loss": self.final_loss, "floor": self.floor, "wall_time": self.wall_time,
                "config": self.config_echo, "model": None if self.model is None else self.model.to_dict(),
                **self.extra}

    def write(self, outdir):
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "train_report.json").write_text(json.dumps(self.to_dict(), indent=2))
        with open(out / "loss.csv", "w") as fh:
            fh.write("epoch,loss\n")
            for e, v in self.loss_history:
                fh.write(f"{int(e)},{float(v)!r}\n")


@dataclass
class SampleBatch:
    """Everything the loss needs, with spatial derivatives of u already applied.

    ``A`` has shape (rows, n_flux, n_points) and ``W`` (rows, n_points); a row is
    one sample, or one (sample, gamma1) pair with sample index slow.
    """

    branch_inputs: list
    A: np.ndarray
    W: np.ndarray
    cell: float
    outer: bool = False
    n_gammas: int = 1

    @property
    def rows(self):
        return self.A.shape[0]


def _cell(basis):
    return float(np.prod([basis.cell(i) for i in range(basis.dim)]))


def resolve_shift(model: ModelSpec, states, min_shifted=0.5):
    """Fokker-Planck shift C with min(u + C) >= min_shifted on the given states."""
    if model.name != "fokker_planck" or min_shifted is None:
        return model
    need = max(model.params["shift"], min_shifted - float(np.min(states)))
    return model.with_params(shift=need)


def prepare_batch(model: ModelSpec, states, gammas=None):
    """Loss coefficients for a stack of states (and optionally several gamma1 values)."""
    basis = model.basis
    states = np.asarray(states, dtype=float)
    enc = np.stack([spectral.encode(basis, spectral.project(basis, u)) for u in states])
    A, W = [], []
    for u in states:
        for g in ([None] if gammas is None else gammas):
            a, w = flux_coefficients(model, u, g)
            A.append(a.reshape(a.shape[0], -1))
            W.append(w.reshape(-1))
    inputs = [enc] if gammas is None else [enc, np.asarray(gammas, dtype=float).reshape(-1, 1)]
    return SampleBatch(inputs, np.asarray(A), np.asarray(W), _cell(basis), gammas is not None,
                       1 if gammas is None else len(gammas))


def _flux_nodes(net: OperatorNet, batch: SampleBatch, points):
    b = branch_latent(net, batch.branch_inputs, outer=batch.outer)
    return contract(net, b, trunk_latent(net, points))


def build_loss_graph(model: ModelSpec, net: OperatorNet, batch: SampleBatch):
    """Mean over rows of the rectangle-rule Rayleighian of the net's flux."""
    js = _flux_nodes(net, batch, model.basis.points())
    total = 0.0
    for d, j in enumerate(js):
        total = total + ad.sum_(batch.A[:, d] * j + 0.5 * batch.W * (j * j))
    return total * (batch.cell / batch.rows)


def per_row_losses(model: ModelSpec, net: OperatorNet, batch: SampleBatch):
    js = [value(j) for j in _flux_nodes(net, batch, model.basis.points())]
    dens = sum(batch.A[:, d] * j + 0.5 * batch.W * j * j for d, j in enumerate(js))
    return batch.cell * dens.sum(axis=1)


def loss_floor(batch: SampleBatch):
    """Loss at the pointwise minimizer j = -A/W, the lowest value any flux can reach."""
    return float(-0.5 * batch.cell * (batch.A ** 2 / batch.W[:, None]).sum() / batch.rows)


def _adam_loop(loss_fn, params, epochs, lr, log_every, on_bad):
    state = AdamState.for_params(params, lr=lr)
    history = []
    for epoch in range(epochs):
        loss, grads = value_and_grad(loss_fn, params)
        if not np.isfinite(loss):
            on_bad(epoch, params)
        if epoch % log_every == 0 or epoch == epochs - 1:
            history.append((epoch, loss))
        try:
            params, state = adam_step(params, grads, state)
        except NumericalFailure as exc:
            raise NumericalFailure(f"epoch {epoch}: {exc}") from exc
    return params, history


def draw_gammas(config: TrainConfig):
    rng = np.random.default_rng([config.seed, 1 << 20])
    lo, hi = config.gamma_range
    return np.sort(rng.uniform(lo, hi, config.n_gammas))


def training_states(config: TrainConfig):
    coeffs = spectral.sample_coefficients(config.model.basis, config.sampling, config.n_samples, config.seed)
    return np.stack([spectral.synthesize(config.model.basis, c).values for c in coeffs])


def train_dool(config: TrainConfig, net: OperatorNet | None = None):
    """Full-batch Adam on the Rayleighian loss over a sample set drawn once."""
    t0 = time.perf_counter()
    model = config.model
    states = training_states(config)
    model = resolve_shift(model, states, config.min_shifted)
    gammas = draw_gammas(config) if config.multi_input else None
    batch = prepare_batch(model, states, gammas)
    if net is None:
        inputs = [batch.branch_inputs[0].shape[1]] + ([1] if config.multi_input else [])
        net = build_operator_net(inputs, model.basis.dim, config.depth, config.width, config.p,
                                 config.activation, model.n_flux, config.seed)

    def on_bad(epoch, params):
        rows = per_row_losses(model, params, batch)
        bad = int(np.flatnonzero(~np.isfinite(rows))[0]) if not np.all(np.isfinite(rows)) else -1
        raise NumericalFailure(f"non-finite loss at epoch {epoch} (sample {bad // batch.n_gammas if bad >= 0 else '?'})")

    params, history = _adam_loop(lambda n: build_loss_graph(model, n, batch), net, config.epochs, config.lr,
                                 config.log_every, on_bad)
    final = float(per_row_losses(model, params, batch).mean())
    extra = {"gammas": None if gammas is None else gammas.tolist()}
    return TrainReport(history, params, time.perf_counter() - t0, config.echo(), model, loss_floor(batch), final,
                       extra)


def flux_error(model: ModelSpec, net: OperatorNet, states, gamma1=None):
    """Relative L2 distance between the net flux and the analytic flux over a set of states."""
    from .models import analytic_flux

    gammas = None if gamma1 is None else [gamma1]
    batch = prepare_batch(model, states, gammas)
    pred = np.stack([value(j) for j in _flux_nodes(net, batch, model.basis.points())], axis=1)
    ref = np.stack([analytic_flux(model, u, gamma1).reshape(model.n_flux, -1) for u in states])
    return float(np.linalg.norm(pred - ref) / np.linalg.norm(ref))


# --------------------------------------------------------------------------
# supervised baseline

@dataclass
class SupervisedConfig:
    depth: int = 3
    width: int = 50
    p: int = 120
    activation: str = "tanh"
    epochs: int = 20000
    lr: float = 5e-4
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}")

    def echo(self):
        return dict(self.__dict__)


def supervised_loss_graph(net: OperatorNet, branch_inputs, points, targets):
    """Mean squared misfit of G(u)(x, t) against labels on a shared point set."""
    pred = contract(net, branch_latent(net, branch_inputs), trunk_latent(net, points))[0]
    diff = pred - targets
    return ad.mean(diff * diff)


def train_supervised(config: SupervisedConfig, dataset, branch_inputs, net: OperatorNet | None = None):
    """DeepONet with an (x[, y], t) trunk trained on labels.

    ``branch_inputs`` is a list (one array per branch) whose rows are ordered like
    the sorted sample ids of ``dataset``.
    """
    t0 = time.perf_counter()
    ids, points, targets = dataset.as_matrix()
    branch_inputs = [np.atleast_2d(np.asarray(b, dtype=float)) for b in branch_inputs]
    if any(b.shape[0] != len(ids) for b in branch_inputs):
        raise ConfigurationError(f"{len(ids)} labelled samples but branch inputs have other row counts")
    if net is None:
        net = build_operator_net([b.shape[1] for b in branch_inputs], points.shape[1], config.depth, config.width,
                                 config.p, config.activation, 1, config.seed)

    def on_bad(epoch, params):
        pred = contract(params, branch_latent(params, branch_inputs), trunk_latent(params, points))[0]
        rows = ((value(pred) - targets) ** 2).mean(axis=1)
        bad = int(np.flatnonzero(~np.isfinite(rows))[0]) if not np.all(np.isfinite(rows)) else -1
        raise NumericalFailure(f"non-finite loss at epoch {epoch} (sample {ids[bad] if bad >= 0 else '?'})")

    params, history = _adam_loop(lambda n: supervised_loss_graph(n, branch_inputs, points, targets), net,
                                 config.epochs, config.lr, config.log_every, on_bad)
    final = float(value(supervised_loss_graph(params, branch_inputs, points, targets)))
    return TrainReport(history, params, time.perf_counter() - t0, config.echo(), None, None, final)


class SpaceTimeOperator:
    """Evaluate a supervised (x, t)-trunk operator as a trajectory for a given input."""

    def __init__(self, net: OperatorNet, basis: spectral.BasisSpec):
        self.net = net
        self.basis = basis

    def predict(self, branch_inputs, times):
        from .stepper import Trajectory

        pts = self.basis.points()
        grid = np.concatenate([np.column_stack([pts, np.full(len(pts), t)]) for t in times])
        inputs = [np.atleast_2d(np.asarray(b, dtype=float)) for b in branch_inputs]
        out = value(contract(self.net, branch_latent(self.net, inputs), trunk_latent(self.net, grid))[0])[0]
        states = out.reshape(len(times), *self.basis.shape)
        n = len(times)
        return Trajectory(np.asarray(times, dtype=float), states, None, np.full(n, np.nan), np.full(n, np.nan),
                          self.basis, {"source": "supervised"})
