"""Scalar parameter identification: fit gamma1 so DOOL forward runs match observations."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NumericalFailure
from .models import ModelSpec
from .operator import NetFluxMap, OperatorNet
from .stepper import evolve

RHO = (math.sqrt(5.0) - 1.0) / 2.0
PENALTY = 1e30


def golden_budget(a, b, tol):
    """Number of function evaluations golden_section_search makes on [a, b]."""
    n = math.ceil(math.log((b - a) / tol) / math.log(1.0 / RHO))
    return n + 2 if n > 0 else 1


@dataclass
class SearchResult:
    x: float
    fx: float
    n_evals: int
    samples: list = field(default_factory=list)  # (x, f(x)) in evaluation order
    brackets: list = field(default_factory=list)  # interval after each iteration


def golden_section_search(f, a, b, tol=1e-4):
    """Minimize a unimodal ``f`` on [a, b] until the bracket is no wider than ``tol``.

    Returns the midpoint of the final bracket and its value. Every iteration
    shrinks the bracket by the factor RHO and reuses one interior value, so the
    cost is ``golden_budget(a, b, tol)`` evaluations.
    """
    if not b > a:
        raise ConfigurationError(f"search interval [{a}, {b}] is empty or reversed")
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    samples = []

    def ev(x):
        y = float(f(x))
        samples.append((float(x), y))
        return y

    n = math.ceil(math.log((b - a) / tol) / math.log(1.0 / RHO))
    brackets = [(a, b)]
    if n > 0:
        c, d = b - RHO * (b - a), a + RHO * (b - a)
        fc, fd = ev(c), ev(d)
        for it in range(n):
            last = it == n - 1
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - RHO * (b - a)
                if not last:
                    fc = ev(c)
            else:
                a, c, fc = c, d, fd
                d = a + RHO * (b - a)
                if not last:
                    fd = ev(d)
            brackets.append((a, b))
    mid = 0.5 * (a + b)
    return SearchResult(mid, ev(mid), len(samples), samples, brackets)


@dataclass
class InversionProblem:
    """Observations u*(x_k, t_n) on the model grid; ``times[0]`` is the start state."""

    observations: np.ndarray  # (n_times, *grid)
    times: np.ndarray
    net: OperatorNet
    model: ModelSpec
    dt: float = 1e-3
    interval: tuple = (0.0, 0.1)
    tol: float = 1e-4
    band_limit: int | None = None

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        lo, hi = self.interval
        if not lo < hi:
            raise ConfigurationError(f"search interval [{lo}, {hi}] must satisfy min < max")
        if self.observations.shape[1:] != self.model.basis.shape:
            raise ConfigurationError("observations are not on the model grid")
        if len(self.times) != len(self.observations) or len(self.times) < 2:
            raise ConfigurationError("need one observation slice per time and at least two times")
        if len(self.net.branches) != 2:
            raise ConfigurationError("inversion needs a two-branch (state, gamma1) operator")
        steps = (self.times - self.times[0]) / self.dt
        if np.any(np.abs(steps - np.round(steps)) > 1e-6) or np.any(np.diff(steps) <= 0):
            raise ConfigurationError("observation times must be increasing multiples of dt after t0")
        self._steps = np.round(steps).astype(int)

    def predict(self, gamma1):
        T = self._steps[-1] * self.dt
        flux = NetFluxMap(self.net, self.model.basis, [[gamma1]])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            traj = evolve(self.observations[0], flux, self.model.with_params(gamma1=gamma1), self.dt, T,
                          band_limit=self.band_limit, record_fluxes=False)
        return traj.states[self._steps]


def misfit(gamma1, problem: InversionProblem):
    """Sum of squared differences over all observation points; PENALTY if the run fails."""
    try:
        pred = problem.predict(gamma1)
    except NumericalFailure:
        return PENALTY
    val = float(((pred - problem.observations) ** 2).sum())
    return val if np.isfinite(val) else PENALTY


def invert(problem: InversionProblem, sweep=0):
    """Golden-section recovery of gamma1, optionally with an extra uniform misfit sweep."""
    lo, hi = problem.interval
    res = golden_section_search(lambda g: misfit(g, problem), lo, hi, problem.tol)
    report = {"schema_version": 1, "gamma1": res.x, "misfit": res.fx, "n_evals": res.n_evals,
              "interval": [lo, hi], "tol": problem.tol,
              "evaluations": [{"gamma1": x, "misfit": y} for x, y in res.samples]}
    if sweep:
        grid = np.linspace(lo, hi, sweep)
        report["sweep"] = [{"gamma1": float(g), "misfit": misfit(g, problem)} for g in grid]
    return report


def write_report(report, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(report, indent=2))
