"""Catalogue of dissipative models and their discrete Rayleighians.

Every Rayleighian density used here is a convex quadratic in the flux,

    density(u, j) = sum_d a_d(u) j_d + 1/2 w(u) |j|^2,

so a model is fully described by the pair ``(a, w)``. The constitutive
(analytic) flux is the pointwise minimizer ``j = -a / w``. Spatial derivatives
of ``u`` are always taken spectrally; only ``j`` is ever produced by a network.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral
from .errors import ConfigurationError, DomainError, PositivityError
from .spectral import BasisSpec

CONSERVED = {"heat", "heat_source", "fokker_planck", "cahn_hilliard_1d", "cahn_hilliard_2d"}
NONCONSERVED = {"allen_cahn"}
DENOMINATOR = {"heat", "heat_source", "fokker_planck"}

DEFAULT_PARAMS = {
    "heat": {"shift": 0.0},
    "heat_source": {"shift": 0.0},
    "fokker_planck": {"beta": 2.0, "potential_a": 0.5, "shift": 0.0},
    "cahn_hilliard_1d": {"gamma1": 0.1, "gamma2": 0.1},
    "cahn_hilliard_2d": {"gamma1": 1.0, "gamma2": 1.0},
    "allen_cahn": {"gamma1": 0.1, "gamma2": 1.0},
}


@dataclass
class ModelSpec:
    name: str
    basis: BasisSpec
    params: dict = field(default_factory=dict)
    eps_u: float = 1e-3

    def __post_init__(self):
        if self.name not in DEFAULT_PARAMS:
            raise ConfigurationError(f"unknown model {self.name!r}; choose from {sorted(DEFAULT_PARAMS)}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.name])
        if unknown:
            raise ConfigurationError(f"model {self.name} has no parameters {sorted(unknown)}")
        self.params = {**DEFAULT_PARAMS[self.name], **self.params}
        expected_dim = 2 if self.name == "cahn_hilliard_2d" else 1
        if self.basis.dim != expected_dim:
            raise ConfigurationError(f"{self.name} needs a {expected_dim}-D basis")

    @property
    def kind(self):
        return "nonconserved" if self.name in NONCONSERVED else "conserved"

    @property
    def n_flux(self):
        return self.basis.dim if self.kind == "conserved" else 1

    def on_grid(self, *sizes):
        return replace(self, basis=self.basis.with_grid(*sizes))

    def with_params(self, **kw):
        return replace(self, params={**self.params, **kw})

    def to_dict(self):
        return {"name": self.name, "basis": self.basis.to_dict(), "params": dict(self.params), "eps_u": self.eps_u}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], BasisSpec.from_dict(d["basis"]), dict(d.get("params", {})), float(d.get("eps_u", 1e-3)))


def _d(model, u, order=1, axis=0):
    return spectral.derivative(model.basis, u, order, axis)


def _chemical_potential(model, u, gamma1):
    """-gamma1 * Laplacian(u) + gamma2 * (u^3 - u)."""
    lap = sum(_d(model, u, 2, ax) for ax in range(model.basis.dim))
    return -gamma1 * lap + model.params["gamma2"] * (u ** 3 - u)


def _guard(model, u):
    shifted = u + model.params.get("shift", 0.0)
    lo = float(np.min(shifted))
    if lo < model.eps_u:
        raise PositivityError(
            f"{model.name}: min(u + C) = {lo:.3g} is below the floor {model.eps_u}; "
            "use a larger shift C (params.shift) or a stricter sampling positivity floor")
    return shifted


def flux_coefficients(model: ModelSpec, u, gamma1=None):
    """Return ``(a, w)`` with ``a`` of shape (n_flux, *grid) and ``w`` of grid shape.

    ``gamma1`` overrides the model value (used by the two-branch operator).
    """
    u = np.asarray(u, dtype=float)
    name = model.name
    p = model.params
    if name in DENOMINATOR:
        denom = _guard(model, u)
        if name == "heat":
            numer = _d(model, u)
        elif name == "heat_source":
            x = model.basis.axis(0)
            numer = _d(model, u) - np.cos(x)
        else:
            x = model.basis.axis(0)
            numer = _d(model, u) / p["beta"] + 2.0 * p["potential_a"] * x * u
        # shifted form keeps the minimizer -numer while the curvature 1/(u+C) stays bounded
        return (numer / denom)[None], 1.0 / denom
    g1 = p["gamma1"] if gamma1 is None else gamma1
    mu = _chemical_potential(model, u, g1)
    if model.kind == "nonconserved":
        return mu[None], np.ones_like(u)
    a = np.stack([_d(model, mu, 1, ax) for ax in range(model.basis.dim)])
    return a, np.ones_like(u)


def _as_components(model, j):
    j = np.asarray(j, dtype=float)
    if j.shape == model.basis.shape:
        j = j[None]
    if j.shape != (model.n_flux,) + model.basis.shape:
        raise ConfigurationError(f"flux of shape {j.shape} does not match {model.name} on grid {model.basis.shape}")
    return j


def rayleighian_density(model: ModelSpec, u, j, gamma1=None):
    a, w = flux_coefficients(model, u, gamma1)
    j = _as_components(model, j)
    return (a * j).sum(axis=0) + 0.5 * w * (j * j).sum(axis=0)


def rayleighian_loss(model: ModelSpec, u, j, gamma1=None):
    """Discrete reduced Rayleighian: rectangle-rule integral of the density."""
    return float(spectral.quadrature(rayleighian_density(model, u, j, gamma1), model.basis))


def analytic_flux(model: ModelSpec, u, gamma1=None):
    """Pointwise minimizer of the Rayleighian density, shape (n_flux, *grid)."""
    a, w = flux_coefficients(model, u, gamma1)
    return -a / w


def free_energy(model: ModelSpec, u):
    u = np.asarray(u, dtype=float)
    name, p = model.name, model.params
    if name in DENOMINATOR:
        if np.any(u < 0):
            raise DomainError(f"{name}: free energy needs u >= 0 (min {u.min():.3g})")
        ulogu = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
        if name == "fokker_planck":
            x = model.basis.axis(0)
            density = ulogu / p["beta"] + p["potential_a"] * x * x * u
        else:
            density = ulogu
    else:
        grad2 = sum(_d(model, u, 1, ax) ** 2 for ax in range(model.basis.dim))
        density = 0.5 * p["gamma1"] * grad2 + 0.25 * p["gamma2"] * (u * u - 1.0) ** 2
    return float(spectral.quadrature(density, model.basis))


def flux_divergence(model: ModelSpec, j):
    j = _as_components(model, j)
    return sum(_d(model, j[ax], 1, ax) for ax in range(j.shape[0]))


def pde_residual(model: ModelSpec, u, dtu):
    """Relative L2 size of the PDE defect given an estimate of du/dt."""
    dtu = np.asarray(dtu, dtype=float)
    j = analytic_flux(model, u)
    if model.kind == "conserved":
        r = dtu + flux_divergence(model, j)
    else:
        r = dtu - j[0]
    scale = np.linalg.norm(dtu)
    return float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))
