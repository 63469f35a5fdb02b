"""Explicit forward-Euler evolution driven by a flux map ``u -> j``."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .errors import BlowUpError, ConfigurationError, DomainError
from .models import ModelSpec, free_energy


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    fluxes: np.ndarray | None
    energies: np.ndarray
    masses: np.ndarray
    basis: spectral.BasisSpec
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def window(self, t_end):
        """Sub-trajectory with ``t <= t_end`` (inclusive, up to rounding)."""
        keep = self.times <= t_end + 1e-9 * max(1.0, abs(t_end))
        return Trajectory(self.times[keep], self.states[keep],
                          None if self.fluxes is None else self.fluxes[keep],
                          self.energies[keep], self.masses[keep], self.basis, dict(self.meta))


def divergence(basis: spectral.BasisSpec, flux):
    """Sum over axes of the first spectral derivative of each flux component."""
    if basis.family != "fourier":
        raise ConfigurationError("divergence by FFT needs a periodic (Fourier) basis; "
                                 "Hermite fluxes are differentiated by coefficient recurrence in evolve()")
    flux = np.asarray(flux, dtype=float)
    if flux.shape == basis.shape:
        flux = flux[None]
    if flux.shape[0] != basis.dim:
        raise ConfigurationError(f"{basis.dim}-D divergence needs {basis.dim} flux components, got {flux.shape[0]}")
    return sum(spectral.fourier_derivative(basis, flux[ax], 1, ax) for ax in range(basis.dim))


def _rate(model: ModelSpec, flux):
    """du/dt implied by the flux: -div j (conserved) or j (nonconserved)."""
    if model.kind == "nonconserved":
        return flux[0]
    if model.basis.family == "hermite":
        return -spectral.hermite_derivative(model.basis, flux[0], 1)
    return -divergence(model.basis, flux)


def _energy(model, u, meta):
    try:
        return free_energy(model, u)
    except DomainError as exc:
        if "energy" not in meta["warnings_seen"]:
            meta["warnings"].append(f"free energy undefined along the trajectory: {exc}")
            meta["warnings_seen"].add("energy")
        return np.nan


def evolve(u0, flux_map, model: ModelSpec, dt, T, record_every=1, band_limit=None, record_fluxes=True):
    """Iterate ``u <- u - dt div j`` (conserved) or ``u <- u + dt j`` (nonconserved).

    ``u0`` is a SpectralField or grid array on ``model.basis``. ``band_limit``
    optionally truncates the state to Fourier modes ``max|k| <= band_limit``
    after every step; explicit stepping of an analytic flux on a fine grid is
    otherwise unstable for the stiff high modes.
    """
    if dt <= 0 or T < 0:
        raise ConfigurationError("dt must be positive and T non-negative")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError(f"T={T} is not an integer multiple of dt={dt}")
    basis = model.basis
    u = np.array(getattr(u0, "values", u0), dtype=float)
    if u.shape != basis.shape:
        raise ConfigurationError(f"initial state of shape {u.shape} does not match grid {basis.shape}")
    if band_limit is not None:
        u = spectral.band_limit(basis, u, band_limit)

    meta = {"dt": dt, "n_steps": n_steps, "T": T, "model": model.name, "warnings": [], "warnings_seen": set()}
    times, states, fluxes, energies, masses = [], [], [], [], []

    def record(n, u, j):
        times.append(n * dt)
        states.append(u.copy())
        if record_fluxes:
            fluxes.append(j.copy())
        energies.append(_energy(model, u, meta))
        masses.append(float(spectral.quadrature(u, basis)))

    # overflow on the way to a blow-up is reported as BlowUpError below, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps + 1):
            j = np.asarray(flux_map(u), dtype=float)
            if j.shape == basis.shape:
                j = j[None]
            if n % record_every == 0 or n == n_steps:
                record(n, u, j)
            if n == n_steps:
                break
            u = u + dt * _rate(model, j)
            if band_limit is not None:
                u = spectral.band_limit(basis, u, band_limit)
            if not np.all(np.isfinite(u)):
                raise BlowUpError(f"state became non-finite at step {n + 1}", step=n + 1)
            if model.name == "fokker_planck" and "negative" not in meta["warnings_seen"] and u.min() < -model.eps_u:
                meta["warnings"].append(f"state dropped to {u.min():.3g} below -eps_u at step {n + 1}")
                meta["warnings_seen"].add("negative")

    del meta["warnings_seen"]
    return Trajectory(np.asarray(times), np.asarray(states), np.asarray(fluxes) if record_fluxes else None,
                      np.asarray(energies), np.asarray(masses), basis, meta)


def _align(pred_times, ref_times, ref_states):
    """Reference states at the prediction times; linear interpolation between samples."""
    ref_times = np.asarray(ref_times)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(ref_times))))
    out = []
    for t in pred_times:
        i = int(np.searchsorted(ref_times, t - tol))
        if i < len(ref_times) and abs(ref_times[i] - t) <= tol:
            out.append(ref_states[i])
            continue
        if i == 0 or i >= len(ref_times):
            raise ConfigurationError(f"reference does not cover t={t}")
        w = (t - ref_times[i - 1]) / (ref_times[i] - ref_times[i - 1])
        out.append((1 - w) * ref_states[i - 1] + w * ref_states[i])
    return np.asarray(out)


def relative_l2_error(pred, ref):
    """||pred - ref|| / ||ref|| over all recorded space-time samples.

    Accepts Trajectories (times are aligned) or plain arrays of equal shape.
    """
    if isinstance(pred, Trajectory) and isinstance(ref, Trajectory):
        if pred.states.shape[1:] != ref.states.shape[1:]:
            raise ConfigurationError(f"grids differ: {pred.states.shape[1:]} vs {ref.states.shape[1:]}")
        p, r = pred.states, _align(pred.times, ref.times, ref.states)
    else:
        p, r = np.asarray(getattr(pred, "states", pred)), np.asarray(getattr(ref, "states", ref))
        if p.shape != r.shape:
            raise ConfigurationError(f"shapes differ: {p.shape} vs {r.shape}")
    return float(np.linalg.norm(p - r) / np.linalg.norm(r))


def error_series(pred: Trajectory, ref: Trajectory):
    """Per-time relative L2 error."""
    r = _align(pred.times, ref.times, ref.states)
    axes = tuple(range(1, r.ndim))
    return np.sqrt(((pred.states - r) ** 2).sum(axis=axes) / (r ** 2).sum(axis=axes))


def write_trajectory(traj: Trajectory, outdir, extra_meta=None):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    basis = traj.basis
    pts = basis.points()
    coord = ["x", "y"][: basis.dim]
    n_flux = 0 if traj.fluxes is None else traj.fluxes.shape[1]
    with open(out / "fields.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + coord + ["u"] + [f"j{d}" if n_flux > 1 else "j" for d in range(n_flux)])
        for n, t in enumerate(traj.times):
            u = traj.states[n].ravel()
            js = [traj.fluxes[n, d].ravel() for d in range(n_flux)]
            for k in range(pts.shape[0]):
                w.writerow([repr(float(t))] + [repr(float(c)) for c in pts[k]] + [repr(float(u[k]))]
                           + [repr(float(j[k])) for j in js])
    with open(out / "energy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E", "mass"])
        for t, e, m in zip(traj.times, traj.energies, traj.masses):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(m))])
    meta = {"schema_version": 1, "basis": basis.to_dict(), **traj.meta, **(extra_meta or {})}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, default=str))


def read_trajectory(outdir):
    out = Path(outdir)
    meta = json.loads((out / "meta.json").read_text())
    basis = spectral.BasisSpec.from_dict(meta["basis"])
    data = np.genfromtxt(out / "fields.csv", delimiter=",", names=True)
    times = np.unique(data["t"])
    n = basis.n_points
    states = data["u"].reshape(len(times), *basis.shape)
    jcols = [c for c in data.dtype.names if c.startswith("j")]
    fluxes = np.stack([data[c].reshape(len(times), *basis.shape) for c in jcols], axis=1) if jcols else None
    energy = np.genfromtxt(out / "energy.csv", delimiter=",", names=True)
    if data.shape[0] != len(times) * n:
        raise ConfigurationError("fields.csv does not hold a full grid per time level")
    return Trajectory(times, states, fluxes, np.atleast_1d(energy["E"]), np.atleast_1d(energy["mass"]), basis, meta)
