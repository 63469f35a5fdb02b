"""Ground truth: closed-form solutions and a semi-implicit Fourier reference solver."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import ConfigurationError, ReferenceFailure
from .models import ModelSpec, free_energy
from .stepper import Trajectory

EXACT = ("heat", "heat_source", "fokker_planck", "damped_wave")


def _fp_variance(t, beta, a):
    # Ornstein-Uhlenbeck variance for drift -2a x, diffusion 1/beta, unit initial variance
    decay = np.exp(-4.0 * a * t)
    return (1.0 - decay) / (2.0 * a * beta) + decay


def exact_solution(name, x, t, beta=2.0, potential_a=0.5, T=1.0):
    """Closed-form solutions on their example domains.

    heat_source uses ``(1 - e^{-t}) sin x + 2``, which satisfies
    ``u_t = u_xx + sin x`` with ``u(x, 0) = 2``.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if name == "heat":
        return np.exp(-t) * np.sin(x) + 2.0
    if name == "heat_source":
        return (1.0 - np.exp(-t)) * np.sin(x) + 2.0
    if name == "fokker_planck":
        s2 = _fp_variance(t, beta, potential_a)
        return np.exp(-x * x / (2.0 * s2)) / np.sqrt(2.0 * np.pi * s2)
    if name == "damped_wave":
        return (1.0 - t / T) * np.exp(-t) * np.cos(x)
    raise ConfigurationError(f"no closed-form solution named {name!r}; choose from {EXACT}")


def exact_time_derivative(name, x, t, beta=2.0, potential_a=0.5, T=1.0):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if name == "heat":
        return -np.exp(-t) * np.sin(x)
    if name == "heat_source":
        return np.exp(-t) * np.sin(x)
    if name == "fokker_planck":
        s2 = _fp_variance(t, beta, potential_a)
        ds2 = 4.0 * potential_a * np.exp(-4.0 * potential_a * t) * (1.0 / (2.0 * potential_a * beta) - 1.0)
        u = exact_solution(name, x, t, beta, potential_a)
        return u * (x * x / (2.0 * s2 * s2) - 1.0 / (2.0 * s2)) * ds2
    if name == "damped_wave":
        return (-1.0 / T - (1.0 - t / T)) * np.exp(-t) * np.cos(x)
    raise ConfigurationError(f"no closed-form solution named {name!r}")


def exact_trajectory(name, basis: spectral.BasisSpec, times, **params):
    x = basis.axis(0)
    states = np.stack([exact_solution(name, x, t, **params) for t in times])
    n = len(times)
    return Trajectory(np.asarray(times, dtype=float), states, None, np.full(n, np.nan), np.full(n, np.nan), basis,
                      {"source": f"exact:{name}"})


def initial_condition(name, basis: spectral.BasisSpec):
    """Named initial states of the worked examples, on ``basis``'s grid."""
    mesh = basis.mesh()
    x = mesh[0]
    if name == "heat":
        return np.sin(x) + 2.0
    if name == "heat_source":
        return np.full(basis.shape, 2.0)
    if name == "fokker_planck":
        return np.exp(-x * x / 2.0) / np.sqrt(2.0 * np.pi)
    if name == "cahn_hilliard_1d":
        return 0.5 * np.sin(np.pi * x) + 1.0
    if name == "cahn_hilliard_2d":
        # sin x sin y on (0, 2pi)^2, written on the centred box [-pi, pi]^2
        return np.sin(mesh[0] + np.pi) * np.sin(mesh[1] + np.pi)
    if name == "allen_cahn":
        return 0.5 * np.cos(np.pi * x)
    raise ConfigurationError(f"no initial-condition preset named {name!r}")


def reference_solve(model: ModelSpec, u0, dt_ref, T, record_every=1):
    """First-order semi-implicit Fourier solver: stiff linear part implicit, cubic explicit.

    Cahn-Hilliard: (1 + dt g1 |k|^4) u^{n+1} = u^n - dt |k|^2 N(u^n)
    Allen-Cahn:    (1 + dt g1 |k|^2) u^{n+1} = u^n - dt N(u^n),   N(u) = g2 (u^3 - u)
    """
    basis = model.basis
    if basis.family != "fourier" or model.name not in ("cahn_hilliard_1d", "cahn_hilliard_2d", "allen_cahn"):
        raise ConfigurationError("the reference solver covers periodic Cahn-Hilliard and Allen-Cahn only")
    n_steps = int(round(T / dt_ref))
    if abs(n_steps * dt_ref - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError(f"T={T} is not a multiple of dt_ref={dt_ref}")
    g1, g2 = model.params["gamma1"], model.params["gamma2"]
    axes = tuple(range(basis.dim))
    ks = []
    for i in range(basis.dim):
        n = basis.grid_size[i]
        f = np.fft.rfftfreq(n, 1.0 / n) if i == basis.dim - 1 else np.fft.fftfreq(n, 1.0 / n)
        ks.append(np.pi * f / basis.half_width)
    k2 = sum(m ** 2 for m in np.meshgrid(*ks, indexing="ij"))
    if model.kind == "conserved":
        denom, nl_factor = 1.0 + dt_ref * g1 * k2 * k2, -dt_ref * k2
    else:
        denom, nl_factor = 1.0 + dt_ref * g1 * k2, -dt_ref * np.ones_like(k2)

    u = np.array(getattr(u0, "values", u0), dtype=float)
    if u.shape != basis.shape:
        raise ConfigurationError("initial state does not match the reference grid")
    u_hat = np.fft.rfftn(u, axes=axes)
    times, states, energies, masses = [], [], [], []
    for n in range(n_steps + 1):
        if n % record_every == 0 or n == n_steps:
            times.append(n * dt_ref)
            states.append(u.copy())
            energies.append(free_energy(model, u))
            masses.append(float(spectral.quadrature(u, basis)))
        if n == n_steps:
            break
        nl = np.fft.rfftn(g2 * (u ** 3 - u), axes=axes)
        u_hat = (u_hat + nl_factor * nl) / denom
        u = np.fft.irfftn(u_hat, s=basis.shape, axes=axes)
        if not np.all(np.isfinite(u)):
            raise ReferenceFailure(f"reference solution blew up at step {n + 1}; check gamma1/gamma2/dt_ref")
    return Trajectory(np.asarray(times), np.asarray(states), None, np.asarray(energies), np.asarray(masses), basis,
                      {"source": "reference", "dt_ref": dt_ref, "n_steps": n_steps})


def restrict(traj: Trajectory, basis: spectral.BasisSpec, times=None):
    """Sample a finer trajectory on a coarser grid that is an integer sub-lattice."""
    fine = traj.basis
    idx = []
    for i in range(basis.dim):
        nf, nc = fine.grid_size[i], basis.grid_size[i]
        if nf % nc:
            raise ConfigurationError(f"grid {nc} is not a sub-lattice of {nf}")
        r = nf // nc
        idx.append(slice(r - 1, None, r))
    states = traj.states[(slice(None),) + tuple(idx)]
    t = traj.times
    if times is not None:
        tol = 1e-9 * max(1.0, float(np.max(t)))
        pick = []
        for s in times:
            i = int(np.argmin(np.abs(t - s)))
            if abs(t[i] - s) > tol:
                raise ConfigurationError(f"reference has no sample at t={s}")
            pick.append(i)
        states, t = states[pick], t[pick]
        energies, masses = traj.energies[pick], traj.masses[pick]
    else:
        energies, masses = traj.energies, traj.masses
    return Trajectory(np.asarray(t), states, None, energies, masses, basis, dict(traj.meta))


@dataclass
class LabeledDataset:
    """Rows of (sample id, coordinates, t, u) for supervised baselines."""

    sample_ids: np.ndarray
    points: np.ndarray  # (M, dim + 1): spatial coordinates then t
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def as_matrix(self):
        """(ids, shared points, targets[n_ids, n_points]); every id must use the same points."""
        ids = np.unique(self.sample_ids)
        first = self.points[self.sample_ids == ids[0]]
        rows = []
        for i in ids:
            mask = self.sample_ids == i
            if not np.array_equal(self.points[mask], first):
                raise ConfigurationError("samples do not share one point set")
            rows.append(self.values[mask])
        return ids, first, np.stack(rows)

    def to_csv(self, path):
        dim = self.points.shape[1] - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_id"] + ["x", "y"][:dim] + ["t", "u"])
            for sid, pt, v in zip(self.sample_ids, self.points, self.values):
                w.writerow([int(sid)] + [repr(float(c)) for c in pt] + [repr(float(v))])

    @classmethod
    def concat(cls, parts):
        return cls(np.concatenate([p.sample_ids for p in parts]), np.concatenate([p.points for p in parts]),
                   np.concatenate([p.values for p in parts]))


def generate_labels(source, basis: spectral.BasisSpec, times, sample_id=0):
    """Labels on ``basis``'s grid at ``times``.

    ``source`` is either a callable ``(x[, y], t) -> u`` or a Trajectory on the
    same or a finer (integer sub-lattice) grid containing those times.
    """
    pts = basis.points()
    rows_pts, rows_val = [], []
    if isinstance(source, Trajectory):
        sub = restrict(source, basis, times)
        for t, state in zip(sub.times, sub.states):
            rows_pts.append(np.column_stack([pts, np.full(len(pts), t)]))
            rows_val.append(state.ravel())
    else:
        for t in times:
            rows_pts.append(np.column_stack([pts, np.full(len(pts), t)]))
            rows_val.append(np.asarray(source(*pts.T, t), dtype=float).ravel())
    points = np.concatenate(rows_pts)
    return LabeledDataset(np.full(len(points), sample_id), points, np.concatenate(rows_val))
