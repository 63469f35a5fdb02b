"""Fourier and Hermite bases on uniform grids.

Grids follow ``x_k = -I + 2kI/N`` for ``k = 1..N``. Fourier modes are
``exp(i*pi*k.x/I)`` on the periodic box ``[-I, I]^d`` with the max-norm
truncation ``max|k_i| <= K``; Hermite modes are the L2-normalized Hermite
functions on ``[-I, I]`` (1-D only), treated as vanishing at the boundary.

Fourier coefficient arrays hold the full index set ``-K..K`` per axis
(shape ``(2K+1,)`` or ``(2K+1, 2K+1)``, offset by ``K``); Hermite coefficient
arrays have shape ``(K+1,)``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from math import factorial, pi, sqrt
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InvalidCoefficientsError, SamplingInfeasibleError

FAMILIES = ("fourier", "hermite")


@dataclass(frozen=True)
class BasisSpec:
    family: str = "fourier"
    dim: int = 1
    half_width: float = pi
    K: int = 1
    grid_size: tuple = (128,)
    # number of Hermite modes used when differentiating grid values
    resolution: int = 40

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown basis family {self.family!r}")
        if self.dim not in (1, 2):
            raise ConfigurationError("only 1-D and 2-D bases are supported")
        if self.family == "hermite" and self.dim != 1:
            raise ConfigurationError("the Hermite basis is 1-D only")
        sizes = tuple(int(n) for n in np.atleast_1d(self.grid_size))
        if len(sizes) == 1 and self.dim == 2:
            sizes = sizes * 2
        object.__setattr__(self, "grid_size", sizes)
        if len(sizes) != self.dim or min(sizes) < 1:
            raise ConfigurationError(f"grid_size {sizes} does not match dim={self.dim}")
        if self.half_width <= 0 or self.K < 0:
            raise ConfigurationError("half_width must be positive and K non-negative")
        if self.family == "fourier" and min(sizes) <= 2 * self.K:
            raise ConfigurationError(f"Fourier grid needs N > 2K (N={min(sizes)}, K={self.K})")

    @property
    def shape(self):
        return self.grid_size

    @property
    def n_points(self):
        return int(np.prod(self.grid_size))

    def axis(self, i=0):
        n = self.grid_size[i]
        return -self.half_width + 2.0 * self.half_width * np.arange(1, n + 1) / n

    def mesh(self):
        """Coordinate arrays, each of grid shape (``indexing='ij'``)."""
        return np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij")

    def points(self):
        """Grid points as an (N, dim) array in row-major order, for the trunk net."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def cell(self, i=0):
        return 2.0 * self.half_width / self.grid_size[i]

    def with_grid(self, *sizes):
        return replace(self, grid_size=tuple(sizes) if len(sizes) > 1 else (sizes[0],) * self.dim)

    def with_K(self, K):
        return replace(self, K=int(K))

    def coeff_shape(self, K=None):
        K = self.K if K is None else K
        if self.family == "hermite":
            return (K + 1,)
        return (2 * K + 1,) * self.dim

    def to_dict(self):
        return {"family": self.family, "dim": self.dim, "half_width": self.half_width,
                "K": self.K, "grid_size": list(self.grid_size), "resolution": self.resolution}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], int(d["dim"]), float(d["half_width"]), int(d["K"]),
                   tuple(d["grid_size"]), int(d.get("resolution", 40)))


@dataclass
class SpectralField:
    basis: BasisSpec
    values: np.ndarray
    coeffs: np.ndarray | None = field(default=None, repr=False)


# --------------------------------------------------------------------------
# mode bookkeeping

def reduced_modes(basis: BasisSpec, K=None):
    """Independent modes: ``k >= 0`` in 1-D, the lexicographic upper half in 2-D."""
    K = basis.K if K is None else K
    if basis.family == "hermite" or basis.dim == 1:
        return [(k,) for k in range(K + 1)]
    return [(kx, ky) for kx in range(0, K + 1) for ky in range(-K, K + 1) if kx > 0 or ky >= 0]


def mode_norm(mode):
    return max(abs(k) for k in mode)


def _index(mode, K):
    return tuple(k + K for k in mode)


def branch_size(basis: BasisSpec):
    if basis.family == "hermite":
        return basis.K + 1
    return 2 * len(reduced_modes(basis)) - 1


def encode(basis: BasisSpec, coeffs):
    """Real branch-net input: Re c_0, then (Re, Im) of each further reduced mode."""
    coeffs = np.asarray(coeffs)
    if basis.family == "hermite":
        return np.real(coeffs).astype(float)
    out = []
    for n, mode in enumerate(reduced_modes(basis)):
        c = coeffs[_index(mode, basis.K)]
        out.append(c.real)
        if n > 0:
            out.append(c.imag)
    return np.asarray(out, dtype=float)


def encode_batch(basis, coeff_list):
    return np.stack([encode(basis, c) for c in coeff_list])


# --------------------------------------------------------------------------
# basis functions

def hermite_functions(n_modes, x):
    """Normalized Hermite functions psi_0..psi_{n_modes-1} at ``x``; shape (n_modes, len(x)).

    Uses the normalized three-term recurrence, which avoids the factorial
    overflow of the textbook ``H_k e^{-x^2/2} / sqrt(2^k k! sqrt(pi))`` form.
    """
    x = np.asarray(x, dtype=float)
    psi = np.zeros((n_modes,) + x.shape)
    psi[0] = pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_modes > 1:
        psi[1] = sqrt(2.0) * x * psi[0]
    for k in range(1, n_modes - 1):
        psi[k + 1] = sqrt(2.0 / (k + 1)) * x * psi[k] - sqrt(k / (k + 1)) * psi[k - 1]
    return psi


def hermite_polynomial(k, x):
    """Physicists' Hermite polynomial by H_{k+1} = 2xH_k - 2kH_{k-1}."""
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), 2.0 * x
    if k == 0:
        return h_prev
    for n in range(1, k):
        h_prev, h = h, 2.0 * x * h - 2.0 * n * h_prev
    return h


def hermite_function_direct(k, x):
    return hermite_polynomial(k, x) * np.exp(-0.5 * np.asarray(x) ** 2) / sqrt(2.0 ** k * factorial(k) * sqrt(pi))


def hermite_derivative_coeffs(c, order=1):
    """Coefficients of d^order/dx^order of sum c_k psi_k (length grows by ``order``)."""
    c = np.asarray(c, dtype=float)
    for _ in range(order):
        n = c.size
        d = np.zeros(n + 1)
        k = np.arange(n)
        # psi_k' = sqrt(k/2) psi_{k-1} - sqrt((k+1)/2) psi_{k+1}
        d[:n - 1] += np.sqrt(k[1:] / 2.0) * c[1:]
        d[1:] -= np.sqrt((k + 1) / 2.0) * c
        c = d
    return c


def _fourier_matrix(basis, i, K):
    x = basis.axis(i)
    k = np.arange(-K, K + 1)
    return np.exp(1j * pi * np.outer(x, k) / basis.half_width)


# --------------------------------------------------------------------------
# synthesis / analysis

def check_hermitian(coeffs, tol=1e-12):
    coeffs = np.asarray(coeffs)
    mirrored = np.conj(coeffs[(slice(None, None, -1),) * coeffs.ndim])
    scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
    err = float(np.max(np.abs(coeffs - mirrored), initial=0.0))
    if err > tol * scale:
        raise InvalidCoefficientsError(f"coefficients violate c_(-k) = conj(c_k) (residual {err:.2e})")


def synthesize(basis: BasisSpec, coeffs) -> SpectralField:
    coeffs = np.asarray(coeffs)
    if basis.family == "hermite":
        coeffs = np.real_if_close(coeffs).astype(float)
        values = coeffs @ hermite_functions(coeffs.size, basis.axis(0))
        return SpectralField(basis, values, coeffs)
    if coeffs.ndim != basis.dim or len(set(coeffs.shape)) != 1 or coeffs.shape[0] % 2 == 0:
        raise InvalidCoefficientsError(f"coefficient array of shape {coeffs.shape} does not fit a {basis.dim}-D Fourier basis")
    K = (coeffs.shape[0] - 1) // 2
    if min(basis.grid_size) <= 2 * K:
        raise InvalidCoefficientsError(f"K={K} is not resolved by grid {basis.grid_size}")
    check_hermitian(coeffs)
    if basis.dim == 1:
        values = _fourier_matrix(basis, 0, K) @ coeffs
    else:
        values = _fourier_matrix(basis, 0, K) @ coeffs @ _fourier_matrix(basis, 1, K).T
    return SpectralField(basis, values.real.copy(), coeffs)


def project(basis: BasisSpec, values, K=None):
    """Discrete coefficients of grid values up to truncation ``K`` (default basis.K)."""
    K = basis.K if K is None else K
    values = np.asarray(values, dtype=float)
    if basis.family == "hermite":
        psi = hermite_functions(K + 1, basis.axis(0))
        return psi @ values * basis.cell(0)
    if min(basis.grid_size) <= 2 * K:
        raise ConfigurationError(f"cannot extract K={K} modes from grid {basis.grid_size}")
    out = np.fft.fftn(values) / values.size
    for i in range(basis.dim):
        n = basis.grid_size[i]
        k = np.fft.fftfreq(n, 1.0 / n)
        phase = np.exp(-1j * pi * k * basis.axis(i)[0] / basis.half_width)
        shape = [1] * basis.dim
        shape[i] = n
        out = out * phase.reshape(shape)
    idx = np.arange(-K, K + 1)
    return out[np.ix_(*([idx] * basis.dim))]


def band_limit(basis: BasisSpec, values, K):
    """Keep only Fourier modes with max|k_i| <= K (Galerkin truncation of grid values)."""
    if basis.family != "fourier":
        raise ConfigurationError("band limiting is defined for the Fourier basis only")
    spec = np.fft.fftn(values)
    for i in range(basis.dim):
        n = basis.grid_size[i]
        mask = np.abs(np.fft.fftfreq(n, 1.0 / n)) <= K
        shape = [1] * basis.dim
        shape[i] = n
        spec = spec * mask.reshape(shape)
    return np.fft.ifftn(spec).real


def resample(basis: BasisSpec, values, target: BasisSpec):
    """Spectral interpolation of periodic grid values onto another grid of the same box."""
    if basis.family != "fourier" or target.family != "fourier" or basis.dim != target.dim:
        raise ConfigurationError("resampling is defined between Fourier grids of equal dimension")
    if basis.half_width != target.half_width:
        raise ConfigurationError("grids cover different boxes")
    K = (min(min(basis.grid_size), min(target.grid_size)) - 1) // 2
    c = project(basis, values, K)
    return synthesize(target.with_K(K), c).values


def _wavenumbers(basis, axis):
    n = basis.grid_size[axis]
    return pi * np.fft.rfftfreq(n, 1.0 / n) / basis.half_width


def fourier_derivative(basis: BasisSpec, values, order=1, axis=0):
    """Exact derivative of band-limited periodic grid values via the real FFT."""
    n = basis.grid_size[axis]
    kappa = _wavenumbers(basis, axis)
    mult = (1j * kappa) ** order
    if n % 2 == 0 and order % 2 == 1:
        mult[-1] = 0.0
    spec = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = mult.size
    return np.fft.irfft(spec * mult.reshape(shape), n=n, axis=axis)


def hermite_derivative(basis: BasisSpec, values, order=1, modes=None):
    modes = basis.resolution if modes is None else modes
    c = project(basis, values, K=modes - 1)
    d = hermite_derivative_coeffs(c, order)
    return d @ hermite_functions(d.size, basis.axis(0))


def spectral_derivative(f: SpectralField, order=1, axis=0) -> SpectralField:
    if order not in (1, 2, 3):
        raise ConfigurationError(f"derivative order must be 1, 2 or 3, got {order}")
    basis = f.basis
    if axis >= basis.dim:
        raise ConfigurationError(f"axis {axis} out of range for a {basis.dim}-D field")
    if basis.family == "hermite":
        if f.coeffs is not None:
            d = hermite_derivative_coeffs(f.coeffs, order)
            return SpectralField(basis, d @ hermite_functions(d.size, basis.axis(0)), d)
        return SpectralField(basis, hermite_derivative(basis, f.values, order))
    values = fourier_derivative(basis, np.asarray(f.values, dtype=float), order, axis)
    coeffs = None
    if f.coeffs is not None:
        K = (f.coeffs.shape[0] - 1) // 2
        k = pi * np.arange(-K, K + 1) / basis.half_width
        shape = [1] * basis.dim
        shape[axis] = k.size
        coeffs = f.coeffs * ((1j * k) ** order).reshape(shape)
    return SpectralField(basis, values, coeffs)


def derivative(basis: BasisSpec, values, order=1, axis=0):
    """Array-level shortcut used by the model and stepping code."""
    if basis.family == "hermite":
        return hermite_derivative(basis, values, order)
    return fourier_derivative(basis, values, order, axis)


def quadrature(values, basis: BasisSpec):
    """Rectangle rule (2I/N)^d * sum(values) over the trailing grid axes."""
    values = np.asarray(values, dtype=float)
    axes = tuple(range(values.ndim - basis.dim, values.ndim))
    weight = np.prod([basis.cell(i) for i in range(basis.dim)])
    return weight * values.sum(axis=axes)


# --------------------------------------------------------------------------
# random coefficient sampling

@dataclass
class SamplingSpec:
    """Uniform rectangles in the complex plane, one per reduced mode."""

    centers: np.ndarray  # complex, one per reduced mode
    half_widths: np.ndarray  # (n_modes, 2): real and imaginary half widths
    positivity_floor: float = 0.0
    max_retries: int = 1000

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=complex)
        self.half_widths = np.asarray(self.half_widths, dtype=float).reshape(-1, 2)
        if self.half_widths.shape[0] != self.centers.size:
            raise ConfigurationError("one rectangle per mode is required")
        if np.any(self.half_widths < 0) or self.positivity_floor < 0:
            raise ConfigurationError("half widths and the positivity floor must be non-negative")

    @classmethod
    def geometric(cls, basis: BasisSpec, center0=0.0, r0=0.5, positivity_floor=0.0, centers=None):
        """Half width r0 * 2^-|k| on every mode; centre ``center0`` on the zero mode."""
        modes = reduced_modes(basis)
        c = np.zeros(len(modes), dtype=complex)
        c[0] = center0
        if centers:
            for mode, val in centers.items():
                c[modes.index(tuple(np.atleast_1d(mode)))] = val
        widths = np.array([[r0 * 2.0 ** -mode_norm(m)] * 2 for m in modes])
        if basis.family == "hermite":
            widths[:, 1] = 0.0
        widths[0, 1] = 0.0
        return cls(c, widths, positivity_floor)

    def to_dict(self):
        return {"centers": [[z.real, z.imag] for z in self.centers],
                "half_widths": self.half_widths.tolist(),
                "positivity_floor": self.positivity_floor}


def _assemble(basis, modes, draws):
    if basis.family == "hermite":
        return draws.real.copy()
    K = basis.K
    c = np.zeros(basis.coeff_shape(), dtype=complex)
    for mode, z in zip(modes, draws):
        if mode_norm(mode) == 0:
            z = complex(z.real, 0.0)
        c[_index(mode, K)] = z
        c[_index(tuple(-k for k in mode), K)] = np.conj(z)
    return c


def sample_coefficients(basis: BasisSpec, sampling: SamplingSpec, n_samples, seed):
    """``n_samples`` coefficient arrays, each drawn from its own ``(seed, index)`` stream."""
    if n_samples < 1:
        raise ConfigurationError("at least one sample is required")
    modes = reduced_modes(basis)
    if sampling.centers.size != len(modes):
        raise ConfigurationError(f"sampling spec has {sampling.centers.size} modes, basis needs {len(modes)}")
    lo_re = sampling.centers.real - sampling.half_widths[:, 0]
    lo_im = sampling.centers.imag - sampling.half_widths[:, 1]
    out = []
    for b in range(n_samples):
        rng = np.random.default_rng([int(seed), b])
        for _ in range(sampling.max_retries):
            u = rng.random((len(modes), 2))
            draws = (lo_re + 2 * sampling.half_widths[:, 0] * u[:, 0]) + 1j * (lo_im + 2 * sampling.half_widths[:, 1] * u[:, 1])
            c = _assemble(basis, modes, draws)
            if sampling.positivity_floor <= 0 or synthesize(basis, c).values.min() >= sampling.positivity_floor:
                out.append(c)
                break
        else:
            raise SamplingInfeasibleError(
                f"sample {b}: no draw with min u >= {sampling.positivity_floor} after "
                f"{sampling.max_retries} tries; half widths per mode {sampling.half_widths.tolist()}")
    return out


# --------------------------------------------------------------------------
# export

def field_to_csv(f: SpectralField, path):
    names = ["x", "y"][: f.basis.dim]
    pts = f.basis.points()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["value"])
        for row, v in zip(pts, np.asarray(f.values).ravel()):
            w.writerow([repr(float(a)) for a in row] + [repr(float(v))])


def coeffs_to_json(basis: BasisSpec, coeff_list, path=None):
    entries = []
    for c in coeff_list:
        c = np.asarray(c)
        if basis.family == "hermite":
            modes = [{"k": [k], "re": float(c[k]), "im": 0.0} for k in range(c.size)]
        else:
            K = (c.shape[0] - 1) // 2
            modes = []
            for idx in np.ndindex(*c.shape):
                k = [i - K for i in idx]
                modes.append({"k": k, "re": float(c[idx].real), "im": float(c[idx].imag)})
        entries.append(modes)
    doc = {"basis": basis.to_dict(), "samples": entries}
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=2))
    return doc


def coeffs_from_json(doc):
    basis = BasisSpec.from_dict(doc["basis"])
    out = []
    for modes in doc["samples"]:
        c = np.zeros(basis.coeff_shape(), dtype=float if basis.family == "hermite" else complex)
        for m in modes:
            if basis.family == "hermite":
                c[m["k"][0]] = m["re"]
            else:
                c[_index(tuple(m["k"]), basis.K)] = complex(m["re"], m["im"])
        out.append(c)
    return basis, out
