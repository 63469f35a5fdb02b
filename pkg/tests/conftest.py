import numpy as np
import pytest

from dool import spectral
from dool.models import ModelSpec


def fd_gradient(f, params, eps=1e-6):
    """Central differences of a scalar f over every entry of params.arrays()."""
    arrays = [a.copy() for a in params.arrays()]
    grads = []
    for i, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + eps
            fp = f(params.with_arrays(arrays))
            a[idx] = old - eps
            fm = f(params.with_arrays(arrays))
            a[idx] = old
            g[idx] = (fp - fm) / (2 * eps)
        grads.append(g)
    return grads


def rel_err(a, b):
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def fourier_basis(K=2, n=64, half_width=np.pi, dim=1):
    return spectral.BasisSpec("fourier", dim, half_width, K, (n,) * dim)


def catalogue(n=64):
    """One model instance per catalogue entry on a modest grid."""
    f = spectral.BasisSpec
    return [
        ModelSpec("heat", f("fourier", 1, np.pi, 1, (n,))),
        ModelSpec("heat_source", f("fourier", 1, np.pi, 1, (n,))),
        ModelSpec("fokker_planck", f("hermite", 1, 5.0, 5, (200,), 40), {"shift": 0.5}),
        ModelSpec("cahn_hilliard_1d", f("fourier", 1, 1.0, 2, (n,))),
        ModelSpec("cahn_hilliard_2d", f("fourier", 2, np.pi, 1, (32, 32))),
        ModelSpec("allen_cahn", f("fourier", 1, 1.0, 9, (n,))),
    ]


def admissible_field(model, rng):
    """Random smooth field inside the model's domain (positive where required)."""
    b = model.basis
    if model.name == "fokker_planck":
        x = b.axis(0)
        s = rng.uniform(0.6, 1.4)
        return np.exp(-(x - rng.uniform(-0.5, 0.5)) ** 2 / (2 * s * s)) / np.sqrt(2 * np.pi * s * s)
    K = min(b.K, 3) if b.K else 1
    m = b.with_K(K)
    modes = spectral.reduced_modes(m)
    sampling = spectral.SamplingSpec.geometric(m, 2.0 if model.name.startswith("heat") else 0.5, 0.5)
    c = spectral.sample_coefficients(m, sampling, 1, int(rng.integers(1 << 30)))[0]
    assert len(modes) > 0
    return spectral.synthesize(m, c).values


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
