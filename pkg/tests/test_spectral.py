import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dool import spectral
from dool.errors import ConfigurationError, InvalidCoefficientsError, SamplingInfeasibleError

from conftest import fourier_basis


def test_grid_is_right_endpoint_rule():
    b = fourier_basis(n=8)
    x = b.axis(0)
    assert x[-1] == pytest.approx(np.pi)
    assert x[0] == pytest.approx(-np.pi + 2 * np.pi / 8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 7), st.floats(0.5, 3.0), st.sampled_from([1, 2, 3]))
def test_fourier_derivative_exact_on_modes(k, half_width, order):
    b = spectral.BasisSpec("fourier", 1, half_width, 1, (32,))
    w = np.pi * k / half_width
    x = b.axis(0)
    u = np.sin(w * x + 0.3)
    exact = w ** order * np.sin(w * x + 0.3 + order * np.pi / 2)
    assert np.allclose(spectral.derivative(b, u, order), exact, atol=1e-9 * max(1, w ** order))


def test_2d_derivative_axes():
    b = spectral.BasisSpec("fourier", 2, np.pi, 1, (16, 24))
    x, y = b.mesh()
    u = np.sin(x) * np.cos(2 * y)
    assert np.allclose(spectral.derivative(b, u, 1, 0), np.cos(x) * np.cos(2 * y), atol=1e-12)
    assert np.allclose(spectral.derivative(b, u, 2, 1), -4 * u, atol=1e-11)


def test_hermite_recurrence_matches_direct_and_is_orthonormal():
    x = np.linspace(-6, 6, 50)
    psi = spectral.hermite_functions(12, x)
    for k in range(12):
        assert np.allclose(psi[k], spectral.hermite_function_direct(k, x), atol=1e-12)
    b = spectral.BasisSpec("hermite", 1, 12.0, 5, (800,))
    P = spectral.hermite_functions(20, b.axis(0))
    assert np.allclose(P @ P.T * b.cell(0), np.eye(20), atol=1e-10)


def test_hermite_derivative_of_gaussian():
    b = spectral.BasisSpec("hermite", 1, 8.0, 5, (400,), 40)
    x = b.axis(0)
    u = np.exp(-x * x)
    assert np.allclose(spectral.derivative(b, u), -2 * x * u, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([1, 2]), st.integers(1, 3))
def test_project_inverts_synthesize(seed, dim, K):
    b = spectral.BasisSpec("fourier", dim, 1.3, K, (16,) * dim)
    c = spectral.sample_coefficients(b, spectral.SamplingSpec.geometric(b, 0.4, 1.0), 1, seed)[0]
    f = spectral.synthesize(b, c)
    assert np.allclose(spectral.project(b, f.values), c, atol=1e-12)
    assert spectral.encode(b, c).size == spectral.branch_size(b)


def test_synthesize_rejects_non_hermitian():
    b = fourier_basis(K=1)
    with pytest.raises(InvalidCoefficientsError):
        spectral.synthesize(b, np.array([1.0, 0.0, 0.5j]))


def test_fourier_grid_must_resolve_K():
    with pytest.raises(ConfigurationError):
        spectral.BasisSpec("fourier", 1, 1.0, 4, (8,))


def test_quadrature_exact_for_trig():
    b = fourier_basis(n=16)
    x = b.axis(0)
    assert spectral.quadrature(np.cos(x) ** 2 + 2, b) == pytest.approx(np.pi + 4 * np.pi, abs=1e-12)


def test_band_limit_and_resample():
    b = fourier_basis(n=32)
    x = b.axis(0)
    u = np.sin(x) + 0.1 * np.cos(5 * x)
    assert np.allclose(spectral.band_limit(b, u, 2), np.sin(x), atol=1e-13)
    fine = b.with_grid(128)
    assert np.allclose(spectral.resample(b, u, fine), np.sin(fine.axis(0)) + 0.1 * np.cos(5 * fine.axis(0)),
                       atol=1e-12)


def test_sampling_is_reproducible_and_in_rectangles():
    b = fourier_basis(K=3)
    s = spectral.SamplingSpec.geometric(b, 2.0, 0.5, positivity_floor=0.1)
    a = spectral.sample_coefficients(b, s, 20, 3)
    again = spectral.sample_coefficients(b, s, 20, 3)
    assert all(np.array_equal(p, q) for p, q in zip(a, again))
    for c in a:
        for n, m in enumerate(spectral.reduced_modes(b)):
            z = c[m[0] + 3]
            assert abs(z.real - s.centers[n].real) <= s.half_widths[n, 0] + 1e-15
            assert abs(z.imag - s.centers[n].imag) <= s.half_widths[n, 1] + 1e-15
        assert spectral.synthesize(b, c).values.min() >= 0.1


def test_sampling_infeasible_reports():
    b = fourier_basis(K=1)
    s = spectral.SamplingSpec.geometric(b, 0.0, 0.1, positivity_floor=5.0)
    s.max_retries = 5
    with pytest.raises(SamplingInfeasibleError):
        spectral.sample_coefficients(b, s, 1, 0)


def test_coefficient_json_roundtrip(tmp_path):
    b = spectral.BasisSpec("fourier", 2, np.pi, 1, (16, 16))
    cs = spectral.sample_coefficients(b, spectral.SamplingSpec.geometric(b, 0.0, 0.5), 3, 1)
    doc = spectral.coeffs_to_json(b, cs, tmp_path / "c.json")
    b2, cs2 = spectral.coeffs_from_json(doc)
    assert b2 == b
    assert np.allclose(np.asarray(cs), cs2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([1, 2]))
def test_divergence_integrates_to_zero(seed, dim):
    b = spectral.BasisSpec("fourier", dim, 2.0, 1, (24,) * dim)
    u = np.random.default_rng(seed).normal(size=b.shape)
    for ax in range(dim):
        d = spectral.spectral_derivative(spectral.SpectralField(b, u), 1, ax).values
        assert abs(spectral.quadrature(d, b)) <= 1e-12 * max(1.0, np.abs(u).sum())


def test_gaussian_quadrature_on_hermite_grid():
    # the box [-5, 5] misses a tail of about 1.4e-6, so compare with the truncated integral
    b = spectral.BasisSpec("hermite", 1, 5.0, 5, (400,))
    exact = np.sqrt(2 * np.pi) * math.erf(5 / np.sqrt(2))
    assert spectral.quadrature(np.exp(-b.axis(0) ** 2 / 2), b) == pytest.approx(exact, abs=1e-8)


def test_parseval_and_third_derivative():
    b = spectral.BasisSpec("fourier", 1, 1.7, 3, (32,))
    c = spectral.sample_coefficients(b, spectral.SamplingSpec.geometric(b, 0.3, 1.0), 1, 11)[0]
    f = spectral.synthesize(b, c)
    assert spectral.quadrature(f.values ** 2, b) == pytest.approx(2 * b.half_width * np.sum(np.abs(c) ** 2),
                                                                  rel=1e-10)
    d3 = spectral.spectral_derivative(f, 3)
    assert np.allclose(d3.values, spectral.synthesize(b, d3.coeffs).values, atol=1e-10)


def test_heat_sampling_monte_carlo():
    # default widths r0 = 0.5 around the background constant 2
    b = spectral.BasisSpec("fourier", 1, np.pi, 1, (128,))
    s = spectral.SamplingSpec.geometric(b, 2.0, 0.5, positivity_floor=0.1)
    cs = spectral.sample_coefficients(b, s, 10000, 0)
    vals = np.stack([spectral.synthesize(b, c).values for c in cs])
    assert vals.min() >= 0.1
    centre = spectral.synthesize(b, spectral._assemble(b, spectral.reduced_modes(b), s.centers)).values
    assert np.max(np.abs(vals.mean(axis=0) - centre)) <= 0.05 * np.max(np.abs(centre))
