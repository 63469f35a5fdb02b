import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dool import oracles, spectral
from dool.errors import BlowUpError, ConfigurationError
from dool.models import ModelSpec, analytic_flux
from dool.stepper import evolve, read_trajectory, relative_l2_error, write_trajectory

from conftest import fourier_basis

trapezoid = getattr(np, "trapezoid", None) or np.trapz


def heat_model(n=64):
    return ModelSpec("heat", fourier_basis(K=1, n=n))


def test_analytic_heat_matches_exact():
    m = heat_model()
    u0 = oracles.initial_condition("heat", m.basis)
    traj = evolve(u0, lambda u: analytic_flux(m, u), m, 1e-3, 1.0, 10)
    ref = oracles.exact_trajectory("heat", m.basis, traj.times)
    assert relative_l2_error(traj, ref) < 1e-3


def test_explicit_blowup_is_reported():
    m = ModelSpec("cahn_hilliard_1d", spectral.BasisSpec("fourier", 1, 1.0, 2, (128,)))
    u0 = oracles.initial_condition("cahn_hilliard_1d", m.basis) + 1e-3 * np.cos(60 * np.pi * m.basis.axis(0))
    with pytest.raises(BlowUpError):
        evolve(u0, lambda u: analytic_flux(m, u), m, 1e-3, 0.2)


def test_T_must_be_multiple_of_dt():
    m = heat_model()
    with pytest.raises(ConfigurationError):
        evolve(oracles.initial_condition("heat", m.basis), lambda u: analytic_flux(m, u), m, 3e-3, 0.01)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["cahn_hilliard_1d", "heat"]))
def test_conservative_stepping_keeps_mass(seed, name):
    # any flux field, even a random one, leaves the integral of u unchanged
    b = spectral.BasisSpec("fourier", 1, 1.0, 2, (64,))
    m = ModelSpec(name, b)
    rng = np.random.default_rng(seed)
    u0 = 2.0 + 0.3 * np.sin(np.pi * b.axis(0))
    traj = evolve(u0, lambda u: rng.normal(size=(1,) + b.shape), m, 1e-4, 2e-3)
    assert np.max(np.abs(np.diff(traj.masses))) <= 1e-12 * abs(traj.masses[0])


@pytest.mark.parametrize("name,T", [("cahn_hilliard_1d", 0.05), ("allen_cahn", 0.05)])
def test_reference_solver_converges_in_dt(name, T):
    b = spectral.BasisSpec("fourier", 1, 1.0, 2, (256,))
    m = ModelSpec(name, b)
    u0 = oracles.initial_condition(name, b)
    fine = oracles.reference_solve(m, u0, 1e-6, T).states[-1]
    e1 = np.linalg.norm(oracles.reference_solve(m, u0, 1e-4, T).states[-1] - fine)
    e2 = np.linalg.norm(oracles.reference_solve(m, u0, 5e-5, T).states[-1] - fine)
    assert 1.6 < e1 / e2 < 2.4  # first order in time


def test_reference_energy_decreases():
    b = spectral.BasisSpec("fourier", 2, np.pi, 1, (64, 64))
    m = ModelSpec("cahn_hilliard_2d", b)
    traj = oracles.reference_solve(m, oracles.initial_condition("cahn_hilliard_2d", b), 1e-3, 0.1)
    assert np.all(np.diff(traj.energies) <= 1e-12)
    assert np.ptp(traj.masses) < 1e-10


def test_restrict_and_labels():
    b = spectral.BasisSpec("fourier", 1, 1.0, 2, (256,))
    m = ModelSpec("allen_cahn", b)
    traj = oracles.reference_solve(m, oracles.initial_condition("allen_cahn", b), 1e-3, 0.01)
    coarse = b.with_grid(64)
    sub = oracles.restrict(traj, coarse, [0.0, 0.005])
    assert np.allclose(sub.states[0], oracles.initial_condition("allen_cahn", coarse))
    labels = oracles.generate_labels(traj, coarse, [0.0, 0.01], sample_id=3)
    ids, pts, vals = labels.as_matrix()
    assert ids.tolist() == [3] and pts.shape == (128, 2) and vals.shape == (1, 128)
    with pytest.raises(ConfigurationError):
        oracles.restrict(traj, b.with_grid(100))


def test_fp_exact_is_normalized_gaussian():
    x = np.linspace(-10, 10, 4001)
    for t in (0.0, 0.25, 0.5):
        u = oracles.exact_solution("fokker_planck", x, t)
        assert trapezoid(u, x) == pytest.approx(1.0, abs=1e-10)
        var = trapezoid(x * x * u, x)
        assert var == pytest.approx(0.5 + 0.5 * np.exp(-2 * t), rel=1e-8)


def test_trajectory_roundtrip(tmp_path):
    b = spectral.BasisSpec("fourier", 2, np.pi, 1, (8, 8))
    m = ModelSpec("cahn_hilliard_2d", b)
    u0 = oracles.initial_condition("cahn_hilliard_2d", b)
    traj = evolve(u0, lambda u: analytic_flux(m, u), m, 1e-3, 3e-3)
    write_trajectory(traj, tmp_path)
    back = read_trajectory(tmp_path)
    assert np.allclose(back.states, traj.states)
    assert np.allclose(back.fluxes, traj.fluxes)
    assert np.allclose(back.times, traj.times)


def test_step_doubling_is_first_order():
    m = heat_model()
    u0 = oracles.initial_condition("heat", m.basis)
    f = lambda u: analytic_flux(m, u)
    ref = evolve(u0, f, m, 1e-3 / 8, 0.5).states[-1]
    e1 = np.linalg.norm(evolve(u0, f, m, 1e-3, 0.5).states[-1] - ref)
    e2 = np.linalg.norm(evolve(u0, f, m, 5e-4, 0.5).states[-1] - ref)
    assert 1.5 <= e1 / e2 <= 2.5


def test_divergence_and_error_examples():
    from dool.stepper import divergence
    b = spectral.BasisSpec("fourier", 2, np.pi, 1, (16, 16))
    x, y = b.mesh()
    assert np.allclose(divergence(b, np.stack([np.sin(x), np.zeros_like(x)])), np.cos(x), atol=1e-12)
    r = np.random.default_rng(0).normal(size=(4, 16, 16))
    assert relative_l2_error(1.01 * r, r) == pytest.approx(0.01, abs=1e-12)
    assert relative_l2_error(r, r) == 0.0


def test_fokker_planck_box_mass_is_not_conserved_by_the_true_solution():
    # the contracting Gaussian pulls mass in through x = +-5, so box mass grows along the exact solution
    # and the analytic-flux stepping follows it with the same sign and order
    b = spectral.BasisSpec("hermite", 1, 5.0, 5, (400,), 40)
    times = np.arange(4) * 1e-3
    ex = oracles.exact_trajectory("fokker_planck", b, times)
    dm_exact = np.diff([spectral.quadrature(s, b) for s in ex.states])
    m = ModelSpec("fokker_planck", b, {"beta": 2.0, "potential_a": 0.5, "shift": 0.5})
    tr = evolve(oracles.initial_condition("fokker_planck", b), lambda u: analytic_flux(m, u), m, 1e-3, 3e-3)
    dm = np.diff(tr.masses)
    assert np.all(dm_exact > 5e-9)
    assert np.all(dm > 0.3 * dm_exact) and np.all(dm < 1.5 * dm_exact)
