import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from kbmlab import semigroup
from kbmlab.errors import SpectrumError
from kbmlab.model import SpectralWindow
from kbmlab.semigroup import (
    RetainedTerm,
    StateVector,
    contour_projector,
    equilibrium_decay,
    propagate,
    spectral_gap,
)

T_GRID = np.linspace(1.0, 5.0, 9)


@pytest.fixture(scope="module")
def u_random():
    return StateVector.random_smooth(K_max=8.0, M=12, seed=3)


def test_state_vector_basics():
    u = StateVector.basis((1, 0), 1, 2, amplitude=2.0) + StateVector.constant(2, value=1j)
    assert u.norm() == pytest.approx(math.sqrt(5))
    assert u.norm(2.0) == pytest.approx(math.sqrt(4 * 9 + 1))  # (1+1+1)^2 * |2|^2 + 1
    assert u.mean() == 1j
    assert (u - u).norm() == 0.0
    assert list(u.coeffs) == [(0, 0), (1, 0)]
    with pytest.raises(ValueError):
        StateVector({(0, 0): np.ones(3)}, 2)
    with pytest.raises(ValueError):
        StateVector({(0, 0): np.array([np.nan] * 5)}, 2)
    with pytest.raises(ValueError):
        u + StateVector.constant(3)


def test_random_smooth_is_seeded_and_decays():
    a = StateVector.random_smooth(K_max=4.0, M=6, seed=1)
    b = StateVector.random_smooth(K_max=4.0, M=6, seed=1)
    c = StateVector.random_smooth(K_max=4.0, M=6, seed=2)
    assert all(np.array_equal(a.coeffs[k], b.coeffs[k]) for k in a.coeffs)
    assert not np.array_equal(a.coeffs[(0, 0)], c.coeffs[(0, 0)])
    assert np.abs(a.coeffs[(0, 0)][0]) < 1e-3 * np.abs(a.coeffs[(0, 0)]).max()


def test_propagate_zero_time_is_identity(u_random):
    v = propagate(10.0, u_random, 0.0)
    assert all(np.array_equal(v.coeffs[k], u_random.coeffs[k]) for k in u_random.coeffs)
    with pytest.raises(ValueError):
        propagate(10.0, u_random, -0.1)
    with pytest.raises(ValueError):
        propagate(0.0, u_random, 1.0)


def test_propagate_constant_is_invariant():
    u = StateVector.constant(6)
    for t in (0.5, 3.0, 20.0):
        assert propagate(7.0, u, t).coeffs[(0, 0)].tolist() == u.coeffs[(0, 0)].tolist()


def test_propagate_pure_vertical_mode():
    u = StateVector.basis((0, 0), 1, 4)
    for t in (0.1, 1.0, 2.5):
        assert propagate(2.0, u, t).coeffs[(0, 0)][5] == pytest.approx(math.exp(-2 * t), rel=1e-14)


@given(st.floats(0, 2), st.floats(0, 2), st.integers(0, 1000))
def test_semigroup_property(t1, t2, seed):
    u = StateVector.random_smooth(K_max=4.0, M=10, seed=seed)
    a = propagate(30.0, u, t1 + t2)
    b = propagate(30.0, propagate(30.0, u, t1), t2)
    assert (a - b).norm() <= 1e-8 * max(a.norm(), 1e-300) + 1e-14


@given(st.floats(0, 10), st.integers(0, 1000))
def test_mass_conservation(t, seed):
    u = StateVector.random_smooth(K_max=4.0, M=10, seed=seed)
    assert propagate(20.0, u, t).mean() == u.mean()


@given(st.floats(1, 10), st.integers(0, 1000))
def test_contraction_after_unit_time(t, seed):
    u = StateVector.random_smooth(K_max=8.0, M=10, seed=seed)
    assert propagate(15.0, u, t).norm() <= u.norm() * (1 + 1e-12)


def test_expm_fallback_agrees(monkeypatch, u_random):
    ref = propagate(10.0, u_random, 0.7)
    semigroup._decomposition.cache_clear()
    monkeypatch.setattr(semigroup, "COND_MAX", 0.0)
    try:
        alt = propagate(10.0, u_random, 0.7)
    finally:
        semigroup._decomposition.cache_clear()
    assert (ref - alt).norm() < 1e-10 * ref.norm()


def test_contour_projector_and_jordan_term():
    J = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]], dtype=complex)
    Pi = contour_projector(J, 1.0, 1.0)
    assert np.allclose(Pi, np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    c = np.array([0.3, -1.2, 2.0], dtype=complex)
    term = RetainedTerm(1.0, (0, 0), 2, Pi @ c, (J - np.eye(3)) @ Pi)
    for t in (0.0, 1.0, 2.5):
        assert np.allclose(term.evaluate(t), sla.expm(-t * J) @ (Pi @ c), atol=1e-12)


def test_spectral_gap_values():
    g100 = spectral_gap(100.0)
    assert abs(g100 - 1) < 0.05
    g5 = spectral_gap(5.0)
    assert g5 > 0 and g100 > 0
    g1000 = spectral_gap(1000.0)
    assert abs(g1000 - 1) < abs(g100 - 1)


def test_spectral_gap_window_validation():
    with pytest.raises(ValueError):
        spectral_gap(10.0, search_window=SpectralWindow(0.5, 2.0, -1, 1))


def test_spectral_gap_requires_nonzero_eigenvalue():
    with pytest.raises(SpectrumError):
        spectral_gap(100.0, search_window=SpectralWindow(-0.5, 0.5, -1, 1))


def test_expansion_diagonal_example():
    u = StateVector.constant(8) + StateVector.basis((0, 0), 1, 8, amplitude=3.0)
    rep = equilibrium_decay(2.0, u, T_GRID, 0.5)
    assert rep.retained_values.tolist() == [0j]
    assert np.allclose(rep.remainder_norms, 3 * np.exp(-2 * T_GRID), rtol=1e-12)
    assert rep.fitted_rate == pytest.approx(2.0, rel=1e-10)


def test_expansion_of_constant_has_zero_remainder():
    rep = equilibrium_decay(10.0, StateVector.constant(6), T_GRID, 0.5)
    assert np.all(rep.remainder_norms == 0) and rep.fitted_rate == math.inf and rep.envelope_constant == 0


def test_expansion_beta_collision():
    u = StateVector.basis((0, 0), 1, 4)
    with pytest.raises(SpectrumError):
        equilibrium_decay(2.0, u, T_GRID, 2.0005)


def test_expansion_time_grid_validation():
    with pytest.raises(ValueError):
        equilibrium_decay(2.0, StateVector.constant(4), [0.5, 1.0], 0.5)


def test_expansion_rate_matches_gap(u_random):
    rep = equilibrium_decay(100.0, u_random, T_GRID, 0.5)
    gap = spectral_gap(100.0)
    assert rep.fitted_rate >= 0.5
    assert abs(rep.fitted_rate - gap) <= 0.1 * gap


def test_expansion_above_first_shell(u_random):
    rep = equilibrium_decay(100.0, u_random, T_GRID, 1.5)
    near_one = [z for z in rep.retained_values if abs(z - 1) < 0.01]
    assert len(near_one) == 4
    assert rep.fitted_rate >= 1.5


@pytest.mark.parametrize("beta", [0.5, 1.5])
def test_expansion_envelope_two_point(u_random, beta):
    rep = equilibrium_decay(100.0, u_random, [1.0, 5.0], beta)
    C = rep.remainder_norms[0] * math.exp(beta * 1.0)
    assert rep.remainder_norms[1] <= C * math.exp(-beta * 5.0)
