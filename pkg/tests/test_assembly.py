import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from kbmlab.assembly import (
    absorbing_level,
    assemble_delta_v,
    assemble_P,
    assemble_Q,
    assemble_scaled_restricted,
    assemble_X,
    projector_indices,
)
from kbmlab.model import HMode, TorusSpec

modes = st.tuples(st.integers(-8, 8), st.integers(-8, 8)).map(HMode.from_index)


def x_entry_by_quadrature(kappa, m_out, m_in):
    """(1/2pi) int exp(-i m' th) (i k1 cos th + i k2 sin th) exp(i m th) dth."""

    def f(th, part):
        z = np.exp(-1j * m_out * th) * 1j * (kappa[0] * np.cos(th) + kappa[1] * np.sin(th)) * np.exp(1j * m_in * th)
        return z.real if part == 0 else z.imag

    re = integrate.quad(f, 0, 2 * math.pi, args=(0,), epsabs=1e-11, limit=200)[0]
    im = integrate.quad(f, 0, 2 * math.pi, args=(1,), epsabs=1e-11, limit=200)[0]
    return complex(re, im) / (2 * math.pi)


@pytest.mark.parametrize("k", [(1, 0), (0, 1), (2, -1), (-3, 2)])
def test_X_matches_quadrature(k):
    M = 3
    md = HMode.from_index(k)
    X = assemble_X(md, M).entries
    for a in range(-M, M + 1):
        for b in range(-M, M + 1):
            assert X[a + M, b + M] == pytest.approx(x_entry_by_quadrature(md.kappa, a, b), abs=1e-10)


def test_X_examples():
    X = assemble_X(HMode.from_index((1, 0)), 1).entries
    assert X[2, 1] == 0.5j and X[1, 2] == 0.5j  # X[m=1, m=0], X[m=0, m=1]
    X = assemble_X(HMode.from_index((0, 1)), 1).entries
    assert X[2, 1] == 0.5 and X[1, 2] == -0.5
    assert not np.any(assemble_X(HMode.from_index((0, 0)), 4).entries)


@given(modes, st.integers(1, 12))
def test_X_anti_hermitian_and_tridiagonal(md, M):
    X = assemble_X(md, M).entries
    assert np.max(np.abs(X.conj().T + X)) == 0.0
    off = np.abs(np.subtract.outer(np.arange(2 * M + 1), np.arange(2 * M + 1))) != 1
    assert not np.any(X[off])


@given(modes, st.integers(1, 12))
def test_X_squared_projects_to_minus_half_laplacian(md, M):
    X = assemble_X(md, M).entries
    assert (X @ X)[M, M] == pytest.approx(-md.norm2 / 2, abs=1e-12 * max(1, md.norm2))


def test_delta_v_diagonal():
    D = assemble_delta_v(HMode.from_index((1, 1)), 2).entries
    assert np.array_equal(D, np.diag([4, 1, 0, 1, 4]).astype(complex))


def test_P_examples():
    P = assemble_P(2.0, HMode.from_index((0, 0)), 1).entries
    assert np.array_equal(P, np.diag([2, 0, 2]).astype(complex))
    P = assemble_P(1.0, HMode.from_index((1, 0)), 1).entries
    assert np.diag(P).tolist() == [0.5, 0, 0.5]
    assert P[0, 1] == P[1, 0] == P[1, 2] == P[2, 1] == -0.5j


@given(st.floats(0.1, 1e3), modes, st.integers(1, 10))
def test_P_relations(gamma, md, M):
    P = assemble_P(gamma, md, M).entries
    m = np.arange(-M, M + 1)
    assert np.array_equal(np.diag(P).real, gamma**2 * m**2 / 2)
    h = 1 / gamma
    tilde = 0.5 * assemble_delta_v(md, M).entries - h * assemble_X(md, M).entries
    assert np.allclose(P, gamma**2 * tilde, rtol=1e-13, atol=1e-12 * gamma**2)


@given(st.floats(0.5, 50), modes, st.integers(1, 8))
def test_P_mode_reflection_symmetry(gamma, md, M):
    # kappa -> -kappa is the fibre rotation theta -> theta + pi, i.e. diag((-1)^m)
    P = assemble_P(gamma, md, M).entries
    Pm = assemble_P(gamma, -md, M).entries
    D = np.diag((-1.0) ** np.arange(-M, M + 1))
    assert np.array_equal(D @ P @ D, Pm)


def test_P_rejects_bad_input():
    with pytest.raises(ValueError):
        assemble_P(0.0, HMode.from_index((0, 0)), 2)
    with pytest.raises(ValueError):
        assemble_P(1.0, HMode.from_index((0, 0)), 0)


@pytest.mark.parametrize("A,k,expected", [(1.5, (1, 0), 2.25), (1.5, (2, 0), 0.0), (2.0, (2, 0), 4.0)])
def test_Q_examples(A, k, expected):
    Q = assemble_Q(A, HMode.from_index(k), 2).entries
    assert Q[2, 2] == expected
    Q[2, 2] = 0
    assert not np.any(Q)


def test_Q_and_level_validation():
    with pytest.raises(ValueError):
        assemble_Q(0.0, HMode.from_index((0, 0)), 1)
    with pytest.raises(ValueError):
        absorbing_level(-1.0, HMode.from_index((0, 0)))
    assert absorbing_level(0.0, HMode.from_index((0, 0))) == 0.0


def test_scaled_restricted_examples():
    S = assemble_scaled_restricted(0.3, 0.0, HMode.from_index((0, 0)), 1)
    assert np.array_equal(S.entries, np.diag([0.5, 0.5]).astype(complex))
    assert S.m.tolist() == [-1, 1]
    S = assemble_scaled_restricted(0.01, 1.0, HMode.from_index((1, 0)), 1).entries
    assert np.allclose(S, np.diag([0.5 - 1e-4] * 2))


@given(st.floats(1e-3, 1.0), st.complex_numbers(max_magnitude=20), modes, st.integers(1, 8))
def test_scaled_restricted_is_filtered_full_block(h, lam, md, M):
    S = assemble_scaled_restricted(h, lam, md, M).entries
    assert S.shape == (2 * M, 2 * M)
    full = 0.5 * assemble_delta_v(md, M).entries - h * assemble_X(md, M).entries - h * h * lam * np.eye(2 * M + 1)
    keep = np.arange(-M, M + 1) != 0
    assert np.allclose(S, full[np.ix_(keep, keep)], atol=1e-14)


def test_projector_indices():
    pi0, perp = projector_indices(1)
    assert pi0.tolist() == [0] and perp.tolist() == [-1, 1]
    pi0, perp = projector_indices(3)
    assert (pi0.size, perp.size) == (1, 6)
    assert sorted(np.concatenate([pi0, perp]).tolist()) == list(range(-3, 4))
    with pytest.raises(ValueError):
        projector_indices(0)


def test_mode_matrix_array_protocol():
    mm = assemble_P(1.0, HMode.from_index((1, 0)), 2, TorusSpec())
    assert np.asarray(mm).shape == (5, 5) and mm.gamma == 1.0 and mm.kind == "P"
