import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbmlab.model import (
    HMode,
    SpectralWindow,
    TorusSpec,
    VIndexRange,
    base_spectrum,
    expand_multiplicities,
    iter_modes,
    shells,
    sobolev_weight,
)

TAU = 2 * math.pi


def brute_spectrum(lengths, re_min, re_max):
    """Lattice norms by a plain double loop over a generous index box."""
    counts = {}
    b = [int(math.ceil(math.sqrt(max(re_max, 0)) * L / TAU)) + 1 for L in lengths]
    for k1 in range(-b[0], b[0] + 1):
        for k2 in range(-b[1], b[1] + 1):
            q = (TAU * k1 / lengths[0]) ** 2 + (TAU * k2 / lengths[1]) ** 2
            if re_min <= q <= re_max:
                key = round(q, 9)
                counts[key] = counts.get(key, 0) + 1
    return sorted(counts.items())


def test_torus_defaults():
    spec = TorusSpec()
    assert spec.lengths == (TAU, TAU)
    assert spec.c_n == 0.5
    assert spec.kappa((1, -2)) == pytest.approx((1.0, -2.0))


@pytest.mark.parametrize("n", [1, 3])
def test_torus_rejects_other_dimensions(n):
    with pytest.raises(NotImplementedError):
        TorusSpec(n=n)


@pytest.mark.parametrize("lengths", [(0.0, 1.0), (-1.0, 1.0), (1.0, math.inf), (1.0,)])
def test_torus_rejects_bad_lengths(lengths):
    with pytest.raises(ValueError):
        TorusSpec(lengths)


def test_hmode_norm_and_negation():
    md = HMode.from_index((1, 2), TorusSpec((TAU, math.pi)))
    assert md.kappa == pytest.approx((1.0, 4.0))
    assert md.norm2 == pytest.approx(17.0)
    assert (-md).k == (-1, -2) and (-md).norm2 == md.norm2


def test_vertical_range():
    v = VIndexRange(2)
    assert v.m.tolist() == [-2, -1, 0, 1, 2]
    assert v.eigenvalues().tolist() == [4, 1, 0, 1, 4]
    assert v.size == 5 and v.position(-2) == 0
    with pytest.raises(ValueError):
        VIndexRange(0)


def test_window_geometry():
    w = SpectralWindow(0.0, 2.0, -1.0, 1.0)
    assert w.contains(1 + 0.5j) and not w.contains(3.0)
    assert w.contains(np.array([0j, 2 + 1j, -0.1])).tolist() == [True, True, False]
    assert w.boundary_distance(1.0) == pytest.approx(1.0)
    assert w.boundary_distance(-1.0) == pytest.approx(-1.0)
    assert w.corners() == [-1j, 2 - 1j, 2 + 1j, 1j]
    with pytest.raises(ValueError):
        SpectralWindow(1.0, 1.0, 0.0, 1.0)


def test_base_spectrum_square_torus():
    w = SpectralWindow(-0.5, 4.5, -1, 1)
    assert base_spectrum(TorusSpec(), w) == [(0.0, 1), (1.0, 4), (2.0, 4), (4.0, 4)]
    assert expand_multiplicities(base_spectrum(TorusSpec(), w)).size == 13


def test_base_spectrum_gap_window_is_empty():
    assert base_spectrum(TorusSpec(), SpectralWindow(0.1, 0.9, -1, 1)) == []


def test_base_spectrum_off_axis_window_is_empty():
    assert base_spectrum(TorusSpec(), SpectralWindow(-0.5, 4.5, 0.5, 1)) == []


def test_base_spectrum_rectangular_torus_matches_brute_force():
    spec = TorusSpec((TAU, math.pi))
    got = base_spectrum(spec, SpectralWindow(-0.5, 4.5, -1, 1))
    # eigenvalues k1^2 + 4 k2^2; the value 4 comes from (+-2, 0) and (0, +-1)
    assert got == [(0.0, 1), (1.0, 2), (4.0, 4)]
    assert [(pytest.approx(v), m) for v, m in brute_spectrum(spec.lengths, -0.5, 4.5)] == got


@given(
    st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(-1.0, 10.0), st.floats(0.1, 20.0),
)
def test_base_spectrum_multiplicities_match_brute_force(L1, L2, lo, width):
    spec = TorusSpec((L1, L2))
    got = base_spectrum(spec, SpectralWindow(lo, lo + width, -1, 1))
    ref = brute_spectrum(spec.lengths, lo, lo + width)
    assert sum(m for _, m in got) == sum(m for _, m in ref)
    assert np.allclose([v for v, _ in got], [v for v, _ in ref], rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("s,k,m,expected", [(0, (3, 1), 5, 1.0), (2, (0, 0), 0, 1.0), (2, (1, 0), 1, 3.0)])
def test_sobolev_weight_examples(s, k, m, expected):
    assert sobolev_weight(s, HMode.from_index(k), m) == pytest.approx(expected)


@given(st.floats(-4, 4), st.integers(-6, 6), st.integers(-6, 6), st.integers(-20, 20))
def test_sobolev_weight_inverse_pair(s, k1, k2, m):
    md = HMode.from_index((k1, k2))
    assert sobolev_weight(s, md, m) * sobolev_weight(-s, md, m) == pytest.approx(1.0, rel=1e-13)


@given(st.floats(0.1, 3), st.integers(0, 5), st.integers(0, 10))
def test_sobolev_weight_monotone(s, k, m):
    a = sobolev_weight(s, HMode.from_index((k, 0)), m)
    assert sobolev_weight(s, HMode.from_index((k + 1, 0)), m) > a
    assert sobolev_weight(s, HMode.from_index((k, 0)), m + 1) > a


def test_sobolev_weight_vectorised():
    w = sobolev_weight(2, HMode.from_index((1, 0)), np.array([-1, 0, 1]))
    assert w.tolist() == pytest.approx([3.0, 2.0, 3.0])


@given(st.floats(0.0, 60.0), st.floats(0.5, 2.0))
def test_shells_partition_the_ball(k2_max, L2):
    spec = TorusSpec((2 * math.pi, L2 * math.pi))
    modes = sorted(md.k for md in iter_modes(spec, k2_max))
    sh = shells(spec, k2_max)
    flat = sorted(k for s in sh for k in s.indices)
    assert flat == modes
    assert all(a.norm2 < b.norm2 for a, b in zip(sh, sh[1:]))
    for s in sh:
        assert s.representative.k == min(s.indices)
        assert all(abs(m.norm2 - s.norm2) < 1e-9 for m in s.modes(spec))


def test_shells_lower_bound_is_exclusive():
    sh = shells(TorusSpec(), 4.0, k2_min=1.0)
    assert [(s.norm2, s.multiplicity) for s in sh] == [(2.0, 4), (4.0, 4)]


def test_iter_modes_order_and_bounds():
    ks = [md.k for md in iter_modes(TorusSpec(), 1.0)]
    assert ks == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]
    assert [md.k for md in iter_modes(TorusSpec(), 1.0, k2_min=0.0)] == [(-1, 0), (0, -1), (0, 1), (1, 0)]
