import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmrecon.combinatorics import enumerate_multi_indices
from helmrecon.wavevectors import (
    WaveVectorError,
    bilinear_dot,
    build_wavevector_set,
    build_zeta_pm,
    real_band_radius,
)


def test_band_edge_odd():
    k = 3.0
    p, m = build_zeta_pm(1, (2 * k, 0.0), k)
    assert np.allclose(p, [k, 0]) and np.allclose(m, [k, 0])


def test_even_level_at_k():
    k = 4.0
    p, m = build_zeta_pm(2, (k, 0.0), k)
    assert np.allclose(p, [0, k]) and np.allclose(m, [0, -k])


def test_level_three_arithmetic():
    p, m = build_zeta_pm(3, (4.0, 0.0), 2.0)
    assert np.allclose(p, [1, np.sqrt(3)]) and np.allclose(m, [1, -np.sqrt(3)])


def test_set_level_one_band_edge():
    k = 1.5
    wv = build_wavevector_set(1, (2 * k, 0.0), k)
    assert np.allclose(wv.zeta0, [k, 0]) and np.allclose(wv.zetas[0], [k, 0])
    assert np.allclose(wv.zeta0 + wv.zetas[0], [2 * k, 0])


def test_set_level_three_assignment():
    wv = build_wavevector_set(3, (4.0, 0.0), 2.0)
    r3 = np.sqrt(3)
    assert np.allclose(wv.zeta0, [1, -r3])
    assert [np.allclose(z, e) for z, e in zip(wv.zetas, ([1, r3], [1, -r3], [1, r3]))] == [True] * 3
    assert np.allclose(wv.zeta0 + sum(wv.zetas), [4, 0])


def test_even_assignment_pairs():
    k = 5.0
    wv = build_wavevector_set(4, (7.0, 3.0), k)
    p, m = build_zeta_pm(4, (7.0, 3.0), k)
    e1 = np.array([7.0, 3.0]) / np.hypot(7, 3)
    assert np.allclose(wv.zeta0, k * e1)
    for j, z in enumerate(wv.zetas):
        assert np.array_equal(z, p if j % 2 == 0 else m)


def test_zero_frequency_rejected():
    with pytest.raises(WaveVectorError):
        build_zeta_pm(1, (0.0, 0.0), 1.0)
    with pytest.raises(WaveVectorError):
        build_wavevector_set(2, (0.0, 0.0), 1.0)


def test_negative_radicand_branch():
    # odd ell beyond the band: e2 component is +i sqrt(|r|)
    k = 1.0
    p, m = build_zeta_pm(1, (3.0, 0.0), k)
    assert p[1] == pytest.approx(1j * np.sqrt(1.5**2 - 1))
    assert m[1] == pytest.approx(-1j * np.sqrt(1.5**2 - 1))


def _in_band_xi(ell, k, rfrac, ang):
    r = real_band_radius(ell, k) * rfrac
    return r * np.array([np.cos(ang), np.sin(ang)])


triples = st.tuples(
    st.integers(1, 5),
    st.sampled_from([1.5, 5.0, 20.0]),
    st.floats(1e-6, 1.0),
    st.floats(0, 2 * np.pi),
)


@settings(max_examples=200, deadline=None)
@given(triples)
def test_constraints_hold_in_band(t):
    ell, k, rfrac, ang = t
    wv = build_wavevector_set(ell, _in_band_xi(ell, k, rfrac, ang), k)
    for z in (wv.zeta0,) + wv.zetas:
        assert abs(bilinear_dot(z, z) - k**2) <= 1e-12 * k**2
    assert np.linalg.norm(wv.zeta0 + sum(wv.zetas) - wv.xi) <= 1e-12 * k
    assert wv.is_real


@settings(max_examples=100, deadline=None)
@given(triples, st.integers(1, 3))
def test_shifted_frequencies_stay_in_band(t, a):
    ell, k, rfrac, ang = t
    xi = _in_band_xi(ell, k, rfrac, ang)
    wv = build_wavevector_set(ell, xi, k)
    for alpha in enumerate_multi_indices(ell, a):
        eta = wv.shift(alpha)
        assert np.all(eta.imag == 0)
        assert np.linalg.norm(eta.real) <= np.linalg.norm(xi) + a * k + 1e-9 * k
        assert np.linalg.norm(eta.real) <= (ell + a + 1) * k + 1e-9 * k


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([1, 3, 5]), st.sampled_from([1.5, 5.0, 20.0]), st.floats(1.001, 3.0), st.floats(0, 2 * np.pi))
def test_odd_levels_complex_beyond_band(ell, k, rfrac, ang):
    wv = build_wavevector_set(ell, _in_band_xi(ell, k, rfrac, ang), k)
    assert not wv.is_real
    dots, total = wv.constraint_residuals()
    assert dots <= 1e-12 * k**2 * rfrac**2 and total <= 1e-12 * k * rfrac


@pytest.mark.parametrize("ell", [2, 4])
def test_even_realness_threshold(ell):
    k = 5.0
    # real iff |(|xi| - k)/ell| <= k, i.e. |xi| <= (ell + 1) k
    assert build_wavevector_set(ell, ((ell + 1) * k * 0.999, 0.0), k).is_real
    assert not build_wavevector_set(ell, ((ell + 1) * k * 1.001, 0.0), k).is_real


def test_shift_length_checked():
    wv = build_wavevector_set(2, (3.0, 1.0), 2.0)
    with pytest.raises(WaveVectorError):
        wv.shift((1,))
