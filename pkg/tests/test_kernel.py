import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from green_imcf.geometry import ModelManifold, sphere_area
from green_imcf.kernel import (
    ParabolicError, check_pole_asymptotics, core_limit, decay_exponent, extrapolate_to_one, green_radial,
    is_parabolic, level_energy, moser_core, mu, richardson_core,
)

E2 = ModelManifold.euclidean(2)
E3 = ModelManifold.euclidean(3)
H2 = ModelManifold.hyperbolic(2)
H3 = ModelManifold.hyperbolic(3)
PT = ModelManifold.power_tail(2, 0.5)


def test_mu_examples():
    assert mu(3, 2, 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert mu(2, 2, 0.5) == pytest.approx(math.log(2) / (2 * math.pi), rel=1e-15)


@given(st.integers(2, 5), st.floats(1.05, 4.0), st.floats(1e-3, 10.0))
def test_mu_homogeneity(n, p, r):
    if p >= n:
        return
    assert mu(n, p, 2 * r) == pytest.approx(2 ** (-(n - p) / (p - 1)) * mu(n, p, r), rel=1e-12)


def test_parabolicity():
    assert green_radial(E2, 2).parabolic
    assert is_parabolic(E2, 2)
    assert not is_parabolic(E3, 2)
    assert is_parabolic(PT, 1.5)
    assert not is_parabolic(PT, 1.25)
    assert not is_parabolic(H2, 1.9)


@pytest.mark.parametrize("n,p", [(3, 2.0), (3, 1.5), (4, 3.0), (2, 1.5)])
def test_euclidean_kernel_is_mu(n, p):
    k = green_radial(ModelManifold.euclidean(n), p)
    r = k.r[k.r < 100]
    assert np.allclose(k.value(r), mu(n, p, r), rtol=1e-10)


@pytest.mark.parametrize("M,p,R0", [(H2, 1.5, math.inf), (H3, 2.0, math.inf), (PT, 1.25, math.inf), (E2, 2.0, 3.0)])
def test_kernel_derivative_matches_sphere_area(M, p, R0):
    k = green_radial(M, p, R0)
    r = np.array([0.05, 0.4, 1.1, 2.0])
    expect = -sphere_area(M, r) ** (-1 / (p - 1))
    assert np.allclose(k.derivative(r), expect, rtol=1e-12)
    step = 1e-5
    fd = (k.value(r + step) - k.value(r - step)) / (2 * step)
    assert np.allclose(fd, expect, rtol=1e-4)


def test_kernel_decreasing_and_vanishes_at_boundary():
    k = green_radial(H2, 1.5, R0=2.0)
    assert np.all(np.diff(k.G) < 0)
    assert k.G[-1] == 0.0
    assert k.value(2.0) == 0.0


def test_comparison_monotone_in_domain():
    r = np.array([0.1, 0.5, 0.9])
    small = green_radial(E2, 2, R0=1.0).value(r)
    big = green_radial(E2, 2, R0=1.5).value(r)
    assert np.all(big > small)


def test_level_radius_inverts_value():
    k = green_radial(H3, 2.0)
    for level in (0.01, 0.5, 3.0):
        assert k.value(k.level_radius(level)) == pytest.approx(level, rel=1e-10)


def test_moser_core_zero_at_unit_level():
    k = green_radial(H2, 1.5)
    r1 = k.level_radius(1.0)
    assert abs(moser_core(H2, 1.5, r1)) < 1e-10


def test_moser_core_parabolic_raises():
    with pytest.raises(ParabolicError):
        moser_core(PT, 1.5, 1.0)
    assert math.isfinite(moser_core(PT, 1.25, 1.0))


def test_core_limit_examples():
    assert core_limit(E2, 1.0) == pytest.approx(math.log(2 * math.pi), rel=1e-15)
    assert core_limit(E3, 1.0) == pytest.approx(math.log(4 * math.pi), rel=1e-15)


def test_richardson_reaches_core_limit():
    for M, r in ((E3, 1.0), (H3, 0.7), (PT, 3.0)):
        assert abs(richardson_core(M, r) - core_limit(M, r)) < 1e-2


def test_extrapolate_to_one_exact_on_basis():
    ps = np.array([1.2, 1.1, 1.05, 1.02])
    x = ps - 1
    vals = 2.0 + 0.5 * x * np.log(x) - 3.0 * x
    assert extrapolate_to_one(ps, vals) == pytest.approx(2.0, abs=1e-10)


def test_level_energy_examples():
    k = green_radial(E3, 2)
    assert level_energy(k, 0.01, 0.02) == pytest.approx(0.01, rel=1e-8)
    assert level_energy(k, 0.3, 0.3) == 0.0
    k = green_radial(H2, 1.5)
    assert level_energy(k, 0.1, 0.3) == pytest.approx(0.2, rel=1e-8)


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_level_energy_is_level_gap(a, b):
    s, t = sorted((a, b))
    k = green_radial(H3, 1.7)
    assert level_energy(k, s, t) == pytest.approx(t - s, rel=1e-6, abs=1e-12)


def test_pole_asymptotics_euclidean_exact():
    k = green_radial(E3, 2)
    res = check_pole_asymptotics(k, np.geomspace(1e-4, 1e-2, 20))
    assert max(res.maxima()) < 1e-10


def test_pole_asymptotics_shrink_on_hyperbolic():
    k = green_radial(H3, 2)
    coarse = check_pole_asymptotics(k, np.geomspace(1e-3, 1e-1, 25, endpoint=False)).maxima()
    fine = check_pole_asymptotics(k, np.geomspace(1e-4, 1e-2, 25, endpoint=False)).maxima()
    for c, f in zip(coarse, fine):
        assert f * 3 <= c


def test_pole_asymptotics_spherical_cap():
    S2 = ModelManifold.spherical(2)
    k = green_radial(S2, 2, R0=1.0)
    a = check_pole_asymptotics(k, np.geomspace(1e-3, 1e-2, 10, endpoint=False)).maxima()[0]
    b = check_pole_asymptotics(k, np.geomspace(1e-4, 1e-3, 10, endpoint=False)).maxima()[0]
    assert b < a


@pytest.mark.parametrize("M,p,slope", [(PT, 1.25, -1.0), (PT, 1.1, -4.0), (E3, 2.0, -1.0)])
def test_decay_exponent(M, p, slope):
    assert decay_exponent(M, p, (10.0, 1000.0)) == pytest.approx(slope, rel=3e-2)
