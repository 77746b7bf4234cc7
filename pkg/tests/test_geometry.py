import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from green_imcf.geometry import (
    DomainError, ModelManifold, ball_volume, diagnostics, mean_curvature_sphere, ricci_nonnegative,
    sphere_area, sphere_constant,
)

E2 = ModelManifold.euclidean(2)
E3 = ModelManifold.euclidean(3)
H2 = ModelManifold.hyperbolic(2)
S2 = ModelManifold.spherical(2)
PT = ModelManifold.power_tail(2, 0.5)

MODELS = [E2, E3, H2, ModelManifold.hyperbolic(3, kappa=2.0), S2, PT, ModelManifold.power_tail(3, 0.3)]


def test_sphere_constants():
    assert sphere_constant(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_constant(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_constant(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)


def test_sphere_area_examples():
    assert sphere_area(E3, 1.0) == pytest.approx(4 * math.pi, rel=1e-14)
    assert sphere_area(E2, 2.0) == pytest.approx(4 * math.pi, rel=1e-14)
    assert sphere_area(H2, 1.0) == pytest.approx(2 * math.pi * math.sinh(1.0), rel=1e-14)


def test_ball_volume_examples():
    assert ball_volume(E3, 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-12)
    assert ball_volume(E2, 1.0) == pytest.approx(math.pi, rel=1e-12)
    assert ball_volume(H2, 1.0) == pytest.approx(2 * math.pi * (math.cosh(1.0) - 1), rel=1e-10)


def test_power_tail_volume_growth():
    r = np.array([100.0, 110.0])
    slope = np.diff(np.log(ball_volume(PT, r)))[0] / np.diff(np.log(r))[0]
    assert slope == pytest.approx(1.5, rel=2e-2)


def test_mean_curvature_examples():
    assert mean_curvature_sphere(E3, 0.5) == pytest.approx(4.0)
    assert mean_curvature_sphere(H2, 1.0) == pytest.approx(1 / math.tanh(1.0), rel=1e-14)
    assert abs(mean_curvature_sphere(S2, math.pi / 2)) < 1e-14


@pytest.mark.parametrize("M", MODELS, ids=lambda M: M.label)
def test_pole_normalization(M):
    r = 1e-6 * (M.r_max if math.isfinite(M.r_max) else 1.0)
    assert abs(M.h(r) / r - 1) < 1e-6
    assert abs(M.dh(0.0) - 1) < 1e-12


@pytest.mark.parametrize("M", MODELS, ids=lambda M: M.label)
def test_derivatives_match_finite_differences(M):
    r = np.array([0.2, 0.7, 1.3, 2.5])
    r = r[r < 0.9 * M.r_max]
    step = 1e-6
    fd = (M.h(r + step) - M.h(r - step)) / (2 * step)
    assert np.allclose(M.dh(r), fd, rtol=1e-7, atol=1e-9)
    fd2 = (M.dh(r + step) - M.dh(r - step)) / (2 * step)
    assert np.allclose(M.d2h(r), fd2, rtol=1e-5, atol=1e-6)


def test_power_tail_tail_is_exact_power():
    r = np.array([1.0, 10.0, 1000.0])
    assert np.allclose(PT.h(r), PT.tail_constant * r ** 0.5, rtol=1e-14)
    assert PT.growth_exponent == pytest.approx(1.5)
    assert PT.is_nondecreasing(0.0, 50.0)
    assert np.all(PT.dh(np.linspace(0, 3, 301)) <= 1 + 1e-14)


def test_diagnostics_euclidean_plane():
    d = diagnostics(E2, np.geomspace(0.1, 10, 20))
    assert d.C_D == pytest.approx(4.0)
    assert d.b == pytest.approx(2.0)
    assert d.c_I == pytest.approx(2 * math.sqrt(math.pi))


def test_diagnostics_power_tail_exponent():
    d = diagnostics(PT, np.geomspace(10, 1000, 20))
    assert d.b == pytest.approx(1.5, rel=2e-2)


def test_hyperbolic_doubling_diverges_with_grid():
    c = [diagnostics(H2, np.geomspace(1, R, 20)).C_D for R in (5, 10, 20)]
    assert c[0] < c[1] < c[2]
    assert c[2] > 1e3


def test_diagnostics_rejects_short_grid():
    with pytest.raises(ValueError):
        diagnostics(E2, np.linspace(1, 2, 5))


def test_ricci_sign():
    grid = np.linspace(0.01, 3, 50)
    assert ricci_nonnegative(E3, grid)
    assert ricci_nonnegative(S2, grid)
    assert not ricci_nonnegative(H2, grid)


def test_invalid_models():
    with pytest.raises(ValueError):
        ModelManifold.euclidean(1)
    with pytest.raises(ValueError):
        ModelManifold.spherical(2, r_max=4.0)
    with pytest.raises(ValueError):
        ModelManifold.power_tail(2, 1.5)
    with pytest.raises(DomainError):
        E2.check_radius(-1.0)


def test_table_model_roundtrip():
    r = np.linspace(0, 3, 301)
    M = ModelManifold.from_table(2, np.column_stack([r, np.sinh(r)]))
    assert M.h(1.0) == pytest.approx(math.sinh(1.0), rel=1e-4)
    assert ModelManifold.from_dict(M.to_dict()).h(1.0) == M.h(1.0)


@pytest.mark.parametrize("M", MODELS, ids=lambda M: M.label)
def test_dict_roundtrip(M):
    assert ModelManifold.from_dict(M.to_dict()) == M


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_ball_volume_monotone_and_additive(a, b):
    lo, hi = sorted((a, b))
    v_lo, v_hi = ball_volume(H2, lo), ball_volume(H2, hi)
    assert v_hi >= v_lo
    # |B_hi| - |B_lo| is the integral of the sphere area; crude upper/lower bounds
    assert v_hi - v_lo <= sphere_area(H2, hi) * (hi - lo) * (1 + 1e-9) + 1e-12
    assert v_hi - v_lo >= sphere_area(H2, lo) * (hi - lo) * (1 - 1e-9) - 1e-12


@given(st.integers(2, 6), st.floats(0.01, 100.0))
def test_euclidean_mean_curvature(n, r):
    assert mean_curvature_sphere(ModelManifold.euclidean(n), r) == pytest.approx((n - 1) / r, rel=1e-13)


@given(st.floats(1e-12, 50.0))
def test_hyperbolic_log_h_accurate(r):
    # log sinh(r) computed independently: small r via series, large via log(sinh)
    expect = math.log(r) + math.log1p(r * r / 6 + r**4 / 120) if r < 1e-3 else math.log(math.sinh(r))
    assert H2.log_h(r) == pytest.approx(expect, rel=1e-14, abs=1e-14)
