import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from green_imcf.geometry import ModelManifold
from green_imcf.imcf import (
    CertificationError, RadialFlow, c1_constant, check_excess_ode, core_barrier, diameter_ratio,
    euclidean_isoperimetric_constant, excess_ode_bound, find_C, gradient_bound_check, growth_gap,
    imcf_core_flow, imcf_core_model, imcf_residual, level_radius_of_core, lower_barrier,
    p_supersolution_margin, subsolution_margin, upper_barrier,
)

GOLDEN = json.loads((Path(__file__).parent / "data" / "c1_golden.json").read_text())
E2, E3 = ModelManifold.euclidean(2), ModelManifold.euclidean(3)
H2, H3 = ModelManifold.hyperbolic(2), ModelManifold.hyperbolic(3)
PT = ModelManifold.power_tail(2, 0.5)
GRID = np.geomspace(1e-3, 50, 60)


def test_core_model_examples():
    assert imcf_core_model(E2, 1.0) == 0.0
    assert imcf_core_model(E3, math.e) == pytest.approx(2.0, rel=1e-15)
    u = imcf_core_model(PT, np.array([100.0, 101.0]))
    assert u[0] == pytest.approx(math.log(PT.tail_constant * 10), rel=1e-14)
    assert np.diff(u)[0] / math.log(101 / 100) == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("M", [E2, E3, H2, H3, PT], ids=lambda M: M.label)
def test_core_solves_radial_imcf(M):
    assert np.max(np.abs(imcf_residual(M, GRID))) < 1e-6


@pytest.mark.parametrize("M", [E3, H3, PT], ids=lambda M: M.label)
def test_core_pole_normalized(M):
    flow = imcf_core_flow(M, np.geomspace(1e-6, 1e-2, 5))
    d = flow.pole_defect()
    assert np.all(np.diff(d) >= 0) or np.max(d) < 1e-12
    assert d[0] < 1e-6


def test_flow_must_increase():
    with pytest.raises(ValueError):
        RadialFlow(E2, np.array([1.0, 2.0]), np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_gradient_estimate_margins():
    assert gradient_bound_check(E3, GRID).min_margin >= 0
    assert gradient_bound_check(PT, GRID).min_margin >= 0
    assert gradient_bound_check(H2, GRID).min_margin < 0


def test_gradient_margin_independent_formula():
    r = np.array([0.5, 2.0])
    rep = gradient_bound_check(H3, r)
    # |grad u| = 2 coth r and the bound 2/sinh r, computed directly
    assert np.allclose(rep.lhs, 2 / np.tanh(r), rtol=1e-14)
    assert np.allclose(rep.rhs, 2 / np.sinh(r), rtol=1e-14)


@pytest.mark.parametrize("n", [2, 3])
def test_barrier_signs_near_pole(n):
    M = ModelManifold.euclidean(n)
    r = np.geomspace(1e-6, 5e-3, 50, endpoint=False)
    assert subsolution_margin(M, lower_barrier(n), r).min_margin > 0
    assert subsolution_margin(M, upper_barrier(n), r).max_margin < 0


def test_barrier_signs_hyperbolic():
    r = np.geomspace(1e-6, 5e-3, 50, endpoint=False)
    for kappa in (0.5, 1.0):
        M = ModelManifold.hyperbolic(3, kappa)
        assert subsolution_margin(M, lower_barrier(3), r).min_margin > 0
        assert subsolution_margin(M, upper_barrier(3), r).max_margin < 0


def test_core_barrier_is_exact():
    rep = subsolution_margin(H3, core_barrier(H3), GRID)
    assert np.max(np.abs(rep.margin)) < 1e-12


def _radial_p_operator(M, p, w, r, step=1e-5):
    """``v^{-1} (v |w'|^{p-2} w')' - |w'|^p`` by central differences."""
    def flux(x):
        dw = (w(x + step) - w(x - step)) / (2 * step)
        return M.omega * M.h(x) ** (M.n - 1) * abs(dw) ** (p - 2) * dw
    v = M.omega * M.h(r) ** (M.n - 1)
    dw = (w(r + step) - w(r - step)) / (2 * step)
    return (flux(r + step) - flux(r - step)) / (2 * step) / v - abs(dw) ** p


@pytest.mark.parametrize("M,p,C", [(E3, 1.5, 2.0), (H3, 1.2, 5.0), (E2, 1.05, 3.0)])
def test_supersolution_margin_matches_direct_operator(M, p, C):
    n = M.n
    w = lambda x: (n - p) * math.log(x) + 1 / (1 - C * x)
    r = np.array([0.02, 0.05, 0.1])
    rep = p_supersolution_margin(M, p, C, r)
    direct = np.array([_radial_p_operator(M, p, w, x) for x in r])
    assert np.allclose(rep.margin, direct, rtol=1e-4, atol=1e-4 * np.max(np.abs(direct)))


def test_find_C_certifies():
    cert = find_C(E3, 1.05)
    r = np.geomspace(1e-6, 0.5, 400, endpoint=False) / cert.C
    assert p_supersolution_margin(E3, 1.05, cert.C, r).max_margin <= 0
    cert = find_C(H3, 1.05)
    assert cert.report.max_margin <= 0
    assert cert.C >= 1


def test_curvature_violations_reported():
    S = ModelManifold.spherical(3)
    r = np.linspace(2.5, 3.1, 10)
    rep = p_supersolution_margin(S, 1.5, 0.1, r)
    assert rep.notes["curvature_violations"].size > 0


def test_growth_gap_euclidean_zero():
    g = growth_gap(E3, "isoperimetric", np.geomspace(0.1, 100, 40))
    assert abs(g.constant) < 1e-12


def test_growth_gap_power_tail_stable():
    a = growth_gap(PT, "reverse_doubling", np.geomspace(1, 100, 40), {"b": 1.5, "C_R": 0.5})
    b = growth_gap(PT, "reverse_doubling", np.geomspace(1, 1000, 60), {"b": 1.5, "C_R": 0.5})
    assert math.isfinite(a.constant)
    assert a.constant == pytest.approx(b.constant, rel=1e-6)
    assert a.constant == pytest.approx(-math.log(PT.tail_constant), rel=1e-9)


def test_growth_gap_hyperbolic_not_certified():
    with pytest.raises(CertificationError):
        growth_gap(H3, "reverse_doubling", np.geomspace(0.1, 10, 30))
    with pytest.raises(ValueError):
        growth_gap(E3, "other", GRID)


def test_c1_golden():
    assert c1_constant(2, 2 * math.sqrt(math.pi)) == pytest.approx(GOLDEN["c1_n2_cI_2sqrtpi"], rel=1e-14)
    assert c1_constant(3, euclidean_isoperimetric_constant(3)) == pytest.approx(GOLDEN["c1_n3_cI_ball"], rel=1e-14)


def test_c1_direct_evaluation():
    expect = 1 + (4 * math.pi) ** -1 * 2 * (4 * math.pi) * (1 + math.e) / (1 - math.exp(-1))
    assert c1_constant(2, 2 * math.sqrt(math.pi)) == pytest.approx(expect, rel=1e-14)
    assert c1_constant(3, math.inf) == 1.0
    assert euclidean_isoperimetric_constant(3) == pytest.approx(4 * math.pi / (4 * math.pi / 3) ** (2 / 3))


@given(st.floats(0.1, 1e6))
def test_c1_decreasing_in_cI(c):
    assert c1_constant(3, 2 * c) < c1_constant(3, c)


def test_diameter_ratio():
    for t in (-3.0, 0.0, 2.0, 10.0):
        assert diameter_ratio(E3, t) == pytest.approx(1.0, rel=1e-12)
    d = [diameter_ratio(PT, t) for t in (4.0, 6.0, 8.0)]
    assert d[0] < d[1] < d[2]
    # D(t) ~ const r_t^{1/2}
    r = [level_radius_of_core(PT, t) for t in (6.0, 8.0)]
    assert d[2] / d[1] == pytest.approx(math.sqrt(r[1] / r[0]), rel=1e-9)


def test_excess_ode_comparison():
    n, c_I = 3, euclidean_isoperimetric_constant(3)
    k = c_I / (1 + math.e ** (n - 1))
    s = np.linspace(0, 2, 21)
    # exact solution of V' = -k V^{(n-1)/n}: V^{1/n} = V0^{1/n} - k s / n
    V = (3.0 - k * s / n) ** n
    assert abs(check_excess_ode(n, c_I, s, V)) < 1e-12
    # faster decay satisfies the differential inequality, slower decay violates it
    assert check_excess_ode(n, c_I, s, V * np.exp(-s)) > 0
    assert check_excess_ode(n, c_I, s, (3.0 - 0.5 * k * s / n) ** n) < 0
    assert excess_ode_bound(n, c_I, V[-1], s[0], s[-1]) == pytest.approx(V[0], rel=1e-12)
