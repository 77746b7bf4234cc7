import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from green_imcf.constants import (
    IterationSchedule, c_harnack, c_unstable, cbar, chat, classify_blowup, constants_report,
    default_truncation, finite_optimal_schedule, geometric_closed_form, harnack_chain, harnack_H, iterate,
    log_harnack_chain, log_harnack_H,
    log_c_harnack, log_c_unstable, log_cbar, log_chat, log_optimal_product, log_schedule_product,
    nogo_certificate, nogo_p0, nogo_target, optimal_schedule, random_schedule_search, sobolev_local,
)


def test_exact_small_cases():
    assert cbar(2, 3) == 72
    assert cbar(2, 4) == 144
    assert c_harnack(2, 4) == 2304
    assert chat(2, 4, 1) == 256
    assert chat(2, 3, 0) == 0


def test_limits_at_one():
    assert cbar(1 + 1e-12, 3) == pytest.approx(16, rel=1e-10)
    assert c_harnack(1 + 1e-12, 2) == pytest.approx(48, rel=1e-10)


def test_c_unstable_value():
    assert c_unstable(2, 3, 1) == pytest.approx(math.sqrt(72) * 2 * math.e, rel=1e-14)


def test_c_unstable_degenerate_exponent():
    p = 2.0
    assert c_unstable(p, p + 1e-12, 3.0) == pytest.approx(3.0 ** (1 + 1e-12 / p), rel=1e-9)


@given(st.floats(1.01, 2.9), st.floats(3.0, 8.0), st.floats(0.01, 10.0))
def test_log_versions_agree(p, nu, S):
    assert log_cbar(p, nu) == pytest.approx(math.log(cbar(p, nu)), rel=1e-12)
    assert log_c_harnack(p, nu) == pytest.approx(math.log(c_harnack(p, nu)), rel=1e-12)
    assert log_chat(p, nu, S) == pytest.approx(math.log(chat(p, nu, S)), rel=1e-12, abs=1e-12)
    assert log_c_unstable(p, nu, S) == pytest.approx(math.log(c_unstable(p, nu, S)), rel=1e-12, abs=1e-12)


def test_chat_bounded_near_one():
    vals = [chat(1 + d, 3, 2.0) for d in (1e-2, 1e-4, 1e-6)]
    assert all(math.isfinite(v) for v in vals)
    assert vals[-1] == pytest.approx(2.0**3 * 2.0 ** (5 * 2), rel=1e-4)


def test_c_unstable_scaled_bounded():
    scaled = [c_unstable(1 + d, 3, 1.0) * d ** (3 - 1 - d) for d in (1e-2, 1e-4, 1e-6)]
    assert max(scaled) / min(scaled) < 1.1


def test_harnack_formulas():
    assert harnack_chain(1.0, 3, 1.5, 2.0, 1.0, C=1.0) == pytest.approx(math.exp(2.0))
    with pytest.raises(ValueError):
        harnack_chain(0.5, 3, 1.5, 2.0, 1.0)
    assert harnack_H(2, 3, 1, 1, 1, 8, 27) == math.inf
    assert log_harnack_H(2, 3, 1, 1, 1, 8, 27) > 709
    # tau = 1 endpoint: Q = (S C)^{-nu/p} R^nu / |B_2R|; with S C = 1, R = 1, |B_2R| = 1 gives Q = 1
    S = 1 / c_harnack(2, 3)
    assert log_harnack_H(2, 3, S, 0.5, 1.0, 1.0, 4.0) == pytest.approx(0.5 * 2 * 2.0)
    # exponent nu (1 + 2 nu/(nu - p0)) = 3 * 5
    assert log_harnack_chain(2.0, 3, 1.5, 1.0, 1.0) == pytest.approx(2.0 ** 15)


def test_sobolev_local_limits():
    a = sobolev_local(3, 1 + 1e-9, 1.0, 1.0, 4 * math.pi / 3)
    assert a.S_pn == pytest.approx((a.S_1n * 2 / 2) ** 1, rel=1e-7)
    assert a.P_pp == pytest.approx(a.P_11, rel=1e-7)
    P, S1, Sp = sobolev_local(3, 2.0, 0.0, 1.0, 4 * math.pi / 3)
    assert P == pytest.approx(math.exp(0.5))
    assert Sp == pytest.approx((S1 * 2 * 2 / 1) ** 2)


def test_schedule_validation():
    with pytest.raises(ValueError):
        IterationSchedule(1.0, [0.6, 0.6])
    with pytest.raises(ValueError):
        IterationSchedule(1.0, [0.5, -0.1])
    assert IterationSchedule(1.0, [1.0]).K == 0


def test_deep_geometric_radii_stay_positive():
    s = IterationSchedule.geometric(0.5, 2.0)
    r = s.radii
    assert np.all(r[:-1] > 0)
    assert r[40] == pytest.approx(0.5 * 2.0**-40, rel=1e-12)


def test_optimal_schedule_example():
    s = optimal_schedule(1.0, 2.0)
    assert np.allclose(s.x[:4], [0.5, 0.25, 0.125, 0.0625])
    assert math.fsum(s.x) == pytest.approx(1.0, rel=1e-14)
    assert math.exp(log_optimal_product(1.0, 2.0)) == pytest.approx(0.0625, rel=1e-14)
    direct = math.fsum(2.0 ** -k * math.log(x) for k, x in enumerate(optimal_schedule(1.0, 2.0, 64).x))
    assert direct == pytest.approx(math.log(0.0625), rel=1e-12)


@given(st.floats(1.05, 3.0), st.floats(0.1, 10.0), st.integers(0, 20))
def test_perturbing_optimum_decreases_product(p, t0, k):
    K = 24
    s = finite_optimal_schedule(t0, p, K)
    x = s.x.copy()
    x[k] *= 1.1
    x *= t0 / x.sum()
    assert log_schedule_product(IterationSchedule(t0, x), p) < log_schedule_product(s, p)


@given(st.floats(1.05, 3.0), st.floats(3.1, 8.0), st.floats(0.1, 10.0), st.floats(0.1, 5.0))
def test_iterate_matches_closed_form(p, nu, C_hat, t):
    sch = IterationSchedule.geometric(t, p)
    assert abs(iterate(sch, C_hat, p, nu) - geometric_closed_form(C_hat, p, nu, t)) < 1e-10


def test_iterate_tail_factor():
    sch = IterationSchedule.geometric(1.0, 2.0, K=3)
    base = iterate(sch, 2.0, 2.0, 3.0)
    assert iterate(sch, 2.0, 2.0, 3.0, tail_value=1.0) == base
    assert iterate(sch, 2.0, 2.0, 3.0, tail_value=math.e) == pytest.approx(base + 2.0**-4)
    assert iterate(sch, 2.0, 2.0, 3.0, log=False) == pytest.approx(math.exp(base))


def test_default_truncation():
    K = default_truncation(1.01)
    assert 1.01 ** -K <= math.exp(-50) < 1.01 ** -(K - 1)


def test_nogo_default_case():
    rep = nogo_certificate(1, 1, 1)
    assert rep.p0 == pytest.approx(2 ** (1 / 21), rel=1e-12)
    assert rep.all_positive
    assert len(rep.p_grid) == 6 and rep.p_grid[-1] == pytest.approx(rep.p0)


def test_nogo_p0_conditions_hold_below():
    p0, sups = nogo_p0(1, 1, 1)
    assert len(sups) == 2 and p0 == min(sups.values())


def test_nogo_rejects_grid_above_p0():
    with pytest.raises(ValueError, match="exceeds p0"):
        nogo_certificate(1, 1, 1, p_grid=[1.01, 1.1])


def test_nogo_B_zero():
    rep = nogo_certificate(1, 0, 1)
    assert rep.all_positive


def test_random_search_below_optimum():
    s = random_schedule_search(1.0, 1.02, trials=1000, K=64, seed=3)
    assert s.margin > 0
    # the K-step optimum dominates the truncated geometric schedule
    geo = IterationSchedule.geometric(1.0, 1.02, K=64)
    assert s.optimum >= log_schedule_product(geo, 1.02)


def test_random_search_reproducible():
    a = random_schedule_search(1.0, 1.1, trials=50, seed=7)
    b = random_schedule_search(1.0, 1.1, trials=50, seed=7)
    assert a.best_log_product == b.best_log_product


def test_classification():
    assert classify_blowup("chat").label == "bounded"
    c = classify_blowup("c_unstable", nu=3)
    assert c.label == "polynomial" and abs(c.degree - (3 - 1)) < 0.05
    assert classify_blowup(nogo_target()).label == "exponential"
    assert classify_blowup("cbar").label == "bounded"


def test_classification_grid_validation():
    with pytest.raises(ValueError):
        classify_blowup("chat", p_grid=[1.1, 1.2])
    with pytest.raises(ValueError):
        classify_blowup("chat", p_grid=np.linspace(1.1, 2.0, 8))


def test_constants_report():
    rep = constants_report()
    rows = rep.rows()
    assert len(rows) == 4 * len(rep.p_grid)
    assert {r[1] for r in rows} == {"cbar", "c_harnack", "chat", "c_unstable"}
    assert "c_unstable" in rep.summary()
