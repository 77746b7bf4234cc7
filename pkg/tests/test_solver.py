import math

import numpy as np
import pytest

from green_imcf.fem import (
    ContinuationSchedule, SolverConfig, SolverError, annulus_mesh, continue_to_one,
    extrapolate_linear, inverse_moser, moser_transform, residual_pharmonic, solve_capacitor, unit_square_mesh,
)
from green_imcf.fem.mesh import MeshError
from green_imcf.verify import annulus_exact

MESH = annulus_mesh(0.5, 1.0, 0.04)
R = np.hypot(*MESH.vertices.T)


@pytest.fixture(scope="module")
def solutions():
    return {p: solve_capacitor(MESH, p) for p in (1.5, 2.0, 3.0)}


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_matches_radial_solution(solutions, p):
    v = solutions[p]
    assert np.max(np.abs(v.values - annulus_exact(p, R))) < 1e-2


def test_exact_radial_solution_formula():
    # independent check of the oracle: p = 2 planar capacitor potential
    r = np.array([0.5, 0.6, 0.9, 1.0])
    assert np.allclose(annulus_exact(2.0, r), np.log(1.0 / r) / math.log(2.0), atol=1e-15)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_discrete_maximum_principle(solutions, p):
    v = solutions[p].values
    assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_energy_history_non_increasing(solutions, p):
    h = np.array(solutions[p].metadata["energy_history"])
    # at p = 2 the harmonic starting guess is already the minimizer
    assert h.size > 0 or p == 2.0
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]))


def test_residual_small_and_detects_perturbation(solutions):
    v = solutions[2.0]
    cfg = SolverConfig()
    assert residual_pharmonic(MESH, 2.0, v) < cfg.newton_tol
    w = v.values.copy()
    w[MESH.interior_nodes()[10]] += 0.1
    assert residual_pharmonic(MESH, 2.0, w) > cfg.newton_tol


def test_metadata(solutions):
    md = solutions[1.5].metadata
    assert md["p"] == 1.5 and md["eps"] == SolverConfig().eps_final
    assert len(md["newton_iterations"]) == len(SolverConfig().eps_schedule)


def test_small_p_uses_exact_energy():
    v = solve_capacitor(MESH, 1.1)
    assert v.metadata["eps"] == 0.0
    assert residual_pharmonic(MESH, 1.1, v, eps=0.0) < 1e-6
    assert np.max(np.abs(v.values - annulus_exact(1.1, R))) < 2e-2


def test_missing_tags_rejected():
    with pytest.raises(MeshError):
        solve_capacitor(unit_square_mesh(4), 2.0)
    with pytest.raises(ValueError):
        solve_capacitor(MESH, 2.0, inner="outer")


def test_iteration_cap_raises():
    with pytest.raises(SolverError) as info:
        solve_capacitor(MESH, 3.0, SolverConfig(max_iters=1, eps_schedule=(1e-8,)))
    assert info.value.residual > 0
    assert info.value.partial is not None


def test_moser_transform_examples():
    assert np.all(moser_transform(np.ones(3), 1.5).values == 0)
    assert moser_transform(np.array([math.exp(-2)]), 1.5).values[0] == pytest.approx(1.0)
    v = annulus_exact(1.5, 0.75)
    assert moser_transform(np.array([v]), 1.5).values[0] == pytest.approx(-0.5 * math.log(1 / 3), rel=1e-12)


def test_moser_floor():
    u = moser_transform(np.array([0.0, 1e-40]), 2.0, floor=1e-30)
    assert np.allclose(u.values, 30 * math.log(10))
    assert u.metadata["floor"] == 1e-30
    with pytest.raises(ValueError):
        moser_transform(np.ones(2), 2.0, floor=0.0)


def test_inverse_moser_roundtrip():
    v = np.array([0.1, 0.5, 1.0])
    assert np.allclose(inverse_moser(moser_transform(v, 1.3), 1.3), v)


def test_extrapolate_linear():
    assert extrapolate_linear(1.1, np.array([2.0]), 1.05, np.array([1.5]))[0] == pytest.approx(1.0)


def test_continuation_approaches_log_ratio():
    res = continue_to_one(MESH, ContinuationSchedule((1.5, 1.3, 1.2, 1.1, 1.05, 1.02)))
    assert res.complete
    u102 = res.transforms[-1]
    probe = np.array([[0.75, 0.0]])
    assert abs(MESH.interpolate(u102.values, probe)[0] - (2 - 1.02) * math.log(1.5)) < 1e-2
    inner = MESH.tagged_nodes("inner")
    assert np.all(res.extrapolated.values[inner] == 0)
    for r in (0.6, 0.75, 0.9):
        got = MESH.interpolate(res.extrapolated.values, np.array([[0.0, r]]))[0]
        assert abs(got - math.log(r / 0.5)) < 2e-2


def test_continuation_reports_failure():
    bad = SolverConfig(max_iters=1, eps_schedule=(1e-8,))
    res = continue_to_one(MESH, ContinuationSchedule((1.5, 1.3)), bad)
    assert not res.complete
    assert res.extrapolated is None
    assert isinstance(res.error, SolverError)
