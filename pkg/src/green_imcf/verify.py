"""Acceptance suites shared by the command line and the test-suite.

Each ``check_*`` function runs one suite and returns a :class:`CheckResult`
whose ``margin`` is the smallest slack against the suite's tolerances
(positive when every sub-check passes) and whose ``passed`` flag also
requires the runtime to stay within ``budget`` seconds.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import capacity, constants, imcf, kernel
from .fem import annulus_mesh, continue_to_one, gradient_fd_error, solve_capacitor, unit_square_mesh
from .geometry import ModelManifold


@dataclass
class CheckResult:
    name: str
    ok: bool
    margin: float
    runtime: float
    budget: float
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.ok and self.runtime <= self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "" if self.runtime <= self.budget else " (over time budget)"
        tight = self.details.get("tightest") or self.details.get("error", "")
        return (f"[{status}] {self.name}: margin={self.margin:.3e} "
                f"runtime={self.runtime:.2f}s/{self.budget:g}s{extra} [{tight}]")


class _Margins:
    """Collects ``tolerance - error`` style slacks with the measured values.

    ``below``/``above`` are strict, ``at_most``/``at_least`` accept a zero
    slack and ``equal`` demands exact equality.
    """

    def __init__(self):
        self.items: Dict[str, float] = {}
        self.measured: Dict[str, tuple] = {}
        self.passed: Dict[str, bool] = {}
        self.exact: Dict[str, tuple] = {}

    def _add(self, key, slack, ok, value, op, limit):
        self.items[key] = float(slack)
        self.passed[key] = bool(ok)
        self.measured[key] = (value, op, limit)

    def below(self, key: str, value: float, limit: float):
        self._add(key, limit - value, limit - value > 0, float(value), "<", float(limit))

    def above(self, key: str, value: float, limit: float):
        self._add(key, value - limit, value - limit > 0, float(value), ">", float(limit))

    def at_most(self, key: str, value: float, limit: float):
        self._add(key, limit - value, limit - value >= 0, float(value), "<=", float(limit))

    def at_least(self, key: str, value: float, limit: float):
        self._add(key, value - limit, value - limit >= 0, float(value), ">=", float(limit))

    def equal(self, key: str, value, expected):
        # pass/fail only: kept out of the slack summary
        self.exact[key] = (value == expected, value, expected)

    @property
    def ok(self) -> bool:
        return all(self.passed.values()) and all(e[0] for e in self.exact.values())

    @property
    def worst(self) -> float:
        return min(self.items.values()) if self.items else math.nan

    @property
    def tightest(self) -> str:
        failed = [k for k, e in self.exact.items() if not e[0]]
        if failed:
            _, value, expected = self.exact[failed[0]]
            return f"{failed[0]}: {value} != {expected}"
        if not self.items:
            return ""
        key = min(self.items, key=self.items.get)
        value, op, limit = self.measured[key]
        return f"{key}: {value:.3g} {op} {limit:.3g}"


def _run(name: str, budget: float, body: Callable[[_Margins, dict], None]) -> CheckResult:
    m, details = _Margins(), {}
    t = time.perf_counter()
    body(m, details)
    dt = time.perf_counter() - t
    details["margins"] = dict(m.items)
    details["exact"] = {k: e[0] for k, e in m.exact.items()}
    details["tightest"] = m.tightest
    return CheckResult(name, m.ok, m.worst, dt, budget, details)


# -- 1 ---------------------------------------------------------------------------

LEVEL_PAIRS = [(0.1, 0.5), (0.2, 2.0), (0.5, 5.0), (1.0, 10.0), (0.05, 0.3), (2.0, 50.0), (0.3, 30.0)]


def check_kernel_identities() -> CheckResult:
    def body(m, d):
        E3 = ModelManifold.euclidean(3)
        k = kernel.green_radial(E3, 2.0)
        rel = float(np.max(np.abs(k.G / kernel.mu(3, 2.0, k.r) - 1.0)))
        m.below("euclidean kernel vs mu", rel, 1e-6)
        d["kernel_vs_mu"] = rel
        cases = [
            (E3, 2.0),
            (ModelManifold.hyperbolic(3), 1.5),
            (ModelManifold.power_tail(2, 0.5), 1.25),
        ]
        errs = []
        for M, p in cases:
            kk = kernel.green_radial(M, p)
            for r_small, r_big in LEVEL_PAIRS:
                s, t = kk.value(r_big), kk.value(r_small)
                errs.append(abs(kernel.level_energy(kk, s, t) / (t - s) - 1.0))
        errs = errs[:20]
        d["level_pairs"] = len(errs)
        d["level_energy_max_rel_err"] = max(errs)
        m.below("level energy", max(errs), 1e-5)

    return _run("1 kernel identities", 5.0, body)


# -- 2 ---------------------------------------------------------------------------


def check_capacity_identity() -> CheckResult:
    def body(m, d):
        models = [
            (ModelManifold.euclidean(3), math.inf),
            (ModelManifold.hyperbolic(3), math.inf),
            (ModelManifold.power_tail(2, 0.5), 50.0),
        ]
        worst = 0.0
        count = 0
        for M, R0 in models:
            for p in (1.3, 1.5, 2.0):
                kk = kernel.green_radial(M, p, R0)
                for r in (0.05, 0.2, 1.0, 3.0, 10.0):
                    res = capacity.verify_cap_level(M, p, R0, kk.value(r), kernel=kk)
                    worst = max(worst, res.rel_err)
                    count += 1
        d["cases"] = count
        d["max_rel_err"] = worst
        m.below("cap level identity", worst, 1e-3)

    return _run("2 capacity identity", 10.0, body)


# -- 3 ---------------------------------------------------------------------------


def pole_grid(hi: float, num: int = 25) -> np.ndarray:
    return np.geomspace(hi * 1e-2, hi, num, endpoint=False)


def check_pole_asymptotics() -> CheckResult:
    def body(m, d):
        H3 = ModelManifold.hyperbolic(3)
        kk = kernel.green_radial(H3, 2.0, r_hi=1.0)
        coarse = kernel.check_pole_asymptotics(kk, pole_grid(0.1)).maxima()
        fine = kernel.check_pole_asymptotics(kk, pole_grid(0.01)).maxima()
        d["hyperbolic_coarse"], d["hyperbolic_fine"] = coarse, fine
        for i, (a, b) in enumerate(zip(coarse, fine), start=1):
            m.above(f"residual {i} decrease", a / b, 3.0)
        E3 = ModelManifold.euclidean(3)
        ke = kernel.green_radial(E3, 2.0, r_hi=1.0)
        eu = kernel.check_pole_asymptotics(ke, pole_grid(0.1)).maxima()
        d["euclidean"] = eu
        m.below("euclidean residuals", max(eu), 1e-10)

    return _run("3 pole asymptotics", 5.0, body)


# -- 4 ---------------------------------------------------------------------------


def check_decay_exponent() -> CheckResult:
    def body(m, d):
        M = ModelManifold.power_tail(2, 0.5)
        b = M.growth_exponent
        for p in (1.1, 1.25):
            slope = kernel.decay_exponent(M, p, (10.0, 1000.0))
            target = -(b - p) / (p - 1)
            d[f"slope_p{p}"] = (slope, target)
            m.below(f"slope p={p}", abs(slope / target - 1.0), 0.03)

    return _run("4 decay exponent", 10.0, body)


# -- 5 ---------------------------------------------------------------------------


def annulus_exact(p: float, r, r0: float = 0.5, R: float = 1.0):
    """Radial p-harmonic function on the planar annulus, 1 at ``r0`` and 0 at ``R``."""
    r = np.asarray(r, dtype=float)
    if p == 2.0:
        return np.log(r / R) / math.log(r0 / R)
    g = (p - 2.0) / (p - 1.0)
    return (r**g - R**g) / (r0**g - R**g)


def check_solver_oracle(h: float = 0.02) -> CheckResult:
    def body(m, d):
        errs = {}
        for hh in (h, h / 2):
            mesh = annulus_mesh(0.5, 1.0, hh)
            r = np.hypot(*mesh.vertices.T)
            for p in (1.5, 2.0):
                v = solve_capacitor(mesh, p)
                errs[(hh, p)] = float(np.max(np.abs(v.values - annulus_exact(p, r))))
        for p in (1.5, 2.0):
            e1, e2 = errs[(h, p)], errs[(h / 2, p)]
            rate = math.log2(e1 / e2)
            d[f"p{p}"] = {"err_h": e1, "err_h2": e2, "rate": rate}
            m.below(f"max error p={p}", e1, 1e-2)
            m.above(f"rate p={p}", rate, 0.8)
        sq = unit_square_mesh(20)
        x, y = sq.vertices.T
        u = x + 0.3 * np.sin(3 * y)
        nodes = np.random.default_rng(0).choice(sq.nv, 20, replace=False)
        worst = 0.0
        for p in (1.3, 1.5, 2.0, 2.5):
            for eps in (1e-2, 1e-4):
                worst = max(worst, gradient_fd_error(sq, p, eps, u, nodes))
        d["fd_rel_err"] = worst
        m.below("gradient finite differences", worst, 1e-6)

    return _run("5 solver oracle", 60.0, body)


# -- 6 ---------------------------------------------------------------------------


def check_obstacle_limit(h: float = 0.02) -> CheckResult:
    def body(m, d):
        r0, R = 0.5, 1.0
        mesh = annulus_mesh(r0, R, h)
        res = continue_to_one(mesh)
        if not res.complete:
            raise res.error
        ext = res.extrapolated.values
        th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        for rp in (0.6, 0.75, 0.9):
            pts = np.column_stack([rp * np.cos(th), rp * np.sin(th)])
            err = float(np.max(np.abs(mesh.interpolate(ext, pts) - math.log(rp / r0))))
            d[f"probe_{rp}"] = err
            m.below(f"probe r={rp}", err, 2e-2)
        sup = float(ext[mesh.interior_nodes()].max())
        d["interior_sup"] = sup
        m.below("interior sup", sup, math.log(R / r0) + 5e-2)
        d["p_values"] = res.p_values

    return _run("6 obstacle IMCF limit", 120.0, body)


# -- 7 ---------------------------------------------------------------------------


def check_gradient_estimate() -> CheckResult:
    def body(m, d):
        r = np.geomspace(1e-2, 1e2, 400)
        for M in (ModelManifold.euclidean(2), ModelManifold.euclidean(3),
                  ModelManifold.power_tail(2, 0.5), ModelManifold.power_tail(3, 0.5)):
            mm = imcf.gradient_bound_check(M, r).min_margin
            d[M.label] = mm
            m.at_least(f"{M.label} min margin", mm, 0.0)
        hyp = imcf.gradient_bound_check(ModelManifold.hyperbolic(3), r)
        d["hyperbolic"] = hyp.max_margin
        m.below("hyperbolic max margin (violation witness)", hyp.max_margin, 0.0)

    return _run("7 gradient estimate", 1.0, body)


# -- 8 ---------------------------------------------------------------------------


def check_barriers() -> CheckResult:
    def body(m, d):
        r = np.geomspace(1e-6, 5e-3, 200, endpoint=False)
        for n in (2, 3):
            E = ModelManifold.euclidean(n)
            lo = imcf.subsolution_margin(E, imcf.lower_barrier(n), r).min_margin
            up = imcf.subsolution_margin(E, imcf.upper_barrier(n), r).max_margin
            d[f"n{n}"] = (lo, up)
            m.above(f"lower barrier n={n}", lo, 0.0)
            m.below(f"upper barrier n={n}", up, 0.0)
        cert = imcf.find_C(ModelManifold.euclidean(3), 1.05)
        d["C"] = cert.C
        mx = cert.report.max_margin
        m.at_most("p-supersolution max margin", mx, 0.0)

    return _run("8 sub/supersolution certificates", 5.0, body)


# -- 9 ---------------------------------------------------------------------------


def check_constants() -> CheckResult:
    def body(m, d):
        exact = {"cbar(2,3)": (constants.cbar(2, 3), 72.0),
                 "c_harnack(2,4)": (constants.c_harnack(2, 4), 2304.0),
                 "chat(2,4,1)": (constants.chat(2, 4, 1), 256.0)}
        for k, (a, b) in exact.items():
            m.equal(k, a, b)
        worst = 0.0
        for p in (1.1, 1.5, 2.0):
            for nu in (2.5, 3.0, 4.0):
                ch = constants.chat(p, nu, 1.0)
                a = constants.iterate(constants.optimal_schedule(1.0, p), ch, p, nu)
                b = constants.geometric_closed_form(ch, p, nu, 1.0)
                worst = max(worst, abs(a - b) / max(1.0, abs(b)))
        d["iterate_vs_closed_form"] = worst
        m.below("iterate vs closed form", worst, 1e-10)
        grid = constants.default_blowup_grid()
        nu = 3.0
        c1 = constants.classify_blowup("chat", grid, nu, 1.0)
        c2 = constants.classify_blowup("c_unstable", grid, nu, 1.0)
        expected = nu - float(grid.min())
        d["chat"], d["c_unstable"] = c1.label, (c2.label, c2.degree, expected)
        m.equal("chat class", c1.label, "bounded")
        m.equal("c_unstable class", c2.label, "polynomial")
        m.below("c_unstable degree", abs((c2.degree or 0.0) - expected), 0.05)

    return _run("9 constants ledger", 5.0, body)


# -- 10 --------------------------------------------------------------------------


def check_nogo(seed: int = 0) -> CheckResult:
    def body(m, d):
        rep = constants.nogo_certificate(1.0, 1.0, 1.0)
        d["p0"] = rep.p0
        d["log_margins"] = rep.log_margins.tolist()
        m.equal("grid points", float(rep.p_grid.size), 6.0)
        m.above("log-margins", float(rep.log_margins.min()), 0.0)
        worst = math.inf
        for i, p in enumerate(rep.p_grid):
            s = constants.random_schedule_search(1.0, float(p), trials=1000, K=64, seed=seed + i)
            worst = min(worst, s.margin)
        d["random_search_margin"] = worst
        m.above("random schedules below optimum", worst, 0.0)

    return _run("10 no-go certificate", 10.0, body)


# -- 11 --------------------------------------------------------------------------


def closed_form_models():
    return [
        ModelManifold.euclidean(2), ModelManifold.euclidean(3),
        ModelManifold.hyperbolic(2), ModelManifold.hyperbolic(3), ModelManifold.hyperbolic(3, kappa=0.5),
        ModelManifold.power_tail(2, 0.5), ModelManifold.power_tail(3, 0.5),
        ModelManifold.spherical(3),
    ]


def check_cross_module() -> CheckResult:
    def body(m, d):
        worst = 0.0
        for M in closed_form_models():
            R0 = 0.5 * math.pi / M.kappa if M.kind == "spherical" else math.inf
            r = np.geomspace(1e-2, min(10.0, 0.99 * R0), 25)
            for x in r:
                diff = kernel.core_limit(M, float(x), R0) - imcf.imcf_core_model(M, float(x)) - math.log(M.omega)
                worst = max(worst, abs(diff))
        d["identity_max"] = worst
        m.below("core identity", worst, 1e-10)
        rich = []
        for M, r in ((ModelManifold.euclidean(3), 1.0), (ModelManifold.hyperbolic(3), 1.0),
                     (ModelManifold.power_tail(2, 0.5), 2.0)):
            rich.append(abs(kernel.richardson_core(M, r) - kernel.core_limit(M, r)))
        d["richardson"] = rich
        m.below("Richardson", max(rich), 1e-2)

    return _run("11 cross-module consistency", 10.0, body)


ALL_CHECKS: List[Callable[[], CheckResult]] = [
    check_kernel_identities,
    check_capacity_identity,
    check_pole_asymptotics,
    check_decay_exponent,
    check_solver_oracle,
    check_obstacle_limit,
    check_gradient_estimate,
    check_barriers,
    check_constants,
    check_nogo,
    check_cross_module,
]


def run_all(threads: int = 1, seed: int = 0) -> List[CheckResult]:
    """Run every suite; with ``threads > 1`` suites run concurrently, results keep their order.

    Concurrent runs share the CPU, so runtimes are measured per suite but
    may exceed their budgets on a loaded machine.
    """
    def call(fn):
        try:
            return fn(seed=seed) if fn is check_nogo else fn()
        except Exception as exc:  # a crashing suite is a failed check, not a crash
            name = fn.__name__.replace("check_", "")
            return CheckResult(name, False, -math.inf, 0.0, 0.0, {"error": repr(exc)})

    if threads <= 1:
        return [call(fn) for fn in ALL_CHECKS]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(call, ALL_CHECKS))
