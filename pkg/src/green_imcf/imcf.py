"""IMCF cores of model manifolds and pointwise certificates for radial barriers.

For a radial function ``u`` with ``u' > 0`` the level sets are geodesic
spheres, so ``div(grad u/|grad u|) = H(r) = (n-1) h'/h`` and the IMCF
equation ``div(grad u/|grad u|) = |grad u|`` reduces to ``H = u'``. All the
sub/supersolution checks below are signs of ``H - u'`` (or of the radial
p-Laplacian bracket) on a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy.optimize import brentq

from .geometry import DomainError, ModelManifold, diagnostics, ricci_nonnegative, sphere_constant


class CertificationError(ValueError):
    """A hypothesis needed by an estimate is not certified on the grid."""


@dataclass
class MarginReport:
    """Pointwise ``margin = rhs - lhs`` on a radius grid."""

    r: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    notes: Dict[str, object] = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin))

    @property
    def max_margin(self) -> float:
        return float(np.max(self.margin))

    def rows(self):
        return zip(self.r.tolist(), self.lhs.tolist(), self.rhs.tolist(), self.margin.tolist())


@dataclass
class RadialFlow:
    """Samples ``(r, u, u')`` of a radial function on a model."""

    M: ModelManifold
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    pole_normalized: bool = False

    def __post_init__(self):
        if np.any(self.du <= 0):
            raise ValueError("radial flow must be strictly increasing")

    def pole_defect(self) -> np.ndarray:
        """``|u - (n-1) log r|`` on the grid; tends to 0 for a normalized core."""
        return np.abs(self.u - (self.M.n - 1) * np.log(self.r))


def _grid(M: ModelManifold, r) -> np.ndarray:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    M.check_radius(r)
    return r


def imcf_core_model(M: ModelManifold, r):
    """Pole-normalized IMCF core ``u = log(v_h/omega_{n-1}) = (n-1) log h``.

    Requires ``h`` non-decreasing on ``(0, r]``.
    """
    rr = _grid(M, r)
    if not M.is_nondecreasing(1e-12, float(rr.max())):
        raise DomainError(f"h is not non-decreasing up to r={rr.max()} on {M.label}")
    out = (M.n - 1) * np.asarray(M.log_h(rr))
    return float(out[0]) if np.ndim(r) == 0 else out


def imcf_core_flow(M: ModelManifold, r_grid) -> RadialFlow:
    r = _grid(M, r_grid)
    u = imcf_core_model(M, r)
    du = (M.n - 1) * M.dh(r) / M.h(r)
    return RadialFlow(M, r, np.atleast_1d(u), np.atleast_1d(du), pole_normalized=True)


def imcf_residual(M: ModelManifold, r_grid, rel_step: float = 1e-3) -> np.ndarray:
    """``H(r) - u'(r)`` for the exact core, with ``u'`` from a five-point stencil on ``u``.

    The derivative is taken independently of ``h'``, so the residual tests
    the closed forms of ``h`` and ``h'`` against each other. Keep the grid
    a few steps away from points where ``h''`` jumps.
    """
    r = _grid(M, r_grid)
    d = rel_step * r
    u = lambda x: (M.n - 1) * np.asarray(M.log_h(x))
    du = (8 * (u(r + d) - u(r - d)) - (u(r + 2 * d) - u(r - 2 * d))) / (12 * d)
    H = (M.n - 1) * M.dh(r) / M.h(r)
    return H - du


def gradient_bound_check(M: ModelManifold, r_grid) -> MarginReport:
    """Compare ``|grad u| = (n-1) h'/h`` with ``(n-1) e^{-u/(n-1)} = (n-1)/h``.

    The margin ``(n-1)(1 - h')/h`` is non-negative exactly where ``h' <= 1``.
    """
    r = _grid(M, r_grid)
    h, dh = M.h(r), M.dh(r)
    n1 = M.n - 1
    lhs = n1 * dh / h
    rhs = n1 / h
    return MarginReport(r, lhs, rhs, n1 * (1.0 - dh) / h)


@dataclass(frozen=True)
class RadialBarrier:
    """Radial closed form ``u(r)`` with derivative ``du(r)``."""

    name: str
    u: Callable
    du: Callable


def lower_barrier(n: int) -> RadialBarrier:
    """``(n-1) log r - r``."""
    return RadialBarrier(
        "lower",
        lambda r: (n - 1) * np.log(r) - r,
        lambda r: (n - 1) / np.asarray(r) - 1.0,
    )


def upper_barrier(n: int, rho0: float = 1e-2) -> RadialBarrier:
    """``(n-1) log r + r + 1/(1 - r/rho0) - 1`` on ``(0, rho0)``."""
    return RadialBarrier(
        "upper",
        lambda r: (n - 1) * np.log(r) + r + 1.0 / (1.0 - np.asarray(r) / rho0) - 1.0,
        lambda r: (n - 1) / np.asarray(r) + 1.0 + (1.0 / rho0) / (1.0 - np.asarray(r) / rho0) ** 2,
    )


def core_barrier(M: ModelManifold) -> RadialBarrier:
    return RadialBarrier(
        "core",
        lambda r: (M.n - 1) * np.asarray(M.log_h(r)),
        lambda r: (M.n - 1) * M.dh(r) / M.h(r),
    )


def subsolution_margin(M: ModelManifold, barrier: RadialBarrier, r_grid) -> MarginReport:
    """``H(r) - u'(r)``: positive for a strict subsolution, negative for a strict supersolution."""
    r = _grid(M, r_grid)
    du = np.asarray(barrier.du(r), dtype=float)
    if np.any(du <= 0):
        raise DomainError(f"{barrier.name}: u' <= 0 at r={r[du <= 0][0]!r}")
    H = (M.n - 1) * M.dh(r) / M.h(r)
    return MarginReport(r, du, H, H - du, {"barrier": barrier.name})


def p_supersolution_margin(M: ModelManifold, p: float, C: float, r_grid) -> MarginReport:
    """``Delta_p w - |grad w|^p`` for ``w = (n-p) log r + 1/(1 - C r)``.

    For radial ``w`` this is ``|w'|^{p-2} [(p-1) w'' + H w' - w'^2]``. With
    ``H = (n-1)/r + dH`` the ``(n-p)/r`` parts of the bracket cancel
    identically, leaving

        (p-1) c - b (n + 1 - 2p)/r - b^2 + dH w',

    ``b = C/(1-Cr)^2``, ``c = 2C^2/(1-Cr)^3``, which is evaluated instead to
    avoid cancellation near the pole. Radii where ``|dH| > 1`` are listed in
    ``notes['curvature_violations']``.
    """
    if not p > 1:
        raise ValueError("p must be > 1")
    if C < 0:
        raise ValueError("C must be non-negative")
    r = _grid(M, r_grid)
    if C * r.max() >= 1:
        raise DomainError("need C * r < 1 on the grid")
    n = M.n
    q = 1.0 - C * r
    b = C / q**2
    c = 2.0 * C**2 / q**3
    dw = (n - p) / r + b
    if np.any(dw <= 0):
        raise DomainError("w' <= 0 on the grid")
    dH = (n - 1) * (M.dh(r) / M.h(r) - 1.0 / r)
    bracket = (p - 1.0) * c - b * (n + 1.0 - 2.0 * p) / r - b * b + dH * dw
    margin = dw ** (p - 2.0) * bracket
    viol = r[np.abs(dH) > 1.0]
    return MarginReport(r, margin, np.zeros_like(r), margin,
                        {"C": C, "p": p, "curvature_violations": viol})


@dataclass
class SupersolutionCertificate:
    C: int
    report: MarginReport

    @property
    def curvature_violations(self) -> np.ndarray:
        return self.report.notes["curvature_violations"]


def find_C(M: ModelManifold, p: float, c_max: int = 2**20, num: int = 400,
           s_min: float = 1e-6) -> SupersolutionCertificate:
    """Smallest integer ``C <= c_max`` with a non-positive p-supersolution margin.

    The range for a given ``C`` is ``(0, 1/(2C))``, sampled as ``r = s/C``
    with ``s`` log-spaced in ``[s_min, 0.5)``. Monotonicity in ``C`` is
    assumed by the bisection.
    """
    s = np.geomspace(s_min, 0.5, num, endpoint=False)

    def report(C):
        r = s / C
        r = r[r < M.r_max]
        return p_supersolution_margin(M, p, float(C), r)

    def ok(C):
        return report(C).max_margin <= 0.0

    if not ok(c_max):
        raise CertificationError(f"no admissible C <= {c_max} for p={p} on {M.label}")
    if ok(1):
        return SupersolutionCertificate(1, report(1))
    lo, hi = 1, c_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return SupersolutionCertificate(hi, report(hi))


@dataclass
class GrowthGap:
    constant: float
    exponent: float
    r: np.ndarray
    gap: np.ndarray


def _iso_stable(M: ModelManifold, r: np.ndarray) -> tuple:
    d = diagnostics(M, r)
    tail = max(4, r.size // 3)
    slope = np.polyfit(np.log(r[-tail:]), np.log(d.isoperimetric_ratios[-tail:]), 1)[0]
    return d, slope


def growth_gap(M: ModelManifold, flavor: str, r_grid, constants: Optional[dict] = None) -> GrowthGap:
    """Empirical constant ``C = sup_r (k log r - u(r))`` for the exact core.

    ``flavor='isoperimetric'`` uses ``k = n - 1`` and needs the isoperimetric
    ratio of balls to stay bounded below (no decay at the grid end).
    ``flavor='reverse_doubling'`` uses ``k = b - 1`` with ``b`` from
    ``constants`` (or fitted) and needs ``Ric >= 0`` plus reverse doubling
    with that ``b`` on the grid.
    """
    constants = dict(constants or {})
    r = _grid(M, r_grid)
    if flavor == "isoperimetric":
        d, slope = _iso_stable(M, r)
        if not (d.c_I > 0 and slope >= -1e-3):
            raise CertificationError(
                f"isoperimetric ratio of balls decays on the grid (log-slope {slope:.3g}) for {M.label}"
            )
        k = M.n - 1.0
    elif flavor == "reverse_doubling":
        if not ricci_nonnegative(M, r):
            raise CertificationError(f"Ric >= 0 fails on the grid for {M.label}")
        d = diagnostics(M, r)
        b = float(constants.get("b", d.b))
        C_R = float(constants.get("C_R", d.C_R))
        if not (b > 1 and d.reverse_doubling_holds(b, C_R)):
            raise CertificationError(f"reverse doubling with b={b:g}, C_R={C_R:g} fails for {M.label}")
        k = b - 1.0
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    gap = k * np.log(r) - imcf_core_model(M, r)
    return GrowthGap(float(np.max(gap)), k, r, gap)


def euclidean_isoperimetric_constant(n: int) -> float:
    """``P(B)/|B|^{(n-1)/n}`` for a Euclidean ball."""
    w = sphere_constant(n)
    return w / (w / n) ** ((n - 1) / n)


def c1_constant(n: int, c_I: float) -> float:
    """``1 + c_I^{-n/(n-1)} n (2 omega_{n-1})^{1/(n-1)} (1 + e^{n-1})/(1 - e^{-1})``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not c_I > 0:
        raise ValueError("c_I must be positive")
    if math.isinf(c_I):
        return 1.0
    w = sphere_constant(n)
    return 1.0 + c_I ** (-n / (n - 1)) * n * (2 * w) ** (1.0 / (n - 1)) * (1 + math.e ** (n - 1)) / (1 - math.exp(-1))


def level_radius_of_core(M: ModelManifold, t: float) -> float:
    """``r_t`` with ``(n-1) log h(r_t) = t``."""
    target = t / (M.n - 1)
    f = lambda x: float(M.log_h(math.exp(x))) - target
    lo = min(target, 0.0) - 2.0
    while f(lo) >= 0:
        lo -= 10.0
        if lo < -700:
            raise DomainError(f"t={t} below the range of the core")
    hi_cap = math.log(M.r_max) if math.isfinite(M.r_max) else 700.0
    hi = min(max(target, 0.0) + 2.0, hi_cap)
    while f(hi) <= 0:
        if hi >= hi_cap:
            raise DomainError(f"t={t} above the range of the core on {M.label}")
        hi = min(hi + 10.0, hi_cap)
        if hi == hi_cap and math.isfinite(M.r_max):
            hi = math.log(M.r_max * (1 - 1e-12))
    return math.exp(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def diameter_ratio(M: ModelManifold, t: float) -> float:
    """``e^{-t/(n-1)} r_t`` where ``r_t`` is the radius of the level ``{u = t}`` of the core."""
    return math.exp(-t / (M.n - 1)) * level_radius_of_core(M, t)


def excess_ode_bound(n: int, c_I: float, V_s2: float, s1: float, s2: float) -> float:
    """Lower bound for ``V(s1)`` when ``V' <= -c_I/(1+e^{n-1}) V^{(n-1)/n}`` on ``[s1, s2]``.

    Integrating ``(V^{1/n})' <= -c_I/(n(1+e^{n-1}))`` gives
    ``V(s1)^{1/n} >= V(s2)^{1/n} + (s2 - s1) c_I/(n(1+e^{n-1}))``.
    """
    if s2 < s1:
        raise ValueError("need s1 <= s2")
    k = c_I / (n * (1 + math.e ** (n - 1)))
    return (V_s2 ** (1.0 / n) + (s2 - s1) * k) ** n


def check_excess_ode(n: int, c_I: float, s, V) -> float:
    """Smallest slack of the comparison over grid pairs ``i < j``, in the variable ``V^{1/n}``.

    Non-negative iff every pair satisfies :func:`excess_ode_bound`.
    """
    s = np.asarray(s, dtype=float)
    V = np.asarray(V, dtype=float)
    k = c_I / (n * (1 + math.e ** (n - 1)))
    root = V ** (1.0 / n)
    i, j = np.triu_indices(len(s), 1)
    return float(np.min(root[i] - (root[j] + (s[j] - s[i]) * k)))
