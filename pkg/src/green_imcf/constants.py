"""Explicit constants of Moser iteration, Harnack and Sobolev estimates.

Every constant has a direct evaluator (for exact small cases) and a
log-space evaluator used by the iteration bookkeeping and by the blow-up
classification, where factors like ``p^{-p/(p-1)^2}`` underflow near
``p = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .geometry import ModelManifold, ball_volume, sphere_area


def _check(p: float, nu: float):
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if not nu > p:
        raise ValueError(f"need nu > p, got nu={nu}, p={p}")


# -- closed-form constants -----------------------------------------------------


def cbar(p: float, nu: float) -> float:
    """``2^nu (1+p)^p``."""
    _check(p, nu)
    return 2.0**nu * (1.0 + p) ** p


def c_harnack(p: float, nu: float) -> float:
    """``2^nu max{(1+p)^p, 3^p nu^nu / (p^p (nu-p)^{nu-p})}``."""
    _check(p, nu)
    return 2.0**nu * max((1.0 + p) ** p, 3.0**p * nu**nu / (p**p * (nu - p) ** (nu - p)))


def chat(p: float, nu: float, S: float) -> float:
    """``S^{nu/p} 2^{(nu+2p)(nu-p)/p}``."""
    _check(p, nu)
    if S < 0:
        raise ValueError("S must be non-negative")
    return S ** (nu / p) * 2.0 ** ((nu + 2 * p) * (nu - p) / p)


def c_unstable(p: float, nu: float, S: float) -> float:
    """``S^{nu/p} cbar^{(nu-p)/p} (e p)^{nu-p} / (p-1)^{nu-p}``."""
    _check(p, nu)
    if S < 0:
        raise ValueError("S must be non-negative")
    return S ** (nu / p) * cbar(p, nu) ** ((nu - p) / p) * (math.e * p) ** (nu - p) / (p - 1.0) ** (nu - p)


def log_cbar(p, nu, S=None):
    return nu * math.log(2.0) + p * math.log1p(p)


def log_c_harnack(p, nu, S=None):
    a = p * math.log1p(p)
    b = p * math.log(3.0) + nu * math.log(nu) - p * math.log(p) - (nu - p) * math.log(nu - p)
    return nu * math.log(2.0) + max(a, b)


def log_chat(p, nu, S):
    return (nu / p) * math.log(S) + (nu + 2 * p) * (nu - p) / p * math.log(2.0)


def log_c_unstable(p, nu, S):
    return math.fsum([
        (nu / p) * math.log(S),
        (nu - p) / p * log_cbar(p, nu),
        (nu - p) * (1.0 + math.log(p)),
        -(nu - p) * math.log(p - 1.0),
    ])


def log_harnack_H(p: float, nu: float, S: float, P1p: float, R: float, vol_B2R: float,
                  vol_B6R: float, c2: float = 1.0) -> float:
    """Log of the local Harnack constant ``exp{c2 P_{1,p} (|B_6R|/|B_2R|)^{1/p} Q^{-2} p}``.

    ``Q = inf_{tau in [1, nu/(nu-p)]} (S C_{p,nu})^{-nu tau/p} R^{nu tau} |B_2R|^{-tau}``
    is log-linear in ``tau``, so the infimum sits at an endpoint. ``c2`` is
    an input (no value is known).
    """
    _check(p, nu)
    slope = -(nu / p) * math.log(S * c_harnack(p, nu)) + nu * math.log(R) - math.log(vol_B2R)
    logQ = min(slope, slope * nu / (nu - p))
    return math.exp(math.log(c2 * P1p * p) + math.log(vol_B6R / vol_B2R) / p - 2.0 * logQ)


def _exp_or_inf(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def harnack_H(p: float, nu: float, S: float, P1p: float, R: float, vol_B2R: float,
              vol_B6R: float, c2: float = 1.0) -> float:
    """``exp`` of :func:`log_harnack_H`; ``inf`` when it overflows a double."""
    return _exp_or_inf(log_harnack_H(p, nu, S, P1p, R, vol_B2R, vol_B6R, c2))


def log_harnack_chain(varsigma: float, nu: float, p0: float, P1p: float, S: float, C: float = 1.0) -> float:
    """``C varsigma^{nu(1 + 2nu/(nu-p0))} P_{1,p} max{1,S}^{2nu^2/(nu-p0)}``.

    ``C`` and ``varsigma`` are user inputs.
    """
    if not 1 < p0 < nu:
        raise ValueError("need 1 < p0 < nu")
    if varsigma < 1:
        raise ValueError("varsigma must be >= 1")
    e = nu * (1 + 2 * nu / (nu - p0))
    return C * varsigma**e * P1p * max(1.0, S) ** (2 * nu**2 / (nu - p0))


def harnack_chain(varsigma: float, nu: float, p0: float, P1p: float, S: float, C: float = 1.0) -> float:
    """Harnack chaining constant, the ``exp`` of :func:`log_harnack_chain` (``inf`` on overflow)."""
    return _exp_or_inf(log_harnack_chain(varsigma, nu, p0, P1p, S, C))


def _space_form(n: int, kappa: float) -> ModelManifold:
    return ModelManifold.euclidean(n) if kappa == 0 else ModelManifold.hyperbolic(n, kappa)


@dataclass
class SobolevLocals:
    P_pp: float
    P_11: float
    S_1n: float
    S_pn: float

    def __iter__(self):
        return iter((self.P_pp, self.S_1n, self.S_pn))


def sobolev_local(n: int, p: float, kappa: float, R: float, vol_B_R: float,
                  c_n: float = 1.0, C_n: float = 1.0) -> SobolevLocals:
    """Poincare and Sobolev constants on ``B_R`` under ``Ric >= -(n-1) kappa^2``.

    ``P_pp = exp(c_n (1 + kappa R)/p)``,
    ``S_1n = C_n V(2R)/|B_R| (P_11 + V(3R)/(R v(R)))`` and
    ``S_pn = (S_1n p (n-1)/(n-p))^p`` with ``v, V`` the sphere area and ball
    volume of the space form of curvature ``-kappa^2``. The dimensional
    constants ``c_n, C_n`` are inputs (default 1).
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if not 0 < p < n:
        raise ValueError("need 0 < p < n")
    if not (R > 0 and vol_B_R > 0):
        raise ValueError("R and |B_R| must be positive")
    Mk = _space_form(n, kappa)
    V2, V3 = float(ball_volume(Mk, 2 * R)), float(ball_volume(Mk, 3 * R))
    vR = float(sphere_area(Mk, R))
    P_pp = math.exp(c_n * (1 + kappa * R) / p)
    P_11 = math.exp(c_n * (1 + kappa * R))
    S_1n = C_n * V2 / vol_B_R * (P_11 + V3 / (R * vR))
    S_pn = (S_1n * p * (n - 1) / (n - p)) ** p
    return SobolevLocals(P_pp, P_11, S_1n, S_pn)


# -- Moser iteration -------------------------------------------------------------


@dataclass
class IterationSchedule:
    """Decrements ``x_k = t_k - t_{k+1}``, ``k = 0..K``, of radii starting at ``t0``."""

    t0: float
    x: np.ndarray
    log_x: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.x.ndim != 1 or self.x.size == 0:
            raise ValueError("schedule needs at least one decrement")
        if self.log_x is None:
            if np.any(self.x <= 0):
                raise ValueError("decrements must be positive")
            self.log_x = np.log(self.x)
        else:
            self.log_x = np.asarray(self.log_x, dtype=float)
        total = math.fsum(self.x)
        if total > self.t0 * (1 + 1e-12):
            raise ValueError(f"decrements sum to {total} > t0 = {self.t0}")

    @property
    def K(self) -> int:
        return self.x.size - 1

    @property
    def radii(self) -> np.ndarray:
        """``t_0, ..., t_{K+1}`` from suffix sums (``t0 - cumsum`` cancels for deep schedules)."""
        left = max(self.t0 - math.fsum(self.x), 0.0)
        suffix = np.cumsum(self.x[::-1])[::-1]
        return np.concatenate([suffix + left, [left]])

    @classmethod
    def geometric(cls, t0: float, p: float, K: Optional[int] = None) -> "IterationSchedule":
        """``t_k = t0/p^k``, i.e. ``x_k = t0 (p-1)/p p^{-k}``; ``K`` defaults to :func:`default_truncation`."""
        if K is None:
            K = default_truncation(p)
        k = np.arange(K + 1)
        log_x = math.log(t0 * (p - 1) / p) - k * math.log(p)
        return cls(t0, np.exp(log_x), log_x)


def default_truncation(p: float, digits: float = 50.0) -> int:
    """``K`` with ``p^{-K} <= e^{-digits}``."""
    return int(math.ceil(digits / math.log(p)))


def log_schedule_product(schedule: IterationSchedule, p: float) -> float:
    """``sum_{k<=K} p^{-k} log x_k``, i.e. the log of ``prod x_k^{1/p^k}``."""
    w = np.power(p, -np.arange(schedule.K + 1, dtype=float))
    return math.fsum(w * schedule.log_x)


def iterate(schedule: IterationSchedule, C_hat: float, p: float, nu: float,
            tail_value: float = 1.0, log: bool = True) -> float:
    """Right-hand side of the truncated Moser iteration.

    ``C_hat^{sum_{k<=K} p^{-k}} (prod_k x_k^{p^{-k}})^{-(nu-p)/p} tail^{p^{-(K+1)}}``
    with ``tail_value`` standing for the norm at ``t_{K+1}``. Returned as a
    logarithm unless ``log=False``.
    """
    _check(p, nu)
    if C_hat <= 0 or tail_value <= 0:
        raise ValueError("C_hat and tail_value must be positive")
    radii = schedule.radii
    if np.any(radii[:-1] <= 0):
        raise ValueError("schedule exhausts t0 before the truncation index")
    K = schedule.K
    w = np.power(p, -np.arange(K + 1, dtype=float))
    val = math.fsum([
        math.fsum(w) * math.log(C_hat),
        -(nu - p) / p * log_schedule_product(schedule, p),
        p ** (-(K + 1)) * math.log(tail_value),
    ])
    return val if log else math.exp(val)


def geometric_closed_form(C_hat: float, p: float, nu: float, t: float) -> float:
    """Log of ``C_hat^{p/(p-1)} ((p-1)t/p)^{-(nu-p)/(p-1)} p^{(nu-p)/(p-1)^2}``."""
    _check(p, nu)
    return math.fsum([
        p / (p - 1) * math.log(C_hat),
        -(nu - p) / (p - 1) * math.log((p - 1) * t / p),
        (nu - p) / (p - 1) ** 2 * math.log(p),
    ])


def optimal_schedule(t0: float, p: float, K: Optional[int] = None) -> IterationSchedule:
    """Maximizer of ``prod x_k^{1/p^k}`` under ``sum x_k <= t0`` (infinite horizon).

    Stationarity of ``sum p^{-k} log x_k - lam sum x_k`` gives
    ``x_k = t0 (p-1)/p p^{-k}``, the geometric radii ``t_k = t0/p^k``.
    """
    if not (t0 > 0 and p > 1):
        raise ValueError("need t0 > 0 and p > 1")
    return IterationSchedule.geometric(t0, p, K)


def finite_optimal_schedule(t0: float, p: float, K: int) -> IterationSchedule:
    """Maximizer over ``K + 1`` decrements: ``x_k = t0 p^{-k} / sum_{j<=K} p^{-j}``."""
    k = np.arange(K + 1)
    lw = -k * math.log(p)
    log_x = math.log(t0) + lw - np.logaddexp.reduce(lw)
    return IterationSchedule(t0, np.exp(log_x), log_x)


def log_optimal_product(t0: float, p: float) -> float:
    """``log [((p-1) t0/p)^{p/(p-1)} p^{-p/(p-1)^2}]``, the supremum of ``sum p^{-k} log x_k``."""
    return p / (p - 1) * math.log((p - 1) * t0 / p) - p / (p - 1) ** 2 * math.log(p)


# -- the no-go certificate -------------------------------------------------------


@dataclass
class NogoReport:
    A: float
    B: float
    t0: float
    p0: float
    p0_conditions: Dict[str, float]
    p_grid: np.ndarray
    log_margins: np.ndarray

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.log_margins > 0))


def _nogo_T(B: float, t0: float):
    T = math.ceil(math.exp(B + 2) * t0)
    return T, T * math.exp(-(B + 2))


def nogo_conditions(A: float, B: float, t0: float) -> Dict[str, Callable[[float], bool]]:
    """Sufficient conditions for ``p0`` (with ``t0`` raised so ``e^{B+2} t0`` is an integer ``T``)."""
    T, t0p = _nogo_T(B, t0)
    rhs = (T + 1) * math.log(max(1.0, t0p)) - math.log(A)
    return {
        "(B+1) p^-T > B": lambda p: (B + 1) * p ** (-T) > B,
        "p^-T/(p-1) > (T+1) log max(1,t0) - log A": lambda p: p ** (-T) / (p - 1) > rhs,
    }


def _bisect_sup(pred, lo: float, hi: float, iters: int = 200) -> float:
    """Largest ``p`` in ``(lo, hi]`` with ``pred`` true, assuming it holds near ``lo``."""
    if pred(hi):
        return hi
    a, b = lo, hi
    for _ in range(iters):
        m = 0.5 * (a + b)
        if m in (a, b):
            break
        if pred(m):
            a = m
        else:
            b = m
    return a


def nogo_p0(A: float, B: float, t0: float, p_cap: float = 2.0) -> tuple:
    """``p0 = min`` over the two conditions of the largest ``p <= p_cap`` satisfying it."""
    if not (A > 0 and B >= 0 and t0 > 0):
        raise ValueError("need A > 0, B >= 0, t0 > 0")
    conds = nogo_conditions(A, B, t0)
    sups = {name: _bisect_sup(c, 1.0, p_cap) for name, c in conds.items()}
    for name, s in sups.items():
        if s <= 1.0:
            raise ValueError(f"condition {name!r} fails arbitrarily close to p = 1")
    return min(sups.values()), sups


def nogo_certificate(A: float, B: float, t0: float, p_grid: Optional[Sequence[float]] = None,
                     num: int = 6) -> NogoReport:
    """Check ``prod x_k^{1/p^k} < A e^{-B/(p-1)}`` for the best schedule on ``(1, p0]``.

    The log-margin is ``log A - B/(p-1) - log_optimal_product(t0, p)``; since
    the optimum dominates every schedule, a positive margin certifies all of
    them. Grid points above ``p0`` are rejected naming the failed condition.
    """
    p0, sups = nogo_p0(A, B, t0)
    if p_grid is None:
        p_grid = 1.0 + (p0 - 1.0) * np.arange(1, num + 1) / num
    grid = np.asarray(p_grid, dtype=float)
    if np.any(grid <= 1):
        raise ValueError("grid points must exceed 1")
    conds = nogo_conditions(A, B, t0)
    for p in grid:
        if p > p0:
            failed = [name for name, c in conds.items() if not c(p)]
            raise ValueError(f"p = {p} exceeds p0 = {p0:.12g}: condition {failed[0] if failed else '?'} fails")
    margins = np.array([math.log(A) - B / (p - 1) - log_optimal_product(t0, p) for p in grid])
    return NogoReport(A, B, t0, p0, sups, grid, margins)


@dataclass
class ScheduleSearch:
    trials: int
    K: int
    best_log_product: float
    optimum: float

    @property
    def margin(self) -> float:
        return self.optimum - self.best_log_product


def random_schedule_search(t0: float, p: float, trials: int = 1000, K: int = 64,
                           seed: int = 0) -> ScheduleSearch:
    """Dirichlet-distributed decrements summing to ``t0`` against the ``K``-step optimum."""
    rng = np.random.default_rng(seed)
    w = np.power(p, -np.arange(K + 1, dtype=float))
    best = -math.inf
    for _ in range(trials):
        x = t0 * rng.dirichlet(np.ones(K + 1))
        best = max(best, math.fsum(w * np.log(x)))
    opt = log_schedule_product(finite_optimal_schedule(t0, p, K), p)
    return ScheduleSearch(trials, K, best, opt)


# -- blow-up classification ------------------------------------------------------


LOG_CONSTANTS: Dict[str, Callable] = {
    "cbar": log_cbar,
    "c_harnack": log_c_harnack,
    "chat": log_chat,
    "c_unstable": log_c_unstable,
}


def nogo_target(A: float = 1.0, B: float = 1.0):
    """Log of ``A e^{-B/(p-1)}`` in the evaluator signature."""
    return lambda p, nu=None, S=None: math.log(A) - B / (p - 1)


@dataclass
class Classification:
    label: str
    slope_log: float
    slope_inv: float
    degree: Optional[float] = None


def default_blowup_grid(num: int = 9, smallest: float = 1e-4, largest: float = 0.5) -> np.ndarray:
    return 1.0 + np.geomspace(largest, smallest, num)


def classify_blowup(constant: Union[str, Callable], p_grid=None, nu: float = 3.0, S: float = 1.0,
                    tol: float = 0.05) -> Classification:
    """Growth of a constant as ``p -> 1``.

    Uses the local slopes of ``log C`` against ``log 1/(p-1)`` and against
    ``1/(p-1)`` at the small-``(p-1)`` end. ``bounded`` if the first is
    below ``tol``; ``exponential`` if the second is stable between the
    last two grid intervals; ``polynomial`` otherwise, with the first slope
    as degree.
    """
    fn = LOG_CONSTANTS[constant] if isinstance(constant, str) else constant
    grid = default_blowup_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    if grid.size < 6:
        raise ValueError("need at least 6 grid points")
    if np.any(grid <= 1) or np.any(grid > 1.5):
        raise ValueError("grid must lie in (1, 1.5]")
    grid = np.sort(grid)[::-1]
    vals = np.array([fn(float(p), nu, S) for p in grid])
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite constant on the grid")
    x = np.log(1.0 / (grid - 1.0))
    y = 1.0 / (grid - 1.0)
    s_log = np.diff(vals) / np.diff(x)
    s_inv = np.diff(vals) / np.diff(y)
    d = float(s_log[-1])
    e, e_prev = float(s_inv[-1]), float(s_inv[-2])
    if abs(d) < tol:
        return Classification("bounded", d, e)
    if abs(e - e_prev) <= 0.1 * abs(e):
        return Classification("exponential", d, e)
    return Classification("polynomial", d, e, degree=d)


# -- report ----------------------------------------------------------------------


@dataclass
class ConstantsReport:
    p_grid: np.ndarray
    nu: float
    S: float
    values: Dict[str, np.ndarray] = field(default_factory=dict)
    classification: Dict[str, Classification] = field(default_factory=dict)

    def rows(self) -> List[tuple]:
        out = []
        for cid, vals in self.values.items():
            label = self.classification[cid].label if cid in self.classification else ""
            for p, v in zip(self.p_grid.tolist(), vals.tolist()):
                out.append((p, cid, v, label))
        return out

    def summary(self) -> str:
        lines = [f"nu = {self.nu:g}, S = {self.S:g}", f"{'constant':<12} {'class':<12} {'slope':>10}"]
        for cid, c in self.classification.items():
            lines.append(f"{cid:<12} {c.label:<12} {c.slope_log:>10.4f}")
        return "\n".join(lines)


def constants_report(nu: float = 3.0, S: float = 1.0, p_grid=None) -> ConstantsReport:
    grid = default_blowup_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    rep = ConstantsReport(grid, nu, S)
    for cid, fn in LOG_CONSTANTS.items():
        rep.values[cid] = np.array([math.exp(fn(float(p), nu, S)) for p in grid])
        rep.classification[cid] = classify_blowup(fn, grid, nu, S)
    return rep
