"""Radial p-Green kernels on model manifolds.

On a model the minimal Green kernel of ``Delta_p`` with pole at the origin is

    G_p(r) = int_r^{R0} v_h(s)^{-1/(p-1)} ds,

and everything here is a one-dimensional quadrature of that integrand. All
integrals are carried in log-space: for ``p`` close to 1 the integrand is a
huge power of ``1/v_h`` and would overflow otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .geometry import DomainError, ModelManifold, QuadratureError, quad, sphere_constant

POINTS_PER_DECADE = 64


class ParabolicError(ValueError):
    """The model is p-parabolic: no Green kernel with ``R0 = inf`` exists."""


def _check_p(M: ModelManifold, p: float):
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if p > M.n:
        raise ValueError(f"p = {p} > n = {M.n}: kernels are only built for 1 < p <= n")


def is_parabolic(M: ModelManifold, p: float) -> bool:
    """Whether ``int^inf v_h^{-1/(p-1)}`` diverges, decided from the growth exponent.

    With ``v_h ~ r^{b-1}`` the tail integrand is ``r^{-(b-1)/(p-1)}``, which is
    integrable iff ``b > p``. Exponential growth (hyperbolic) is never parabolic.
    """
    b = M.growth_exponent
    if b is None:
        raise DomainError(f"{M.label} has finite radius; use a finite R0")
    return not b > p


def _phi(M, p, s):
    return -M.log_sphere_area(s) / (p - 1.0)


def log_radial_integral(M: ModelManifold, p: float, a: float, b: float) -> float:
    """``log int_a^b v_h(s)^{-1/(p-1)} ds`` for ``0 < a < b <= inf``."""
    if not 0 < a < b:
        if a == b:
            return -math.inf
        raise DomainError(f"need 0 < a < b, got a={a}, b={b}")
    tol = M.quadrature_tol
    if math.isinf(b):
        if is_parabolic(M, p):
            raise ParabolicError(f"{M.label} is {p}-parabolic")
        phia = _phi(M, p, a)

        def g(u):
            if u <= 0.0:
                return 0.0
            s = a / u
            return math.exp(_phi(M, p, s) - phia) * a / (u * u)

        edges = [0.0, 0.5, 0.9, 0.99, 1.0]
        val = math.fsum(quad(g, lo, hi, tol) for lo, hi in zip(edges[:-1], edges[1:]))
        if not val > 0:
            raise QuadratureError("tail integral vanished numerically")
        return phia + math.log(val)
    if b > M.r_max:
        raise DomainError(f"upper limit {b} beyond r_max={M.r_max}")
    # geometric panels so that fast decay near `a` is resolved when p ~ 1
    k = max(2, int(math.ceil(8 * math.log10(b / a))) + 1)
    edges = list(np.geomspace(a, b, k))
    edges[0], edges[-1] = a, b
    bps = [x for x in M.breakpoints() if a < x < b]
    edges = sorted(set(edges + bps))
    shift = max(_phi(M, p, a), _phi(M, p, b) if b < M.r_max else _phi(M, p, a))
    f = lambda s: math.exp(_phi(M, p, s) - shift)
    val = math.fsum(quad(f, lo, hi, tol) for lo, hi in zip(edges[:-1], edges[1:]))
    if not val > 0:
        raise QuadratureError("radial integral vanished numerically")
    return shift + math.log(val)


def mu(n: int, p: float, r):
    """Model kernel ``mu(r)`` giving the pole behaviour of any p-Green kernel.

    ``omega^{-1/(p-1)} (p-1)/(n-p) r^{-(n-p)/(p-1)}`` for ``p < n`` and
    ``omega^{-1/(n-1)} (-log r)`` for ``p = n``.
    """
    if not 1 < p <= n:
        raise ValueError(f"mu needs 1 < p <= n, got p={p}, n={n}")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("mu needs r > 0")
    w = sphere_constant(n)
    if p < n:
        out = w ** (-1.0 / (p - 1)) * (p - 1) / (n - p) * r ** (-(n - p) / (p - 1))
    else:
        out = w ** (-1.0 / (n - 1)) * (-np.log(r))
    return out if out.ndim else float(out)


def mu_derivatives(n: int, p: float, r):
    """``(mu'(r), mu''(r))``."""
    r = np.asarray(r, dtype=float)
    w = sphere_constant(n)
    if p < n:
        k = (n - p) / (p - 1)
        A = w ** (-1.0 / (p - 1)) * (p - 1) / (n - p)
        return -k * A * r ** (-k - 1), k * (k + 1) * A * r ** (-k - 2)
    A = w ** (-1.0 / (n - 1))
    return -A / r, A / r**2


@dataclass
class RadialKernel:
    """Sampled radial Green kernel; ``value`` and friends evaluate it exactly."""

    M: ModelManifold
    p: float
    R0: float
    r: np.ndarray
    log_G: np.ndarray
    parabolic: bool = False

    @property
    def G(self):
        return np.exp(self.log_G)

    @property
    def dG(self):
        return self.derivative(self.r) if self.r.size else self.r

    @property
    def w(self):
        """Moser transform ``(1-p) log G`` at the samples."""
        return (1.0 - self.p) * self.log_G

    def _require(self):
        if self.parabolic:
            raise ParabolicError(f"{self.M.label} is {self.p}-parabolic; no kernel with R0=inf")

    def log_value(self, r):
        self._require()
        r = np.asarray(r, dtype=float)
        self.M.check_radius(r, allow_rmax=True)
        if np.any(r > self.R0):
            raise DomainError(f"radius beyond R0={self.R0}")
        out = np.array([log_radial_integral(self.M, self.p, float(x), self.R0)
                        for x in r.ravel()]).reshape(r.shape)
        return out if out.ndim else float(out)

    def value(self, r):
        return np.exp(self.log_value(r))

    def derivative(self, r):
        """``G'(r) = -v_h(r)^{-1/(p-1)}``."""
        r = np.asarray(r, dtype=float)
        return -np.exp(-self.M.log_sphere_area(r) / (self.p - 1))

    def second_derivative(self, r):
        """``G''(r) = H(r) v_h^{-1/(p-1)} / (p-1)`` with ``H = v_h'/v_h``."""
        r = np.asarray(r, dtype=float)
        H = (self.M.n - 1) * self.M.dh(r) / self.M.h(r)
        return H * np.exp(-self.M.log_sphere_area(r) / (self.p - 1)) / (self.p - 1)

    def level_radius(self, level: float) -> float:
        """Radius ``r`` with ``G(r) = level`` (monotone cubic guess, Newton polish)."""
        self._require()
        if not level > 0:
            raise DomainError("level must be positive")
        finite = np.isfinite(self.log_G)
        x = -self.log_G[finite]
        y = np.log(self.r[finite])
        t = -math.log(level)
        if not x[0] <= t <= x[-1]:
            return self._level_radius_outside(level, t < x[0])
        lr = float(PchipInterpolator(x, y)(t))
        lo, hi = y[0], y[-1]
        for _ in range(30):
            r = math.exp(lr)
            lg = self.log_value(r)
            # d log G / d log r = r G'(r) / G(r)
            slope = -r * math.exp(-self.M.log_sphere_area(r) / (self.p - 1) - lg)
            step = (lg - math.log(level)) / slope
            lr = min(max(lr - step, lo), hi)
            if abs(step) < 1e-14:
                break
        return math.exp(lr)


    def _level_radius_outside(self, level: float, toward_pole: bool) -> float:
        """Bracket and solve ``log G(r) = log level`` beyond the sampled radii."""
        target = math.log(level)
        f = lambda lr: self.log_value(math.exp(lr)) - target
        if toward_pole:
            hi = math.log(self.r[0])
            lo = hi
            while f(lo) < 0:
                hi, lo = lo, lo - math.log(10.0)
                if lo < math.log(1e-300):
                    raise DomainError(f"level {level} exceeds the kernel's value at the pole")
        else:
            lo = math.log(self.r[np.isfinite(self.log_G)][-1])
            top = min(self.R0, self.M.r_max)
            if math.isinf(top):
                top = 1e300
            hi = lo
            while f(hi) > 0:
                lo, hi = hi, min(hi + math.log(10.0), math.log(top))
                if hi == math.log(top) and f(hi) > 0:
                    raise DomainError(f"level {level} below the kernel's range")
        return math.exp(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _log_grid(lo: float, hi: float, per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    k0 = math.ceil(per_decade * math.log10(lo) - 1e-9)
    k1 = math.floor(per_decade * math.log10(hi) + 1e-9)
    return 10.0 ** (np.arange(k0, k1 + 1) / per_decade)


def green_radial(M: ModelManifold, p: float, R0: float = math.inf, r_min: float = 1e-4,
                 r_hi: float | None = None, per_decade: int = POINTS_PER_DECADE) -> RadialKernel:
    """Sample ``G_p`` on a log-spaced grid of ``[r_min, min(R0, r_hi)]``.

    With ``R0 = inf`` on a p-parabolic model the returned kernel has
    ``parabolic=True`` and no samples.
    """
    _check_p(M, p)
    if math.isinf(R0):
        if is_parabolic(M, p):
            return RadialKernel(M, p, R0, np.empty(0), np.empty(0), parabolic=True)
    elif not 0 < R0 <= M.r_max:
        raise DomainError(f"R0={R0} outside (0, {M.r_max}]")
    if r_hi is None:
        r_hi = R0 if math.isfinite(R0) else (1e3 if math.isinf(M.r_max) else M.r_max)
    r_hi = min(r_hi, R0)
    if not 0 < r_min < r_hi:
        raise DomainError(f"bad sampling range [{r_min}, {r_hi}]")
    r = _log_grid(r_min, r_hi, per_decade)
    r = r[r < r_hi]
    r = np.append(r, r_hi)
    panels = np.array([log_radial_integral(M, p, a, b) for a, b in zip(r[:-1], r[1:])])
    log_G = np.empty_like(r)
    log_G[-1] = -math.inf if r_hi == R0 else log_radial_integral(M, p, r_hi, R0)
    for i in range(r.size - 2, -1, -1):
        log_G[i] = np.logaddexp(log_G[i + 1], panels[i])
    return RadialKernel(M, p, R0, r, log_G)


def moser_core(M: ModelManifold, p: float, r: float, R0: float = math.inf) -> float:
    """``w_p(r) = (1-p) log G_p(r)``."""
    _check_p(M, p)
    if not r < R0:
        raise DomainError(f"r={r} >= R0={R0}: the kernel vanishes there")
    M.check_radius(r)
    return (1.0 - p) * log_radial_integral(M, p, r, R0)


def core_limit(M: ModelManifold, r: float, R0: float = math.inf) -> float:
    """``lim_{p->1} w_p(r) = log v_h(r)``, valid when ``h`` is non-decreasing on ``[r, R0]``.

    Uses ``(int_r^{R0} f^{1/(p-1)})^{p-1} -> sup_{[r,R0]} f`` with ``f = 1/v_h``.
    """
    M.check_radius(r)
    upper = min(R0, M.r_max)
    if not M.is_nondecreasing(r, upper):
        raise DomainError(
            f"h is not non-decreasing on [{r}, {upper}] for {M.label}; "
            "the supremum of 1/v_h is not attained at r"
        )
    return float(M.log_sphere_area(r))


def extrapolate_to_one(ps, values) -> float:
    """Extrapolate ``values(p)`` to ``p = 1``.

    The fit basis is ``1, x log x, x, x^2, ...`` in ``x = p - 1``: the
    Laplace expansion of ``(p-1) log int exp(-log v_h/(p-1))`` carries an
    ``x log x`` term, so plain polynomial Richardson stalls at ``O(x log x)``.
    """
    x = np.asarray(ps, dtype=float) - 1.0
    y = np.asarray(values, dtype=float)
    cols = [np.ones_like(x), x * np.log(x)]
    k = 1
    while len(cols) < x.size:
        cols.append(x**k)
        k += 1
    A = np.column_stack(cols)
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(coef[0])


def richardson_core(M: ModelManifold, r: float, ps=(1.2, 1.1, 1.05, 1.02),
                    R0: float = math.inf) -> float:
    """Extrapolated ``lim_{p->1} moser_core(M, p, r)`` from a few ``p`` values."""
    return extrapolate_to_one(ps, [moser_core(M, p, r, R0) for p in ps])


@dataclass
class PoleResiduals:
    r: np.ndarray
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray | None

    @property
    def max_value(self):
        return float(np.max(self.value))

    @property
    def max_gradient(self):
        return float(np.max(self.gradient))

    @property
    def max_hessian(self):
        return None if self.hessian is None else float(np.max(self.hessian))

    def maxima(self):
        return tuple(x for x in (self.max_value, self.max_gradient, self.max_hessian)
                     if x is not None)


def check_pole_asymptotics(kernel: RadialKernel, r_grid) -> PoleResiduals:
    """Relative deviations of ``G, G', G''`` from ``mu, mu', mu''`` on ``r_grid``."""
    kernel._require()
    r = np.asarray(r_grid, dtype=float)
    cap = min(0.1, kernel.R0 / 10.0)
    if np.any(r <= 0) or np.any(r >= cap):
        raise DomainError(f"pole grid must lie inside (0, {cap})")
    n, p = kernel.M.n, kernel.p
    m = mu(n, p, r)
    m1, m2 = mu_derivatives(n, p, r)
    res1 = np.abs(kernel.value(r) / m - 1.0)
    res2 = np.abs(kernel.derivative(r) / m1 - 1.0)
    res3 = np.abs(kernel.second_derivative(r) / m2 - 1.0) if p < n else None
    return PoleResiduals(r, res1, res2, res3)


def level_energy(kernel: RadialKernel, s: float, t: float) -> float:
    """``int_{G in [s,t]} |grad G|^p`` by quadrature over the radial shell.

    The shell between the level radii ``r_t < r_s`` contributes
    ``int |G'|^p v_h dr = int v_h^{1 - p/(p-1)} dr``.
    """
    if s == t:
        return 0.0
    if not 0 < s < t:
        raise DomainError("level_energy needs 0 < s < t")
    r_s = kernel.level_radius(s)
    r_t = kernel.level_radius(t)
    M, p = kernel.M, kernel.p
    q = p / (p - 1.0)
    shift = -q * M.log_sphere_area(r_t) + M.log_sphere_area(r_t)

    def f(x):
        lv = M.log_sphere_area(x)
        return math.exp(-q * lv + lv - shift)

    k = max(2, int(math.ceil(8 * math.log10(r_s / r_t))) + 1)
    edges = sorted(set(list(np.geomspace(r_t, r_s, k)[1:-1]) + [r_t, r_s]
                       + [x for x in M.breakpoints() if r_t < x < r_s]))
    val = math.fsum(quad(f, a, b, M.quadrature_tol) for a, b in zip(edges[:-1], edges[1:]))
    return math.exp(shift) * val


def decay_exponent(M: ModelManifold, p: float, r_window, num: int = 33) -> float:
    """Least-squares slope of ``log G_p`` against ``log r`` on ``r_window``.

    In a region where ``|B_r| ~ r^b`` the slope is ``-(b-p)/(p-1)``.
    """
    _check_p(M, p)
    b = M.growth_exponent
    if b is None or not p < b:
        raise ValueError(f"decay exponent needs p < b (p={p}, b={b})")
    lo, hi = r_window
    r = np.geomspace(lo, hi, num)
    lg = np.array([log_radial_integral(M, p, float(x), math.inf) for x in r])
    return float(np.polyfit(np.log(r), lg, 1)[0])
