"""Rotationally symmetric model manifolds.

A model ``M_h`` is ``[0, r_max) x S^{n-1}`` with metric ``dr^2 + h(r)^2 g_S``.
Everything radial on such a manifold reduces to one-dimensional quantities of
the warping function ``h``: the sphere area ``v_h = omega_{n-1} h^{n-1}``, the
ball volume (its primitive) and the sphere mean curvature ``(n-1) h'/h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln

KINDS = ("euclidean", "hyperbolic", "spherical", "power_tail", "table")


class DomainError(ValueError):
    """Radius (or other argument) outside the domain of an operation."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def sphere_constant(n: int) -> float:
    """Area of the unit sphere ``S^{n-1}`` in ``R^n``: ``2 pi^{n/2} / Gamma(n/2)``."""
    return float(np.exp(math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n)))


def quad(f, a, b, tol, points=None):
    """``scipy.integrate.quad`` with a relative tolerance and a hard failure."""
    kw = dict(epsabs=0.0, epsrel=tol, limit=500, full_output=1)
    if points is not None and np.isfinite(a) and np.isfinite(b):
        pts = [x for x in points if a < x < b]
        if pts:
            kw["points"] = pts
    val, err, info = integrate.quad(f, a, b, **kw)[:3]
    if not np.isfinite(val) or err > max(10.0 * tol * abs(val), 1e-300):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: value={val!r}, error estimate={err!r}"
        )
    return val


@dataclass(frozen=True)
class ModelManifold:
    """Warped product ``dr^2 + h(r)^2 g_{S^{n-1}}``.

    Build instances with the named constructors (:meth:`euclidean`,
    :meth:`hyperbolic`, :meth:`spherical`, :meth:`power_tail`,
    :meth:`from_table`) or :meth:`from_dict`.
    """

    n: int
    kind: str
    r_max: float = math.inf
    kappa: float = 1.0
    alpha: float = 1.0
    r0: float = 1.0
    samples: Optional[tuple] = None
    quadrature_tol: float = 1e-10
    _table: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("dimension n must be an integer >= 2")
        if not self.quadrature_tol > 0:
            raise ValueError("quadrature_tol must be positive")
        if self.kind == "spherical":
            if not self.r_max < math.pi / self.kappa:
                raise ValueError("spherical model requires r_max < pi/kappa (no cut locus)")
        if self.kind in ("hyperbolic", "spherical") and not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.kind == "power_tail":
            if not 0 < self.alpha <= 1:
                raise ValueError("power_tail needs 0 < alpha <= 1 (non-decreasing, h' <= 1)")
            if not self.r0 > 0:
                raise ValueError("power_tail needs r0 > 0")
        if self.kind == "table":
            if self.samples is None or len(self.samples) < 4:
                raise ValueError("table model needs at least 4 samples")
            arr = np.asarray(self.samples, dtype=float)
            r, h = arr[:, 0], arr[:, 1]
            if np.any(np.diff(r) <= 0):
                raise ValueError("table samples must be strictly increasing in r")
            if r[0] < 0 or np.any(h[r > 0] <= 0):
                raise ValueError("table samples need r >= 0 and h > 0 for r > 0")
            if r[0] > 0:
                r = np.concatenate([[0.0], r])
                h = np.concatenate([[0.0], h])
            if self.r_max > r[-1]:
                object.__setattr__(self, "r_max", float(r[-1]))
            dh = np.gradient(h, r, edge_order=2)
            object.__setattr__(
                self, "_table", (PchipInterpolator(r, h, extrapolate=False), r, dh)
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def euclidean(cls, n: int, r_max: float = math.inf, quadrature_tol: float = 1e-10):
        return cls(n=n, kind="euclidean", r_max=r_max, quadrature_tol=quadrature_tol)

    @classmethod
    def hyperbolic(cls, n: int, kappa: float = 1.0, r_max: float = math.inf,
                   quadrature_tol: float = 1e-10):
        return cls(n=n, kind="hyperbolic", kappa=kappa, r_max=r_max,
                   quadrature_tol=quadrature_tol)

    @classmethod
    def spherical(cls, n: int, kappa: float = 1.0, r_max: Optional[float] = None,
                  quadrature_tol: float = 1e-10):
        if r_max is None:
            r_max = 0.999 * math.pi / kappa
        return cls(n=n, kind="spherical", kappa=kappa, r_max=r_max,
                   quadrature_tol=quadrature_tol)

    @classmethod
    def power_tail(cls, n: int, alpha: float, r0: float = 1.0, r_max: float = math.inf,
                   quadrature_tol: float = 1e-10):
        """``h(r) = r`` on ``[0, r0/2]``, ``c r^alpha`` on ``[r0, inf)``.

        The blend on ``[r0/2, r0]`` has linear ``h'`` going from 1 to the tail
        slope, which fixes ``c`` and keeps ``h' <= 1`` everywhere.
        """
        return cls(n=n, kind="power_tail", alpha=alpha, r0=r0, r_max=r_max,
                   quadrature_tol=quadrature_tol)

    @classmethod
    def from_table(cls, n: int, samples: Sequence[Sequence[float]], quadrature_tol: float = 1e-10):
        s = tuple((float(a), float(b)) for a, b in samples)
        return cls(n=n, kind="table", samples=s, r_max=s[-1][0], quadrature_tol=quadrature_tol)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelManifold":
        kind = d["kind"]
        n = int(d["n"])
        tol = float(d.get("quadrature_tol", 1e-10))
        r_max = d.get("r_max", None)
        r_max = math.inf if r_max in (None, "inf", "infinity") else float(r_max)
        if kind == "euclidean":
            return cls.euclidean(n, r_max=r_max, quadrature_tol=tol)
        if kind == "hyperbolic":
            return cls.hyperbolic(n, float(d.get("kappa", 1.0)), r_max=r_max, quadrature_tol=tol)
        if kind == "spherical":
            kappa = float(d.get("kappa", 1.0))
            return cls.spherical(n, kappa, r_max=None if math.isinf(r_max) else r_max,
                                 quadrature_tol=tol)
        if kind == "power_tail":
            return cls.power_tail(n, float(d["alpha"]), float(d.get("r0", 1.0)), r_max=r_max,
                                  quadrature_tol=tol)
        if kind == "table":
            return cls.from_table(n, d["samples"], quadrature_tol=tol)
        raise ValueError(f"unknown model kind {kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "quadrature_tol": self.quadrature_tol,
             "r_max": None if math.isinf(self.r_max) else self.r_max}
        if self.kind in ("hyperbolic", "spherical"):
            d["kappa"] = self.kappa
        if self.kind == "power_tail":
            d.update(alpha=self.alpha, r0=self.r0)
        if self.kind == "table":
            d["samples"] = [list(s) for s in self.samples]
        return d

    @property
    def label(self) -> str:
        if self.kind == "euclidean":
            return f"euclidean(n={self.n})"
        if self.kind in ("hyperbolic", "spherical"):
            return f"{self.kind}(n={self.n},kappa={self.kappa:g})"
        if self.kind == "power_tail":
            return f"power_tail(n={self.n},alpha={self.alpha:g},r0={self.r0:g})"
        return f"table(n={self.n})"

    # -- warping function ---------------------------------------------------

    @property
    def omega(self) -> float:
        return sphere_constant(self.n)

    @property
    def _blend(self):
        """(a, L, d1, H, c) for the power-tail blend on [a, a+L]."""
        a = 0.5 * self.r0
        H = 3.0 * self.r0 / (4.0 - self.alpha)
        d1 = self.alpha * H / self.r0
        c = H / self.r0 ** self.alpha
        return a, a, d1, H, c

    @property
    def tail_constant(self) -> float:
        """``c`` in ``h(r) = c r^alpha`` for ``r >= r0`` (power-tail models)."""
        if self.kind != "power_tail":
            raise AttributeError("tail_constant only exists for power_tail models")
        return self._blend[4]

    @property
    def growth_exponent(self) -> Optional[float]:
        """``b`` with ``|B_r| ~ r^b`` as ``r -> inf``; ``inf`` for exponential growth.

        ``None`` when the model has a finite radius.
        """
        if math.isfinite(self.r_max):
            return None
        if self.kind == "euclidean":
            return float(self.n)
        if self.kind == "hyperbolic":
            return math.inf
        if self.kind == "power_tail":
            return 1.0 + self.alpha * (self.n - 1)
        return None

    def h(self, r):
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "euclidean":
            out = r.copy()
        elif k == "hyperbolic":
            out = np.sinh(self.kappa * r) / self.kappa
        elif k == "spherical":
            out = np.sin(self.kappa * r) / self.kappa
        elif k == "power_tail":
            a, L, d1, H, c = self._blend
            s = np.clip((r - a) / L, 0.0, 1.0)
            mid = a + L * (s + 0.5 * (d1 - 1.0) * s * s)
            with np.errstate(invalid="ignore", divide="ignore"):
                tail = c * np.power(np.maximum(r, self.r0), self.alpha)
            out = np.where(r <= a, r, np.where(r < self.r0, mid, tail))
        else:
            interp, rs, _ = self._table
            out = interp(np.clip(r, rs[0], rs[-1]))
        return out if out.ndim else float(out)

    def dh(self, r):
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "euclidean":
            out = np.ones_like(r)
        elif k == "hyperbolic":
            out = np.cosh(self.kappa * r)
        elif k == "spherical":
            out = np.cos(self.kappa * r)
        elif k == "power_tail":
            a, L, d1, H, c = self._blend
            s = np.clip((r - a) / L, 0.0, 1.0)
            mid = 1.0 + (d1 - 1.0) * s
            tail = self.alpha * c * np.power(np.maximum(r, self.r0), self.alpha - 1.0)
            out = np.where(r <= a, 1.0, np.where(r < self.r0, mid, tail))
        else:
            _, rs, dhs = self._table
            out = np.interp(r, rs, dhs)
        return out if out.ndim else float(out)

    def d2h(self, r):
        """Second derivative of ``h`` (closed forms; differences of ``h'`` for tables)."""
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "euclidean":
            out = np.zeros_like(r)
        elif k == "hyperbolic":
            out = self.kappa * np.sinh(self.kappa * r)
        elif k == "spherical":
            out = -self.kappa * np.sin(self.kappa * r)
        elif k == "power_tail":
            a, L, d1, H, c = self._blend
            tail = self.alpha * (self.alpha - 1.0) * c * np.power(np.maximum(r, self.r0),
                                                                  self.alpha - 2.0)
            out = np.where(r <= a, 0.0, np.where(r < self.r0, (d1 - 1.0) / L, tail))
        else:
            _, rs, dhs = self._table
            out = np.interp(r, rs, np.gradient(dhs, rs, edge_order=2))
        return out if out.ndim else float(out)

    def log_h(self, r):
        """``log h(r)``, stable for large arguments of the hyperbolic model."""
        r = np.asarray(r, dtype=float)
        if self.kind == "hyperbolic":
            x = self.kappa * r
            out = x + np.log(-np.expm1(-2.0 * x)) - math.log(2.0 * self.kappa)
            return out if out.ndim else float(out)
        out = np.log(self.h(r))
        return out if np.ndim(out) else float(out)

    def log_sphere_area(self, r):
        return math.log(self.omega) + (self.n - 1) * self.log_h(r)

    def check_radius(self, r, allow_rmax: bool = False):
        r = np.asarray(r, dtype=float)
        bad = (r <= 0) | ((r > self.r_max) if allow_rmax else (r >= self.r_max)) | ~np.isfinite(r)
        if np.any(bad):
            raise DomainError(
                f"radius {r[bad].ravel()[0]!r} outside (0, {self.r_max}) for {self.label}"
            )

    def is_nondecreasing(self, a: float, b: float, num: int = 2001) -> bool:
        """``h' >= 0`` on ``[a, b]`` (sampled; exact for the closed forms used here)."""
        if self.kind == "euclidean" or self.kind == "hyperbolic":
            return True
        if self.kind == "power_tail":
            return True
        if self.kind == "spherical":
            return b <= 0.5 * math.pi / self.kappa
        b = min(b, self.r_max)
        if not math.isfinite(b):
            return False
        return bool(np.all(self.dh(np.linspace(a, b, num)) >= 0))

    def breakpoints(self):
        if self.kind == "power_tail":
            return (0.5 * self.r0, self.r0)
        if self.kind == "table":
            return tuple(self._table[1][1:-1])
        return ()


# -- geometric quantities ------------------------------------------------------


def sphere_area(M: ModelManifold, r):
    """Area ``v_h(r) = omega_{n-1} h(r)^{n-1}`` of the geodesic sphere of radius ``r``."""
    M.check_radius(r)
    return M.omega * np.power(M.h(r), M.n - 1)


def mean_curvature_sphere(M: ModelManifold, r):
    """Mean curvature ``(n-1) h'(r)/h(r)`` of the geodesic sphere of radius ``r``."""
    M.check_radius(r)
    return (M.n - 1) * M.dh(r) / M.h(r)


def _ball_volume_scalar(M: ModelManifold, r: float) -> float:
    f = lambda s: M.omega * M.h(s) ** (M.n - 1)
    pts = [x for x in M.breakpoints() if 0 < x < r]
    edges = [0.0] + pts + [r]
    # split geometrically so the adaptive rule sees the small-r behaviour
    if r > 1.0:
        extra = list(np.geomspace(1.0, r, int(math.log10(r)) + 2)[:-1])
        edges = sorted(set(edges + [x for x in extra if 0 < x < r]))
    return math.fsum(quad(f, lo, hi, M.quadrature_tol) for lo, hi in zip(edges[:-1], edges[1:]))


def ball_volume(M: ModelManifold, r):
    """Volume ``int_0^r v_h(s) ds`` of the geodesic ball of radius ``r``."""
    M.check_radius(r, allow_rmax=math.isfinite(M.r_max))
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        return _ball_volume_scalar(M, float(r))
    return np.array([_ball_volume_scalar(M, float(x)) for x in r.ravel()]).reshape(r.shape)


@dataclass
class GeometryDiagnostics:
    doubling_constant: float
    doubling_dimension: float
    reverse_doubling_exponent: float
    reverse_doubling_constant: float
    isoperimetric_constant: float
    radius_grid: np.ndarray
    volumes: np.ndarray
    isoperimetric_ratios: np.ndarray

    @property
    def C_D(self):
        return self.doubling_constant

    @property
    def nu(self):
        return self.doubling_dimension

    @property
    def b(self):
        return self.reverse_doubling_exponent

    @property
    def C_R(self):
        return self.reverse_doubling_constant

    @property
    def c_I(self):
        return self.isoperimetric_constant

    def reverse_doubling_holds(self, b: float, C_R: float) -> bool:
        """Check ``|B_t|/|B_s| >= C_R (t/s)^b`` on every grid pair ``t >= s``."""
        t = self.radius_grid
        V = self.volumes
        lhs = np.log(V)[:, None] - np.log(V)[None, :]
        rhs = math.log(C_R) + b * (np.log(t)[:, None] - np.log(t)[None, :])
        mask = t[:, None] >= t[None, :]
        return bool(np.all(lhs[mask] >= rhs[mask] - 1e-12))


def diagnostics(M: ModelManifold, radius_grid) -> GeometryDiagnostics:
    """Doubling, reverse-doubling and isoperimetric constants of balls about the pole.

    ``C_D`` is the largest ``|B_2r|/|B_r|`` over the grid (radii with ``2r``
    outside the model are skipped), ``b`` the least-squares slope of
    ``log|B_t|`` against ``log t`` and ``C_R`` the worst pair ratio
    ``(|B_t|/|B_s|) (s/t)^b``. ``c_I`` is the infimum over the grid of
    ``P(B_r) / |B_r|^{(n-1)/n}``.
    """
    t = np.asarray(radius_grid, dtype=float)
    if t.ndim != 1 or t.size < 8:
        raise ValueError("radius grid needs at least 8 points")
    if np.any(np.diff(t) <= 0):
        raise ValueError("radius grid must be strictly increasing")
    M.check_radius(t)
    V = ball_volume(M, t)
    inside = 2 * t < M.r_max if math.isfinite(M.r_max) else np.ones_like(t, dtype=bool)
    if not np.any(inside):
        raise ValueError("no grid radius r with 2r inside the model")
    V2 = ball_volume(M, 2 * t[inside])
    C_D = float(np.max(V2 / V[inside]))
    lt, lV = np.log(t), np.log(V)
    b = float(np.polyfit(lt, lV, 1)[0])
    ratio = (lV[:, None] - lV[None, :]) - b * (lt[:, None] - lt[None, :])
    mask = t[:, None] >= t[None, :]
    C_R = float(np.exp(np.min(ratio[mask])))
    P = sphere_area(M, t)
    iso = P / V ** ((M.n - 1) / M.n)
    return GeometryDiagnostics(
        doubling_constant=C_D,
        doubling_dimension=math.log2(C_D),
        reverse_doubling_exponent=b,
        reverse_doubling_constant=C_R,
        isoperimetric_constant=float(np.min(iso)),
        radius_grid=t,
        volumes=V,
        isoperimetric_ratios=iso,
    )


def ricci_nonnegative(M: ModelManifold, r_grid) -> bool:
    """Sampled check of ``Ric >= 0`` on a model: ``h'' <= 0`` and ``|h'| <= 1``."""
    r = np.asarray(r_grid, dtype=float)
    tol = 1e-12
    radial = np.all(M.d2h(r) <= tol)
    tangential = True if M.n == 2 else np.all(np.abs(M.dh(r)) <= 1 + tol)
    return bool(radial and tangential)
