"""p-capacities of radial condensers and the Sobolev route to inf-decay."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import gamma

from .geometry import DomainError, ModelManifold, ball_volume
from .kernel import ParabolicError, green_radial, is_parabolic, log_radial_integral


class ParabolicWarning(UserWarning):
    pass


def cap_radial(M: ModelManifold, p: float, s: float, R: float) -> float:
    """``cap_p(B_s, B_R) = (int_s^R v_h^{-1/(p-1)})^{1-p}``.

    Returns 0 (with a :class:`ParabolicWarning`) for ``R = inf`` on a
    p-parabolic model.
    """
    if not p > 1:
        raise ValueError("p must be > 1")
    if not 0 < s < R:
        raise DomainError(f"need 0 < s < R, got s={s}, R={R}")
    if R > M.r_max:
        raise DomainError(f"R={R} beyond r_max={M.r_max}")
    if math.isinf(R) and is_parabolic(M, p):
        warnings.warn(f"{M.label} is {p}-parabolic: capacity to infinity is 0", ParabolicWarning)
        return 0.0
    return math.exp((1.0 - p) * log_radial_integral(M, p, s, R))


@dataclass
class CapLevelCheck:
    lhs: float
    rhs: float
    rel_err: float


def verify_cap_level(M: ModelManifold, p: float, R0: float, level: float,
                     kernel=None) -> CapLevelCheck:
    """Compare ``cap_p({G >= level}, B_R0)`` with ``level^{1-p}``."""
    if kernel is None:
        kernel = green_radial(M, p, R0)
    if kernel.parabolic:
        raise ParabolicError(f"{M.label} is {p}-parabolic")
    r_l = kernel.level_radius(level)
    lhs = cap_radial(M, p, r_l, R0)
    rhs = level ** (1.0 - p)
    return CapLevelCheck(lhs, rhs, abs(lhs - rhs) / rhs)


EtaLike = Union[float, Callable[[float], float]]


@dataclass
class CapacitySpec:
    """Parameters of a weighted Sobolev inequality with weight ``eta``.

    ``eta`` is a positive non-decreasing function (or a constant).
    """

    p: float
    nu: float
    S: float
    eta: EtaLike = 1.0
    inner: Optional[object] = None
    outer: Optional[object] = None

    def __post_init__(self):
        if not 1 < self.p < self.nu:
            raise ValueError(f"need 1 < p < nu, got p={self.p}, nu={self.nu}")
        if self.S < 0:
            raise ValueError("Sobolev constant must be non-negative")

    def eta_at(self, t: float) -> float:
        e = self.eta(t) if callable(self.eta) else float(self.eta)
        if not e > 0:
            raise ValueError("eta must be positive")
        return e

    def check_eta_monotone(self, grid) -> bool:
        vals = np.array([self.eta_at(float(t)) for t in grid])
        return bool(np.all(np.diff(vals) >= -1e-12 * np.abs(vals[1:])))


def eta_from_model(M: ModelManifold, nu: float, r_min: float = 1e-3,
                   r_max: Optional[float] = None, num: int = 400) -> Callable[[float], float]:
    """``eta(r) = sup_{s <= r} s^nu / |B_s|`` tabulated on a log grid.

    Below ``r_min`` the ratio is taken constant (on models ``|B_s| ~ omega s^n / n``).
    """
    if r_max is None:
        r_max = 1e3 if math.isinf(M.r_max) else M.r_max
    s = np.geomspace(r_min, r_max, num)
    ratio = s**nu / ball_volume(M, s)
    env = np.maximum.accumulate(ratio)
    ls = np.log(s)

    def eta(t: float) -> float:
        if t <= r_min:
            return float(env[0])
        if t >= r_max:
            raise DomainError(f"eta table ends at {r_max}")
        return float(np.interp(math.log(t), ls, env))

    return eta


def cap_lower_bound_sobolev(spec: CapacitySpec, t: float, ball_volume_at_t: float) -> float:
    """``S^{-1} eta(t)^{-p/nu} |B_t|^{(nu-p)/nu}``."""
    p, nu = spec.p, spec.nu
    return spec.eta_at(t) ** (-p / nu) * ball_volume_at_t ** ((nu - p) / nu) / spec.S


def chat_inf(p: float, nu: float, S: float) -> float:
    """``S^{nu/p} 2^{(nu+2p)(nu-p)/p}``, bounded as ``p -> 1`` for bounded ``S``."""
    return S ** (nu / p) * 2.0 ** ((nu + 2 * p) * (nu - p) / p)


def inf_decay_bound(spec: CapacitySpec, t: float) -> float:
    """Upper bound for ``inf_{dB_t} G``: ``(Chat eta(2t))^{1/(p-1)} t^{-(nu-p)/(p-1)}``."""
    if not t > 0:
        raise DomainError("t must be positive")
    p, nu = spec.p, spec.nu
    c = chat_inf(p, nu, spec.S)
    log_b = (math.log(c) + math.log(spec.eta_at(2 * t))) / (p - 1) - (nu - p) / (p - 1) * math.log(t)
    return math.exp(log_b)


def sharp_sobolev_constant(n: int, p: float) -> float:
    """Best ``S`` in ``||psi||_{np/(n-p)}^p <= S ||grad psi||_p^p`` on ``R^n`` (Aubin-Talenti)."""
    if not 1 < p < n:
        raise ValueError("need 1 < p < n")
    K = (
        math.pi ** -0.5
        * n ** (-1.0 / p)
        * ((p - 1) / (n - p)) ** (1 - 1.0 / p)
        * (gamma(1 + n / 2) * gamma(n) / (gamma(n / p) * gamma(1 + n - n / p))) ** (1.0 / n)
    )
    return K**p


def cap_variational(mesh, p: float, config=None, inner: str = "inner", outer: str = "outer"):
    """Discrete p-capacity of the condenser ``(inner, outer)`` on a 2D mesh.

    Minimizes the regularized p-Dirichlet energy with the potential pinned to
    1 on ``inner`` and 0 on ``outer`` and returns the un-regularized energy
    of the minimizer.
    """
    from .fem.energy import energy
    from .fem.solver import solve_capacitor

    if inner == outer:
        raise ValueError("inner and outer tags must differ")
    field = solve_capacitor(mesh, p, config, inner=inner, outer=outer)
    return energy(mesh, p, 0.0, field.values, gradient=False)
