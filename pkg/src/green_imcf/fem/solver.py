"""p-capacitor potentials, the Moser transform and the continuation ``p -> 1``.

The discrete problem minimizes the regularized p-Dirichlet energy over P1
fields equal to 1 on the ``inner`` boundary and 0 on the ``outer`` boundary.
Each regularization level ``eps`` is solved by damped Newton with Armijo
backtracking. Close to ``p = 1`` the potential spans many orders of
magnitude, so the final solve is carried out in the variable ``log v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .energy import energy, energy_hessian
from .mesh import Mesh, MeshError

EPS_MACH = np.finfo(float).eps


class SolverError(RuntimeError):
    """Newton iteration failed; ``residual`` holds the last residual norm."""

    def __init__(self, msg: str, residual: float = math.nan, partial=None):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual
        self.partial = partial


@dataclass
class ScalarField:
    """Nodal values on a mesh plus free-form metadata."""

    values: np.ndarray
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def __len__(self):
        return len(self.values)


@dataclass
class SolverConfig:
    """Parameters of the regularized Newton solver.

    ``log_polish_below``: for ``p`` below this value the last solve is done
    at ``eps = 0`` in the variable ``log v`` (set to 1 to disable).
    """

    eps_schedule: Sequence[float] = (1e-1, 1e-2, 1e-4, 1e-6, 1e-8)
    newton_tol: float = 1e-10
    max_iters: int = 100
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-10
    log_polish_below: float = 1.3
    log_polish_tol: float = 1e-10

    def __post_init__(self):
        self.eps_schedule = tuple(float(e) for e in self.eps_schedule)
        if not self.eps_schedule or min(self.eps_schedule) <= 0:
            raise ValueError("eps_schedule must be non-empty with positive entries")
        if any(b >= a for a, b in zip(self.eps_schedule, self.eps_schedule[1:])):
            raise ValueError("eps_schedule must be strictly decreasing")
        if self.newton_tol <= 0 or self.log_polish_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.armijo_c < 0.5 or not 0 < self.backtrack < 1:
            raise ValueError("invalid line-search parameters")

    @property
    def eps_final(self) -> float:
        return self.eps_schedule[-1]


@dataclass
class ContinuationSchedule:
    p_sequence: Sequence[float] = (1.5, 1.3, 1.2, 1.1, 1.05, 1.02)
    warm_start: bool = True

    def __post_init__(self):
        self.p_sequence = tuple(float(p) for p in self.p_sequence)
        if len(self.p_sequence) < 2:
            raise ValueError("continuation needs at least two values of p")
        if min(self.p_sequence) <= 1:
            raise ValueError("all p must exceed 1")
        if any(b >= a for a, b in zip(self.p_sequence, self.p_sequence[1:])):
            raise ValueError("p_sequence must be strictly decreasing")


@dataclass
class Constraints:
    fixed: np.ndarray
    free: np.ndarray
    values: np.ndarray  # full-length vector carrying the boundary data


def capacitor_constraints(mesh: Mesh, inner: str = "inner", outer: str = "outer") -> Constraints:
    if inner == outer:
        raise ValueError("inner and outer tags must differ")
    a, b = mesh.tagged_nodes(inner), mesh.tagged_nodes(outer)
    if len(a) == 0 or len(b) == 0:
        missing = inner if len(a) == 0 else outer
        raise MeshError(f"mesh has no boundary edges tagged {missing!r}")
    if np.intersect1d(a, b).size:
        raise MeshError("a vertex carries both the inner and the outer tag")
    vals = np.zeros(mesh.nv)
    vals[a] = 1.0
    fixed = np.union1d(a, b)
    free = np.setdiff1d(np.arange(mesh.nv), fixed)
    return Constraints(fixed, free, vals)


def _harmonic_guess(mesh: Mesh, con: Constraints) -> np.ndarray:
    _, _, H = energy_hessian(mesh, 2.0, 0.0, con.values)
    v = con.values.copy()
    Hf = H[con.free][:, con.free].tocsc()
    v[con.free] = spsolve(Hf, -(H[con.free] @ con.values))
    return v


def _newton_stage(mesh, p, eps, v, con, cfg, history):
    f = con.free
    E, g, H = energy_hessian(mesh, p, eps, v)
    res = float(np.max(np.abs(g[f]))) if f.size else 0.0
    for it in range(cfg.max_iters):
        if res <= cfg.newton_tol:
            return v, res, it
        gf = g[f]
        d = None
        try:
            d = spsolve(H[f][:, f].tocsc(), -gf)
        except RuntimeError:
            d = None
        if d is None or not np.all(np.isfinite(d)) or d @ gf >= 0:
            d = -gf  # Hessian model not positive definite: steepest descent
        slope = float(d @ gf)
        slack = 4 * EPS_MACH * abs(E)
        alpha = 1.0
        while True:
            w = v.copy()
            w[f] += alpha * d
            Ew = energy(mesh, p, eps, w, gradient=False)
            if Ew <= E + cfg.armijo_c * alpha * slope + slack:
                break
            alpha *= cfg.backtrack
            if alpha < cfg.min_step:
                raise SolverError(f"line search failed at p={p}, eps={eps:g}", res)
        history.append(Ew)
        v = w
        E, g, H = energy_hessian(mesh, p, eps, v)
        res = float(np.max(np.abs(g[f])))
    if res <= cfg.newton_tol:
        return v, res, cfg.max_iters
    raise SolverError(f"no convergence in {cfg.max_iters} iterations at p={p}, eps={eps:g}", res)


def _log_polish(mesh, p, v, con, cfg):
    """Newton on ``F(exp(y)) / exp(y)^{p-1} = 0`` for the free nodes at ``eps = 0``.

    The residual rows are rescaled by ``v_i^{p-1}`` (the energy gradient is
    homogeneous of degree ``p - 1``), which makes them comparable across
    the many orders of magnitude spanned by ``v``.
    """
    f = con.free
    y = np.log(np.maximum(v[f], 1e-300))

    def state(y):
        w = con.values.copy()
        w[f] = np.exp(y)
        _, g, H = energy_hessian(mesh, p, 0.0, w)
        scale = w[f] ** (p - 1.0)
        return w, g[f] / scale, H, scale

    w, G, H, scale = state(y)
    phi = 0.5 * float(G @ G)
    for it in range(cfg.max_iters):
        res = float(np.max(np.abs(G)))
        if res <= cfg.log_polish_tol:
            return w, res, it
        Dv = sparse.diags(w[f])
        J = (sparse.diags(1.0 / scale) @ H[f][:, f] @ Dv).tocsc()
        d = spsolve(J, -G)
        if not np.all(np.isfinite(d)):
            raise SolverError(f"singular log-variable Jacobian at p={p}", res)
        big = float(np.max(np.abs(d)))
        alpha = min(1.0, 5.0 / big) if big > 0 else 1.0
        while True:
            y_new = y + alpha * d
            w_new, G_new, H_new, scale_new = state(y_new)
            phi_new = 0.5 * float(G_new @ G_new)
            if phi_new <= (1 - 2 * cfg.armijo_c * alpha) * phi + 4 * EPS_MACH * phi:
                break
            alpha *= cfg.backtrack
            if alpha < cfg.min_step:
                raise SolverError(f"log-variable line search failed at p={p}", res)
        y, w, G, H, scale, phi = y_new, w_new, G_new, H_new, scale_new, phi_new
    res = float(np.max(np.abs(G)))
    if res <= cfg.log_polish_tol:
        return w, res, cfg.max_iters
    raise SolverError(f"log-variable Newton did not converge at p={p}", res)


def solve_capacitor(mesh: Mesh, p: float, config: Optional[SolverConfig] = None,
                    inner: str = "inner", outer: str = "outer",
                    initial=None) -> ScalarField:
    """Discrete p-capacitary potential: 1 on ``inner``, 0 on ``outer``.

    Parameters
    ----------
    mesh : Mesh
    p : float
        Exponent, ``p > 1``.
    config : SolverConfig, optional
    inner, outer : str
        Boundary tags carrying the Dirichlet data.
    initial : array_like, optional
        Starting field (boundary values are overwritten). When given and
        ``p`` is below ``config.log_polish_below``, the regularized stages
        are skipped and only the log-variable solve is run.

    Returns
    -------
    ScalarField
        Metadata holds ``p``, the ``eps`` reached, the final residual,
        Newton iteration counts and the energy history.
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    cfg = config or SolverConfig()
    con = capacitor_constraints(mesh, inner, outer)
    polish = p < cfg.log_polish_below
    if initial is not None:
        v = np.array(getattr(initial, "values", initial), dtype=float)
        v[con.fixed] = con.values[con.fixed]
    else:
        v = _harmonic_guess(mesh, con)
    iters: List[int] = []
    history: List[float] = []
    res = math.nan
    eps_reached = None
    if not (polish and initial is not None):
        for eps in cfg.eps_schedule:
            try:
                v, res, it = _newton_stage(mesh, p, eps, v, con, cfg, history)
            except SolverError as exc:
                exc.partial = ScalarField(v, {"p": p, "eps": eps})
                raise
            iters.append(it)
            eps_reached = eps
    if polish:
        v, res, it = _log_polish(mesh, p, v, con, cfg)
        iters.append(it)
        eps_reached = 0.0
    meta = {
        "p": p,
        "eps": eps_reached,
        "residual": res,
        "newton_iterations": iters,
        "energy_history": history,
        "inner": inner,
        "outer": outer,
    }
    return ScalarField(v, meta)


def residual_pharmonic(mesh: Mesh, p: float, field, config: Optional[SolverConfig] = None,
                       inner: str = "inner", outer: str = "outer", eps: Optional[float] = None) -> float:
    """Max-norm of the energy gradient over the unconstrained nodes.

    Evaluated at ``eps = config.eps_final`` unless ``eps`` is given.
    """
    cfg = config or SolverConfig()
    con = capacitor_constraints(mesh, inner, outer)
    _, g = energy(mesh, p, cfg.eps_final if eps is None else eps, field)
    return float(np.max(np.abs(g[con.free]))) if con.free.size else 0.0


def moser_transform(field, p: float, floor: float = 1e-30) -> ScalarField:
    """``u = (1 - p) log max(v, floor)``; the floor is stored in the metadata."""
    if not floor > 0:
        raise ValueError("floor must be positive")
    v = np.asarray(getattr(field, "values", field), dtype=float)
    if np.any(v < -1e-12):
        raise ValueError("Moser transform needs a non-negative field")
    meta = dict(getattr(field, "metadata", {}) or {})
    meta.update(p=p, floor=floor, transform="moser")
    return ScalarField((1.0 - p) * np.log(np.maximum(v, floor)), meta)


def inverse_moser(u, p: float) -> np.ndarray:
    return np.exp(-np.asarray(getattr(u, "values", u), dtype=float) / (p - 1.0))


@dataclass
class ContinuationResult:
    p_values: List[float]
    potentials: List[ScalarField]
    transforms: List[ScalarField]
    extrapolated: Optional[ScalarField]
    error: Optional[Exception] = None

    @property
    def complete(self) -> bool:
        return self.error is None


def extrapolate_linear(pa: float, ua: np.ndarray, pb: float, ub: np.ndarray, p: float = 1.0) -> np.ndarray:
    """Value at ``p`` of the line through ``(pa, ua)`` and ``(pb, ub)``."""
    return ub + (ub - ua) * (p - pb) / (pb - pa)


def continue_to_one(mesh: Mesh, schedule: Optional[ContinuationSchedule] = None,
                    config: Optional[SolverConfig] = None, floor: float = 1e-30,
                    inner: str = "inner", outer: str = "outer") -> ContinuationResult:
    """Solve along a decreasing sequence of ``p`` and extrapolate ``u_p`` to ``p = 1``.

    With ``warm_start`` each stage starts from the previous transforms,
    extrapolated linearly in ``p`` once two stages are available. The last
    two transforms are extrapolated linearly in ``p - 1``. A failing stage
    stops the continuation; the partial result carries the exception.
    """
    sch = schedule or ContinuationSchedule()
    ps: List[float] = []
    vs: List[ScalarField] = []
    us: List[ScalarField] = []
    err = None
    for p in sch.p_sequence:
        init = None
        if sch.warm_start and us:
            u0 = us[-1].values
            if len(us) >= 2:
                u0 = extrapolate_linear(ps[-2], us[-2].values, ps[-1], us[-1].values, p)
            init = inverse_moser(u0, p)
        try:
            v = solve_capacitor(mesh, p, config, inner, outer, initial=init)
        except SolverError as exc:
            err = exc
            break
        ps.append(p)
        vs.append(v)
        us.append(moser_transform(v, p, floor))
    ext = None
    if err is None:
        vals = extrapolate_linear(ps[-2], us[-2].values, ps[-1], us[-1].values, 1.0)
        ext = ScalarField(vals, {"p": 1.0, "from": (ps[-2], ps[-1]), "floor": floor})
    return ContinuationResult(ps, vs, us, ext, err)
