"""Regularized p-Dirichlet energy of P1 fields."""
from __future__ import annotations

import numpy as np
from scipy import sparse

from ._backend import assemble
from .mesh import Mesh


def _as_values(mesh: Mesh, field) -> np.ndarray:
    u = np.ascontiguousarray(getattr(field, "values", field), dtype=float)
    if u.shape != (mesh.nv,):
        raise ValueError(f"field has shape {u.shape}, mesh has {mesh.nv} vertices")
    return u


def _check(p: float, eps: float):
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if not eps >= 0:
        raise ValueError("eps must be non-negative")


def energy(mesh: Mesh, p: float, eps: float, field, gradient: bool = True):
    """``sum_T area_T (eps^2 + |grad field|_T^2)^{p/2}`` and its nodal gradient.

    Returns ``(value, gradient)``, or just the value with ``gradient=False``.
    """
    _check(p, eps)
    u = _as_values(mesh, field)
    value, grad, _ = assemble(mesh.triangles, mesh.area, mesh.grads, u, float(p), float(eps), gradient, False)
    return (value, grad) if gradient else value


def energy_hessian(mesh: Mesh, p: float, eps: float, field):
    """Value, gradient and sparse (CSR) Hessian of the energy."""
    _check(p, eps)
    u = _as_values(mesh, field)
    value, grad, blocks = assemble(mesh.triangles, mesh.area, mesh.grads, u, float(p), float(eps), True, True)
    T = mesh.triangles
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    H = sparse.coo_matrix((blocks.ravel(), (rows, cols)), shape=(mesh.nv, mesh.nv)).tocsr()
    return value, grad, H


def gradient_fd_error(mesh: Mesh, p: float, eps: float, field, nodes, step: float = 1e-6) -> float:
    """Worst central-difference mismatch of the energy gradient at ``nodes``.

    Returned relative to the largest gradient magnitude among those nodes.
    """
    u = _as_values(mesh, field).copy()
    _, g = energy(mesh, p, eps, u)
    nodes = np.asarray(nodes, dtype=np.int64)
    fd = np.empty(nodes.size)
    for m, i in enumerate(nodes):
        old = u[i]
        u[i] = old + step
        ep = energy(mesh, p, eps, u, gradient=False)
        u[i] = old - step
        em = energy(mesh, p, eps, u, gradient=False)
        u[i] = old
        fd[m] = (ep - em) / (2 * step)
    return float(np.max(np.abs(fd - g[nodes])) / np.max(np.abs(g[nodes])))
