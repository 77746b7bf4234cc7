"""Vectorized numpy assembly of the regularized p-Dirichlet energy.

Reference implementation and fallback for the compiled kernel in
``_assembly.pyx``; both expose :func:`assemble` with the same signature.
"""
import numpy as np


def assemble(tri, area, grads, u, p, eps, want_grad, want_hess):
    """Energy, nodal gradient and element Hessian blocks of a P1 field.

    Parameters
    ----------
    tri : (nt, 3) int64 array
    area : (nt,) float array
    grads : (nt, 3, 2) float array
        Gradients of the barycentric basis functions.
    u : (nv,) float array
    p, eps : float
    want_grad, want_hess : bool

    Returns
    -------
    energy : float
        ``sum_T area_T (eps^2 + |grad u|_T^2)^{p/2}``.
    grad : (nv,) array or None
    hess : (nt, 9) array or None
        Row-major local 3x3 blocks.
    """
    g = np.einsum("tk,tkd->td", u[tri], grads)
    s = eps * eps + np.einsum("td,td->t", g, g)
    energy = float(np.sum(area * s ** (0.5 * p)))
    grad = hess = None
    if not (want_grad or want_hess):
        return energy, grad, hess
    pos = s > 0
    c1 = np.zeros_like(s)
    c1[pos] = area[pos] * p * s[pos] ** (0.5 * p - 1.0)
    if p == 2.0:
        c1[~pos] = 2.0 * area[~pos]
    gb = np.einsum("td,tkd->tk", g, grads)
    if want_grad:
        grad = np.bincount(tri.ravel(), (c1[:, None] * gb).ravel(), minlength=len(u))
    if want_hess:
        c2 = np.zeros_like(s)
        c2[pos] = area[pos] * p * (p - 2.0) * s[pos] ** (0.5 * p - 2.0)
        bb = np.einsum("tid,tjd->tij", grads, grads)
        hess = (c1[:, None, None] * bb + c2[:, None, None] * gb[:, :, None] * gb[:, None, :]).reshape(-1, 9)
    return energy, grad, hess
