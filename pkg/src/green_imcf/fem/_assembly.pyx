# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-triangle loop for the regularized p-Dirichlet energy."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


def assemble(const cnp.int64_t[:, ::1] tri, const double[::1] area,
             const double[:, :, ::1] grads, const double[::1] u,
             double p, double eps, bint want_grad, bint want_hess):
    """Same contract as the numpy reference in ``_assembly_py``."""
    cdef Py_ssize_t nt = tri.shape[0], nv = u.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double gx, gy, s, a, c1, c2, energy = 0.0
    cdef double gb[3]
    cdef cnp.int64_t v[3]
    cdef double[::1] grad_v
    cdef double[:, ::1] hess_v
    grad = hess = None
    if want_grad:
        grad = np.zeros(nv)
        grad_v = grad
    if want_hess:
        hess = np.empty((nt, 9))
        hess_v = hess
    with nogil:
        for t in range(nt):
            v[0] = tri[t, 0]
            v[1] = tri[t, 1]
            v[2] = tri[t, 2]
            gx = u[v[0]] * grads[t, 0, 0] + u[v[1]] * grads[t, 1, 0] + u[v[2]] * grads[t, 2, 0]
            gy = u[v[0]] * grads[t, 0, 1] + u[v[1]] * grads[t, 1, 1] + u[v[2]] * grads[t, 2, 1]
            s = eps * eps + gx * gx + gy * gy
            a = area[t]
            energy += a * pow(s, 0.5 * p)
            if not (want_grad or want_hess):
                continue
            if s > 0:
                c1 = a * p * pow(s, 0.5 * p - 1.0)
                c2 = a * p * (p - 2.0) * pow(s, 0.5 * p - 2.0)
            else:
                c1 = 2.0 * a if p == 2.0 else 0.0
                c2 = 0.0
            for i in range(3):
                gb[i] = gx * grads[t, i, 0] + gy * grads[t, i, 1]
            if want_grad:
                for i in range(3):
                    grad_v[v[i]] += c1 * gb[i]
            if want_hess:
                for i in range(3):
                    for j in range(3):
                        hess_v[t, 3 * i + j] = (
                            c1 * (grads[t, i, 0] * grads[t, j, 0] + grads[t, i, 1] * grads[t, j, 1])
                            + c2 * gb[i] * gb[j]
                        )
    return energy, grad, hess
