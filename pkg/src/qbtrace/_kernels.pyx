# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Jacobi kernels.

Same call signatures and return values as :mod:`qbtrace._kernels_py`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double complex conj(double complex)
    double creal(double complex)


cdef inline void _rotation(double app, double aqq, double complex apq,
                           double *c, double *s, double *t,
                           double complex *ph) noexcept nogil:
    cdef double g = cabs(apq)
    cdef double theta
    ph[0] = apq / g
    theta = (aqq - app) / (2.0 * g)
    if fabs(theta) > 1e150:
        t[0] = 0.5 / theta
    elif theta >= 0.0:
        t[0] = 1.0 / (theta + sqrt(theta * theta + 1.0))
    else:
        t[0] = -1.0 / (-theta + sqrt(theta * theta + 1.0))
    c[0] = 1.0 / sqrt(1.0 + t[0] * t[0])
    s[0] = t[0] * c[0]


def jacobi_eigh(cnp.ndarray a_in, int max_sweeps=100):
    """Cyclic Jacobi on a Hermitian matrix.

    Returns ``(w, Q, sweeps, converged)`` with ``w`` unsorted.
    """
    cdef double complex[:, ::1] a = np.array(a_in, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    cdef double complex[:, ::1] q = np.eye(n, dtype=np.complex128)
    cdef Py_ssize_t p, r, k
    cdef double app, aqq, g, c, s, t, frob = 0.0
    cdef double complex apq, ph, phc, x, y
    cdef int sweep, rotations = 0
    cdef bint converged = n <= 1

    for p in range(n):
        for r in range(n):
            frob += cabs(a[p, r]) ** 2
    frob = sqrt(frob)
    for p in range(n):
        a[p, p] = creal(a[p, p])

    sweep = 0
    with nogil:
        while not converged and sweep < max_sweeps:
            sweep += 1
            rotations = 0
            for p in range(n - 1):
                for r in range(p + 1, n):
                    apq = a[p, r]
                    g = cabs(apq)
                    app = creal(a[p, p])
                    aqq = creal(a[r, r])
                    if g <= 1e-30 * frob or g <= 1e-18 * sqrt(fabs(app * aqq)):
                        continue
                    rotations += 1
                    _rotation(app, aqq, apq, &c, &s, &t, &ph)
                    phc = conj(ph)
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, r]
                        a[k, p] = c * x - s * phc * y
                        a[k, r] = s * x + c * phc * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[r, k]
                        a[p, k] = c * x - s * ph * y
                        a[r, k] = s * x + c * ph * y
                    a[p, r] = 0.0
                    a[r, p] = 0.0
                    a[p, p] = app - t * g
                    a[r, r] = aqq + t * g
                    for k in range(n):
                        x = q[k, p]
                        y = q[k, r]
                        q[k, p] = c * x - s * phc * y
                        q[k, r] = s * x + c * phc * y
            if rotations == 0:
                converged = True

    w = np.array([creal(a[k, k]) for k in range(n)], dtype=np.float64)
    return w, np.asarray(q), sweep, bool(converged)


def jacobi_svd(cnp.ndarray k_in, int max_sweeps=100):
    """One-sided (Hestenes) Jacobi on the columns of ``k_in``.

    Returns ``(sigma, sweeps, converged)`` with ``sigma`` unsorted.
    """
    cdef double complex[:, ::1] u = np.array(k_in, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t p, r, k
    cdef double alpha, beta, g, c, s, t
    cdef double complex gam, ph, phc, x, y
    cdef int sweep = 0, rotations
    cdef bint converged = n <= 1

    with nogil:
        while not converged and sweep < max_sweeps:
            sweep += 1
            rotations = 0
            for p in range(n - 1):
                for r in range(p + 1, n):
                    alpha = 0.0
                    beta = 0.0
                    gam = 0.0
                    for k in range(m):
                        alpha = alpha + creal(conj(u[k, p]) * u[k, p])
                        beta = beta + creal(conj(u[k, r]) * u[k, r])
                        gam = gam + conj(u[k, p]) * u[k, r]
                    g = cabs(gam)
                    if g == 0.0 or g <= 1e-15 * sqrt(alpha * beta):
                        continue
                    rotations += 1
                    _rotation(alpha, beta, gam, &c, &s, &t, &ph)
                    phc = conj(ph)
                    for k in range(m):
                        x = u[k, p]
                        y = u[k, r]
                        u[k, p] = c * x - s * phc * y
                        u[k, r] = s * x + c * phc * y
            if rotations == 0:
                converged = True

    sigma = np.sqrt(np.sum(np.abs(np.asarray(u)) ** 2, axis=0))
    return sigma, sweep, bool(converged)
