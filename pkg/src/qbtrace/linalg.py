"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` ``complex128`` arrays. Hermitian eigenproblems
and singular values go through cyclic Jacobi kernels (compiled when the
extension is built, pure Python otherwise); matrices larger than
:data:`JACOBI_MAX_DIM` are handed to LAPACK.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from qbtrace.errors import (
    EmptySequence,
    LambdaInSpectrum,
    NoConvergence,
    NotHermitian,
    NotSelfAdjoint,
    NotSquare,
    Singular,
)

try:
    if os.environ.get("QBTRACE_PURE"):
        raise ImportError("pure-Python kernels requested")
    from qbtrace import _kernels as _kern

    KERNEL_BACKEND = "compiled"
except ImportError:
    from qbtrace import _kernels_py as _kern

    KERNEL_BACKEND = "python"

#: Largest dimension routed to the Jacobi kernels under ``method="auto"``.
JACOBI_MAX_DIM = 200 if KERNEL_BACKEND == "compiled" else 64

#: Relative pivot threshold of :func:`solve`.
PIVOT_THRESHOLD = 1e-13


def as_cmatrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D ``complex128`` array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _max_abs(a):
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """C^dim with the inner product (f, g) = sum_i w_i f_i conj(g_i)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise ValueError("weighted space must have positive dimension")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.weights.size

    def inner(self, f, g):
        return complex(np.sum(self.weights * np.asarray(f) * np.conj(g)))

    def norm(self, f):
        return math.sqrt(max(self.inner(f, f).real, 0.0))

    def concat(self, other):
        return WeightedSpace(np.concatenate([self.weights, other.weights]))


def weighted_adjoint(x, codomain: WeightedSpace, domain: WeightedSpace):
    """Adjoint of ``x: domain -> codomain`` with respect to the two weightings."""
    return (np.conj(x).T * codomain.weights[None, :]) / domain.weights[:, None]


def is_self_adjoint(a, space: WeightedSpace, tol):
    wa = space.weights[:, None] * a
    scale = _max_abs(wa)
    return _max_abs(wa - np.conj(wa).T) <= tol * max(scale, np.finfo(float).tiny)


def _is_tridiagonal(a):
    n = a.shape[0]
    if n < 3:
        return False
    band = np.abs(np.triu(a, 2))
    return not np.any(band)


def hermitian_eig(a, tol=1e-12, method="auto"):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending eigenvalues ``w`` and unitary ``Q`` with ``a = Q diag(w) Q*``.
    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"``.
    """
    a = as_cmatrix(a)
    n, m = a.shape
    if n != m:
        raise NotSquare(f"expected a square matrix, got {a.shape}")
    scale = _max_abs(a)
    if _max_abs(a - np.conj(a).T) > tol * scale:
        raise NotHermitian("matrix fails the Hermitian symmetry check")
    a = 0.5 * (a + np.conj(a).T)
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        w, q, _, converged = _kern.jacobi_eigh(np.ascontiguousarray(a))
        if not converged:
            raise NoConvergence("Jacobi sweep budget exhausted")
        # the rotated diagonal drifts by ~eps*|a| per update; Rayleigh quotients
        # against the original matrix recover small eigenvalues to full accuracy
        w = np.real(np.einsum("ij,ij->j", np.conj(q), a @ q))
    elif method == "lapack":
        try:
            if not np.any(a.imag) and _is_tridiagonal(a):
                d = np.real(np.diag(a))
                e = np.real(np.diag(a, 1))
                w, q = scipy.linalg.eigh_tridiagonal(d, e, lapack_driver="stemr")
            else:
                # real symmetric input (real lambda, real coefficients) is ~4x cheaper
                w, q = np.linalg.eigh(a.real if not np.any(a.imag) else a)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise NoConvergence(str(exc)) from exc
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")
    return np.asarray(w)[order], np.asarray(q)[:, order]


def solve(a, rhs, threshold=PIVOT_THRESHOLD):
    """Solve ``a @ x = rhs`` by pivoted LU; raise :class:`Singular` on a tiny pivot."""
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise NotSquare(f"expected a square matrix, got {a.shape}")
    rhs = np.asarray(rhs)
    if not np.any(a.imag) and not np.iscomplexobj(rhs):
        a = a.real
    else:
        rhs = rhs.astype(np.complex128)
    with warnings.catch_warnings():
        # exact zero pivots are reported below as Singular
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    colnorm = float(np.max(np.linalg.norm(a, axis=0))) if a.size else 0.0
    pivots = np.abs(np.diag(lu))
    if colnorm == 0.0 or np.min(pivots) <= threshold * colnorm:
        raise Singular(
            f"pivot {np.min(pivots):.3e} below {threshold:g} x column norm {colnorm:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def inverse(a, threshold=PIVOT_THRESHOLD):
    a = as_cmatrix(a)
    return solve(a, np.eye(a.shape[0], dtype=np.complex128), threshold)


def svd_values(k, method="auto"):
    """Singular values of ``k`` in non-increasing order.

    ``"jacobi"`` is one-sided Jacobi, ``"lapack"`` is ``gesdd`` and ``"gram"``
    takes square roots of the eigenvalues of ``k* k`` (loses everything below
    about ``1e-8 * s_1``; kept as a cross-check).
    """
    k = as_cmatrix(k)
    if k.size == 0:
        return np.zeros(0)
    if k.shape[0] < k.shape[1]:
        k = np.conj(k).T
    if method == "auto":
        method = "jacobi" if k.shape[1] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        s, _, converged = _kern.jacobi_svd(np.ascontiguousarray(k))
        if not converged:
            raise NoConvergence("one-sided Jacobi sweep budget exhausted")
    elif method == "lapack":
        try:
            s = np.linalg.svd(k.real if not np.any(k.imag) else k, compute_uv=False)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(str(exc)) from exc
    elif method == "gram":
        w, _ = hermitian_eig(np.conj(k).T @ k, tol=1e-10)
        s = np.sqrt(np.clip(w, 0.0, None))
    else:
        raise ValueError(f"unknown svd method {method!r}")
    return np.sort(np.asarray(s, dtype=np.float64))[::-1]


def trace(k):
    """Sum of the diagonal, accumulated with ``math.fsum`` (order independent)."""
    k = as_cmatrix(k)
    if k.shape[0] != k.shape[1]:
        raise NotSquare(f"trace needs a square matrix, got {k.shape}")
    d = np.diag(k)
    return complex(math.fsum(d.real), math.fsum(d.imag))


def weak_schatten_quasinorm(s, p):
    """sup_k k^(1/p) s_k over the given sequence (k counted from 1)."""
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptySequence("no singular values given")
    if p <= 0:
        raise ValueError("p must be positive")
    if np.any(s < 0) or np.any(np.diff(s) > 1e-12 * max(s[0], 1.0)):
        raise ValueError("sequence must be non-negative and non-increasing")
    k = np.arange(1, s.size + 1, dtype=np.float64)
    return float(np.max(k ** (1.0 / p) * s))


class SpectralDecomposition:
    """Functional calculus for an operator self-adjoint in a weighted space.

    With ``S = diag(sqrt(w))`` the matrix ``S a S^-1`` is Hermitian; its
    eigenpairs give ``f(a) = S^-1 U f(L) U* S``.
    """

    def __init__(self, a, space: WeightedSpace, tol=1e-10, method="auto"):
        a = as_cmatrix(a)
        if a.shape != (space.dim, space.dim):
            raise NotSquare(f"operator shape {a.shape} does not match space dim {space.dim}")
        self.space = space
        self._sqrt_w = np.sqrt(space.weights)
        sym = self._sqrt_w[:, None] * a / self._sqrt_w[None, :]
        if _max_abs(sym - np.conj(sym).T) > tol * max(_max_abs(sym), np.finfo(float).tiny):
            raise NotSelfAdjoint("operator is not self-adjoint in the weighted space")
        self.values, self._u = hermitian_eig(sym, tol=tol, method=method)

    @property
    def dim(self):
        return self.values.size

    def distance(self, lam):
        return float(np.min(np.abs(self.values - lam)))

    def check_resolvent(self, lam, rel=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.values))))
        if self.distance(lam) <= rel * scale:
            raise LambdaInSpectrum(f"lambda={lam} lies on the spectrum")

    def _diag(self, lam, k):
        self.check_resolvent(lam)
        lam = complex(lam)
        if lam.imag == 0 and not np.iscomplexobj(self._u):
            lam = lam.real
        return (self.values - lam) ** (-k)

    def function(self, fvals):
        """Dense matrix f(a) given the values f(eigenvalues)."""
        u = self._u
        return ((u * fvals[None, :]) @ np.conj(u).T) * (self._sqrt_w[None, :] / self._sqrt_w[:, None])

    def resolvent_power(self, lam, k):
        return self.function(self._diag(lam, k))

    def apply_left(self, lam, k, x):
        """(a - lam)^-k @ x."""
        if k == 0:
            return np.asarray(x, dtype=np.complex128)
        u = self._u
        y = np.conj(u).T @ (self._sqrt_w[:, None] * x)
        return (u @ (self._diag(lam, k)[:, None] * y)) / self._sqrt_w[:, None]

    def apply_right(self, lam, k, x):
        """x @ (a - lam)^-k."""
        if k == 0:
            return np.asarray(x, dtype=np.complex128)
        u = self._u
        y = (x / self._sqrt_w[None, :]) @ u
        return ((y * self._diag(lam, k)[None, :]) @ np.conj(u).T) * self._sqrt_w[None, :]
