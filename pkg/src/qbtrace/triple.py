"""Finite-dimensional boundary triples.

A :class:`QuasiTriple` lives on an *extended* space of grid values (interior
plus boundary dofs). ``T`` and ``P`` map it onto the interior space ``H``;
``gamma0`` (conormal trace) and ``gamma1`` (Dirichlet trace) map it onto the
boundary space ``G``. Kernel restrictions of ``T`` give the Neumann, Dirichlet
and Robin realizations; the stacked system ``[T - lam P; gamma0]`` gives the
gamma-field and the Weyl function.

:class:`DirectSumTriple` is an orthogonal sum of independent triples (the
angular modes of the disk model). Operations act block by block whenever the
boundary parameters respect the block structure.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from qbtrace import linalg
from qbtrace.errors import (
    DegenerateKernel,
    DimensionMismatch,
    LambdaInSpectrum,
    NotSelfAdjoint,
    Singular,
    SingularRobinToNeumann,
    SingularWeyl,
)
from qbtrace.linalg import SpectralDecomposition, WeightedSpace

#: Relative pivot threshold used to flag lambda on the spectrum of A_0.
SPECTRUM_PIVOT = 1e-12

SELF_ADJOINT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuasiTriple:
    T: np.ndarray
    P: np.ndarray
    gamma0: np.ndarray
    gamma1: np.ndarray
    H: WeightedSpace
    G: WeightedSpace
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("T", "P", "gamma0", "gamma1"):
            m = linalg.as_cmatrix(getattr(self, name), name)
            if not np.any(m.imag):
                m = np.ascontiguousarray(m.real)  # halves memory for the large disk ladders
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        nd = self.T.shape[1]
        if self.T.shape != (self.H.dim, nd) or self.P.shape != (self.H.dim, nd):
            raise DimensionMismatch("T and P must map the extended space onto H")
        if self.gamma0.shape != (self.G.dim, nd) or self.gamma1.shape != (self.G.dim, nd):
            raise DimensionMismatch("gamma0 and gamma1 must map the extended space onto G")
        if nd != self.H.dim + self.G.dim:
            raise DimensionMismatch(
                f"extended dimension {nd} != dim H + dim G = {self.H.dim + self.G.dim}"
            )

    @property
    def dom_dim(self):
        return self.T.shape[1]

    @property
    def blocks(self):
        return (self,)

    def to_dense(self):
        return self


class DirectSumTriple:
    """Orthogonal direct sum of triples; ``G`` and ``H`` are concatenated in block order."""

    def __init__(self, blocks: Sequence[QuasiTriple], label=""):
        if not blocks:
            raise ValueError("direct sum needs at least one block")
        self.blocks = tuple(blocks)
        self.label = label
        self.H = WeightedSpace(np.concatenate([b.H.weights for b in self.blocks]))
        self.G = WeightedSpace(np.concatenate([b.G.weights for b in self.blocks]))
        self.g_sizes = [b.G.dim for b in self.blocks]
        self.h_sizes = [b.H.dim for b in self.blocks]
        self._dense = None

    @property
    def dom_dim(self):
        return sum(b.dom_dim for b in self.blocks)

    def to_dense(self) -> QuasiTriple:
        if self._dense is None:
            bd = scipy.linalg.block_diag
            bl = self.blocks
            self._dense = QuasiTriple(
                T=bd(*[b.T for b in bl]),
                P=bd(*[b.P for b in bl]),
                gamma0=bd(*[b.gamma0 for b in bl]),
                gamma1=bd(*[b.gamma1 for b in bl]),
                H=self.H,
                G=self.G,
                label=self.label,
            )
        return self._dense

    def split_boundary(self, b):
        """Diagonal blocks of a G-operator, or ``None`` if it couples blocks."""
        edges = np.cumsum([0] + self.g_sizes)
        parts = []
        off = np.array(b, copy=True)
        for i in range(len(self.blocks)):
            sl = slice(edges[i], edges[i + 1])
            parts.append(np.array(b[sl, sl]))
            off[sl, sl] = 0
        if np.any(off != 0):
            return None
        return parts


@dataclass(frozen=True, eq=False)
class RobinParameter:
    """Bounded self-adjoint boundary operator ``B`` in ``B gamma1 f = gamma0 f``.

    ``declared_s`` records a weak Schatten index: B (or the difference it is
    paired with) lies in S_{s,inf}.
    """

    B: np.ndarray
    declared_s: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        b = linalg.as_cmatrix(self.B, "B")
        b.setflags(write=False)
        object.__setattr__(self, "B", b)
        if self.declared_s is not None and self.declared_s <= 0:
            raise ValueError("declared_s must be positive")

    @property
    def key(self):
        return hashlib.sha1(self.B.tobytes()).hexdigest()

    def check(self, G: WeightedSpace, tol=1e-12):
        if self.B.shape != (G.dim, G.dim):
            raise DimensionMismatch(f"B has shape {self.B.shape}, boundary space has dim {G.dim}")
        if not linalg.is_self_adjoint(self.B, G, tol):
            raise NotSelfAdjoint("B is not self-adjoint in the weighted boundary space")
        return self


def _as_param(b) -> RobinParameter:
    return b if isinstance(b, RobinParameter) else RobinParameter(np.asarray(b))


def _block_params(tr: DirectSumTriple, params):
    out = []
    for p in params:
        parts = tr.split_boundary(p.B)
        if parts is None:
            return None
        out.append([RobinParameter(q, p.declared_s, p.label) for q in parts])
    return list(zip(*out)) if out else [()] * len(tr.blocks)


def decompose(tr, *params):
    """Split ``(tr, params)`` into independent ``(block, block_params)`` pieces."""
    params = [_as_param(p) for p in params]
    if isinstance(tr, DirectSumTriple):
        per_block = _block_params(tr, params)
        if per_block is not None:
            return list(zip(tr.blocks, [list(p) for p in per_block]))
        return [(tr.to_dense(), params)]
    return [(tr, params)]


# ---------------------------------------------------------------- Green identity


@dataclass
class GreenReport:
    max_residual: float
    scale: float
    tol: float
    samples: int
    passed: bool


def green_scale(tr):
    dense = [b for b in tr.blocks]
    s = 0.0
    for b in dense:
        sw = np.sqrt(b.G.weights)[:, None]
        s = max(
            s,
            np.linalg.norm(b.H.weights[:, None] * b.T)
            + np.linalg.norm(sw * b.gamma0) * np.linalg.norm(sw * b.gamma1),
        )
    return 1.0 + float(s)


def green_residual(tr: QuasiTriple, f, g):
    """(Tf, Pg)_H - (Pf, Tg)_H - [(G1 f, G0 g)_G - (G0 f, G1 g)_G]."""
    H, G = tr.H, tr.G
    lhs = H.inner(tr.T @ f, tr.P @ g) - H.inner(tr.P @ f, tr.T @ g)
    rhs = G.inner(tr.gamma1 @ f, tr.gamma0 @ g) - G.inner(tr.gamma0 @ f, tr.gamma1 @ g)
    return lhs - rhs


def check_green_identity(tr, samples=32, tol=1e-12, seed=0):
    """Sample random complex f, g and measure the abstract Green identity.

    The residual is ``|LHS - RHS| / (1 + |f| |g|)``; the check passes when the
    maximum is at most ``tol * green_scale(tr)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        for b in tr.blocks:
            n = b.dom_dim
            f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            r = abs(green_residual(b, f, g)) / (1.0 + np.linalg.norm(f) * np.linalg.norm(g))
            worst = max(worst, r)
    scale = green_scale(tr)
    return GreenReport(worst, scale, tol, samples, bool(worst <= tol * scale))


# ------------------------------------------------------------ kernel restriction


def _constraint(tr: QuasiTriple, which, B=None):
    if which == "gamma0":
        return tr.gamma0
    if which == "gamma1":
        return tr.gamma1
    if which == "robin":
        p = _as_param(B).check(tr.G)
        return p.B @ tr.gamma1 - tr.gamma0
    raise ValueError(f"unknown restriction {which!r}")


def restrict_to_kernel(tr, which, B=None):
    """``T`` restricted to ker(gamma0), ker(gamma1) or ker(B gamma1 - gamma0), as a matrix on H.

    ``which`` is ``"gamma0"`` (Neumann), ``"gamma1"`` (Dirichlet) or ``"robin"``.
    """
    if isinstance(tr, DirectSumTriple):
        pieces = decompose(tr, *([B] if which == "robin" else []))
        mats = [restrict_to_kernel(b, which, *(p[:1])) for b, p in pieces]
        return mats[0] if len(mats) == 1 else scipy.linalg.block_diag(*mats)
    key = ("restrict", which, _as_param(B).key if which == "robin" else None)
    if key in tr._cache:
        return tr._cache[key]
    c = _constraint(tr, which, B)
    k = scipy.linalg.null_space(c)
    if k.shape[1] != tr.H.dim:
        raise DegenerateKernel(
            f"kernel has dimension {k.shape[1]}, expected dim H = {tr.H.dim}"
        )
    pk = tr.P @ k
    try:
        a = linalg.solve(pk.T, (tr.T @ k).T).T
    except Singular as exc:
        raise DegenerateKernel("P restricted to the kernel is singular") from exc
    if not linalg.is_self_adjoint(a, tr.H, SELF_ADJOINT_TOL):
        raise NotSelfAdjoint(f"restriction to ker {which} is not self-adjoint")
    a.setflags(write=False)
    tr._cache[key] = a
    return a


def realization(tr: QuasiTriple, which, B=None) -> SpectralDecomposition:
    """Cached spectral decomposition of a kernel restriction (``"N"``, ``"D"`` or ``"B"``)."""
    names = {"N": "gamma0", "D": "gamma1", "B": "robin"}
    key = ("spectral", which, _as_param(B).key if which == "B" else None)
    if key not in tr._cache:
        a = restrict_to_kernel(tr, names[which], B)
        tr._cache[key] = SpectralDecomposition(a, tr.H, tol=SELF_ADJOINT_TOL)
    return tr._cache[key]


# ------------------------------------------------------- gamma field, Weyl function


def _stacked_solve(tr: QuasiTriple, lam, rhs):
    s = np.vstack([tr.T - lam * tr.P, tr.gamma0])
    # interior rows scale like 1/h^2, trace rows like 1/h: equilibrate first
    r = 1.0 / np.max(np.abs(s), axis=1)
    try:
        return linalg.solve(r[:, None] * s, r[:, None] * rhs, threshold=SPECTRUM_PIVOT)
    except Singular as exc:
        raise LambdaInSpectrum(f"lambda={lam} is (numerically) an eigenvalue of A_0") from exc


def _extended_gamma(tr: QuasiTriple, lam):
    key = ("gamma_ext", complex(lam))
    if key not in tr._cache:
        rhs = np.vstack([np.zeros((tr.H.dim, tr.G.dim)), np.eye(tr.G.dim)])
        tr._cache[key] = _stacked_solve(tr, lam, rhs)
    return tr._cache[key]


def _blockwise(tr, fn, lam):
    if isinstance(tr, DirectSumTriple):
        return scipy.linalg.block_diag(*[fn(b, lam) for b in tr.blocks])
    return fn(tr, lam)


def gamma(tr, lam):
    """gamma(lam): boundary data phi -> interior values of the solution of
    (T - lam P) f = 0, gamma0 f = phi."""
    return _blockwise(tr, lambda b, z: b.P @ _extended_gamma(b, z), lam)


def gamma_adjoint(tr, lam):
    """gamma(conj(lam))*, computed as gamma1 (A_0 - lam)^-1 through the lifted solve."""

    def one(b, z):
        key = ("gamma_adj", complex(z))
        if key not in b._cache:
            rhs = np.vstack([np.eye(b.H.dim), np.zeros((b.G.dim, b.H.dim))])
            b._cache[key] = b.gamma1 @ _stacked_solve(b, z, rhs)
        return b._cache[key]

    return _blockwise(tr, one, lam)


def weyl(tr, lam):
    """Weyl function M(lam) = gamma1 gamma(lam) (Neumann-to-Dirichlet map)."""
    return _blockwise(tr, lambda b, z: b.gamma1 @ _extended_gamma(b, z), lam)


def krein_dn(tr, lam):
    """gamma(lam) M(lam)^-1 gamma(conj lam)*, i.e. (A_N - lam)^-1 - (A_D - lam)^-1."""
    if isinstance(tr, DirectSumTriple):
        return scipy.linalg.block_diag(*[krein_dn(b, lam) for b in tr.blocks])
    realization(tr, "N").check_resolvent(lam)
    realization(tr, "D").check_resolvent(lam)
    g = gamma(tr, lam)
    gs = gamma_adjoint(tr, lam)
    try:
        s = linalg.solve(weyl(tr, lam), gs)
    except Singular as exc:
        raise SingularWeyl(f"M({lam}) is singular") from exc
    return g @ s


def krein_robin(tr, B, lam, form="left"):
    """(A_[B] - lam)^-1 - (A_N - lam)^-1 through the Robin-to-Neumann map.

    ``form="left"``:  gamma (I - B M)^-1 B gamma*;
    ``form="right"``: gamma B (I - M B)^-1 gamma*.
    """
    if form not in ("left", "right"):
        raise ValueError("form must be 'left' or 'right'")
    if isinstance(tr, DirectSumTriple):
        pieces = decompose(tr, B)
        mats = [krein_robin(b, p[0], lam, form) for b, p in pieces]
        return mats[0] if len(mats) == 1 else scipy.linalg.block_diag(*mats)
    p = _as_param(B).check(tr.G)
    realization(tr, "N").check_resolvent(lam)
    realization(tr, "B", p).check_resolvent(lam)
    b = p.B
    m = weyl(tr, lam)
    eye = np.eye(tr.G.dim)
    g = gamma(tr, lam)
    gs = gamma_adjoint(tr, lam)
    try:
        if form == "left":
            core = linalg.solve(eye - b @ m, b @ gs)
        else:
            core = b @ linalg.solve(eye - m @ b, gs)
    except Singular as exc:
        raise SingularRobinToNeumann(f"I - BM({lam}) is not invertible") from exc
    return g @ core
