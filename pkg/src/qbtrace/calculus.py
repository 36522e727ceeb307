"""Exact lambda-derivatives of operator-valued expressions.

Expressions are small trees over the leaves ``Gamma``, ``GammaStar``,
``Weyl``, ``Resolvent``, ``Const`` and ``Identity``, combined with
``Product``, ``Sum``, ``Inverse`` and ``Deriv``. Leaves are differentiated
in closed form through powers of the Neumann resolvent (A_0 - lam)^-1;
products use the multinomial Leibniz rule and inverses the recursion obtained
from d^k (X X^-1) = 0.

>>> from qbtrace.models import micro_model
>>> d = derivative(Weyl(), 1, micro_model(), 4.0)
>>> d.real.round(6).tolist()
[[0.125, 0.125], [0.125, 0.125]]
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from qbtrace import linalg, triple
from qbtrace.errors import (
    DepthExceeded,
    DimensionMismatch,
    LambdaInSpectrum,
    Singular,
    SingularInverse,
    StencilHitsSpectrum,
)

MAX_ORDER = 8


# --------------------------------------------------------------------- nodes


class Expr:
    def __matmul__(self, other):
        return Product((self, other))

    def __add__(self, other):
        return Sum((self, other), (1.0, 1.0))

    def __sub__(self, other):
        return Sum((self, other), (1.0, -1.0))

    def __rmul__(self, c):
        return Sum((self,), (complex(c),))


@dataclass(frozen=True, eq=False)
class Gamma(Expr):
    """gamma(lam): G -> H."""


@dataclass(frozen=True, eq=False)
class GammaStar(Expr):
    """gamma(conj lam)*: H -> G."""


@dataclass(frozen=True, eq=False)
class Weyl(Expr):
    """M(lam) on G."""


@dataclass(frozen=True, eq=False)
class Resolvent(Expr):
    """(A_0 - lam)^-1 on H, A_0 the Neumann realization."""


@dataclass(frozen=True, eq=False)
class Identity(Expr):
    """Identity on G."""


@dataclass(frozen=True, eq=False)
class Const(Expr):
    matrix: np.ndarray
    name: str = "B"

    def __post_init__(self):
        m = self.matrix.B if isinstance(self.matrix, triple.RobinParameter) else self.matrix
        object.__setattr__(self, "matrix", linalg.as_cmatrix(m, self.name))


@dataclass(frozen=True, eq=False)
class Product(Expr):
    factors: Tuple[Expr, ...]

    def __post_init__(self):
        flat = []
        for f in self.factors:
            flat.extend(f.factors if isinstance(f, Product) else (f,))
        object.__setattr__(self, "factors", tuple(flat))


@dataclass(frozen=True, eq=False)
class Sum(Expr):
    terms: Tuple[Expr, ...]
    coeffs: Tuple[complex, ...] = ()

    def __post_init__(self):
        coeffs = self.coeffs or (1.0,) * len(self.terms)
        if len(coeffs) != len(self.terms):
            raise ValueError("one coefficient per term")
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in coeffs))


@dataclass(frozen=True, eq=False)
class Inverse(Expr):
    arg: Expr


@dataclass(frozen=True, eq=False)
class Deriv(Expr):
    """The ``order``-th derivative of ``arg`` treated as a function of lam."""

    arg: Expr
    order: int = 1


@dataclass(frozen=True, eq=False)
class NamedComposite(Expr):
    name: str
    expansion: Expr = field(repr=False)


def WeylInv():
    return Inverse(Weyl())


def _b(b):
    return b if isinstance(b, Expr) else Const(b)


def S():
    """M(lam)^-1 gamma(conj lam)*."""
    return NamedComposite("S", Product((WeylInv(), GammaStar())))


def T_B(b):
    """(I - B M(lam))^-1."""
    return NamedComposite("T_B", Inverse(Identity() - _b(b) @ Weyl()))


def U(b1, b2):
    """(I - B1 M)^-1 (B1 - B2) (I - M B2)^-1."""
    b1, b2 = _b(b1), _b(b2)
    diff = Const(b1.matrix - b2.matrix, "B1-B2")
    return NamedComposite(
        "U",
        Product((Inverse(Identity() - b1 @ Weyl()), diff, Inverse(Identity() - Weyl() @ b2))),
    )


def V(b):
    """(I - B M)^-1 M^-1, which equals M^-1 (I - M B)^-1."""
    return NamedComposite("V", Product((Inverse(Identity() - _b(b) @ Weyl()), WeylInv())))


# ------------------------------------------------------------ Leibniz tables


def leibniz_expand(order, arity=2):
    """Multinomial coefficients of d^order (F_1 ... F_arity).

    Returns ``{(k_1, ..., k_arity): order! / (k_1! ... k_arity!)}`` over all
    compositions of ``order``.
    """
    if order < 0 or arity < 1:
        raise ValueError("order must be >= 0 and arity >= 1")
    fact = math.factorial
    table = {}
    for cuts in itertools.combinations_with_replacement(range(order + 1), arity - 1):
        parts = []
        prev = 0
        for c in cuts:
            parts.append(c - prev)
            prev = c
        parts.append(order - prev)
        idx = tuple(parts)
        table[idx] = fact(order) // math.prod(fact(p) for p in idx)
    return dict(sorted(table.items(), reverse=True))


# --------------------------------------------------------------- evaluation


class _Context:
    """Lazily evaluated building blocks at one lam, block-aware."""

    def __init__(self, tr, lam):
        self.tr = tr
        self.lam = complex(lam)
        blocks = tr.blocks if isinstance(tr, triple.DirectSumTriple) else (tr,)
        self._spec = [triple.realization(b, "N") for b in blocks]
        for sp in self._spec:
            sp.check_resolvent(self.lam)
        edges = np.cumsum([0] + [b.H.dim for b in blocks])
        self._h = [slice(edges[i], edges[i + 1]) for i in range(len(blocks))]
        self.g_dim = tr.G.dim
        self._gamma = None
        self._gamma_star = None
        self._weyl = None

    @property
    def gamma(self):
        if self._gamma is None:
            self._gamma = triple.gamma(self.tr, self.lam)
        return self._gamma

    @property
    def gamma_star(self):
        if self._gamma_star is None:
            self._gamma_star = triple.gamma_adjoint(self.tr, self.lam)
        return self._gamma_star

    @property
    def weyl(self):
        if self._weyl is None:
            self._weyl = triple.weyl(self.tr, self.lam)
        return self._weyl

    def res_left(self, k, x):
        out = np.empty(x.shape, dtype=np.complex128)
        for sl, sp in zip(self._h, self._spec):
            out[sl] = sp.apply_left(self.lam, k, x[sl])
        return out

    def res_right(self, k, x):
        out = np.empty(x.shape, dtype=np.complex128)
        for sl, sp in zip(self._h, self._spec):
            out[:, sl] = sp.apply_right(self.lam, k, x[:, sl])
        return out

    def resolvent_power(self, k):
        n = sum(sp.dim for sp in self._spec)
        out = np.zeros((n, n), dtype=np.complex128)
        for sl, sp in zip(self._h, self._spec):
            out[sl, sl] = sp.resolvent_power(self.lam, k)
        return out


class Evaluator:
    """Memoized evaluation of derivatives at a fixed (triple, lam)."""

    def __init__(self, tr, lam, max_order=MAX_ORDER):
        self.ctx = _Context(tr, lam)
        self.max_order = max_order
        self._memo = {}

    def __call__(self, expr, k=0):
        if k < 0:
            raise ValueError("derivative order must be non-negative")
        if k > self.max_order:
            raise DepthExceeded(f"derivative order {k} exceeds the limit {self.max_order}")
        key = (id(expr), k)
        if key not in self._memo:
            self._memo[key] = (expr, self._eval(expr, k))
        return self._memo[key][1]

    def _eval(self, e, k):
        ctx = self.ctx
        fk = math.factorial(k)
        if isinstance(e, Gamma):
            return fk * ctx.res_left(k, ctx.gamma)
        if isinstance(e, GammaStar):
            return fk * ctx.res_right(k, ctx.gamma_star)
        if isinstance(e, Weyl):
            if k == 0:
                return ctx.weyl
            return fk * (ctx.gamma_star @ ctx.res_left(k - 1, ctx.gamma))
        if isinstance(e, Resolvent):
            return fk * ctx.resolvent_power(k + 1)
        if isinstance(e, Identity):
            n = ctx.g_dim
            return np.eye(n, dtype=np.complex128) if k == 0 else np.zeros((n, n), np.complex128)
        if isinstance(e, Const):
            return e.matrix if k == 0 else np.zeros_like(e.matrix)
        if isinstance(e, Sum):
            vals = [self(t, k) for t in e.terms]
            if len({v.shape for v in vals}) != 1:
                raise DimensionMismatch("Sum terms have different shapes")
            return sum(c * v for c, v in zip(e.coeffs, vals))
        if isinstance(e, Product):
            return self._product(e.factors, k)
        if isinstance(e, Inverse):
            return self._inverse(e, k)
        if isinstance(e, Deriv):
            return self(e.arg, e.order + k)
        if isinstance(e, NamedComposite):
            return self(e.expansion, k)
        raise TypeError(f"unknown expression node {type(e).__name__}")

    def _product(self, factors, k):
        out = None
        for idx, coeff in leibniz_expand(k, len(factors)).items():
            term = None
            for f, j in zip(factors, idx):
                v = self(f, j)
                if term is not None and term.shape[1] != v.shape[0]:
                    raise DimensionMismatch(f"cannot multiply {term.shape} by {v.shape}")
                term = v if term is None else term @ v
            out = coeff * term if out is None else out + coeff * term
        return out

    def _inverse(self, e, k):
        x0 = self(e.arg, 0)
        if x0.shape[0] != x0.shape[1]:
            raise DimensionMismatch(f"Inverse of a non-square value {x0.shape}")
        if k == 0:
            try:
                return linalg.inverse(x0)
            except Singular as exc:
                raise SingularInverse("inverse node is singular at lambda") from exc
        y0 = self(e, 0)
        acc = np.zeros_like(x0)
        for p in range(1, k + 1):
            acc = acc + math.comb(k, p) * (self(e.arg, p) @ self(e, k - p))
        return -(y0 @ acc)


def derivative(expr, k, tr, lam, max_order=MAX_ORDER):
    """k-th lam-derivative of ``expr`` bound to triple ``tr``, evaluated at ``lam``."""
    return Evaluator(tr, lam, max_order)(expr, k)


def evaluate(expr, tr, lam):
    return derivative(expr, 0, tr, lam)


# ------------------------------------------------------- finite differences

# fourth-order central stencils {offset: weight}
_STENCILS = {
    1: {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12},
    2: {-2: -1 / 12, -1: 4 / 3, 0: -5 / 2, 1: 4 / 3, 2: -1 / 12},
    3: {-3: 1 / 8, -2: -1.0, -1: 13 / 8, 1: -13 / 8, 2: 1.0, 3: -1 / 8},
    4: {-3: -1 / 6, -2: 2.0, -1: -13 / 2, 0: 28 / 3, 1: -13 / 2, 2: 2.0, 3: -1 / 6},
}

#: Default central step as a fraction of the distance from lam to the nearest pole.
STEP_FRACTION = 0.03
CIRCLE_NODES = 32


def _const_nodes(e, out):
    if isinstance(e, Const):
        out.append(e.matrix)
    for child in getattr(e, "factors", ()) + getattr(e, "terms", ()):
        _const_nodes(child, out)
    for name in ("arg", "expansion"):
        if hasattr(e, name):
            _const_nodes(getattr(e, name), out)
    return out


def singularity_distance(expr, tr, lam):
    """Distance from lam to the spectra of A_N, A_D and every A_[B], B a constant in ``expr``.

    These are the possible poles of the leaves and of the inverses built by
    the named composites.
    """
    lam = complex(lam)
    dist = np.inf
    for block, _ in triple.decompose(tr):
        dist = min(dist, triple.realization(block, "N").distance(lam))
        dist = min(dist, triple.realization(block, "D").distance(lam))
    for b in _const_nodes(expr, []):
        if b.shape != (tr.G.dim, tr.G.dim) or not linalg.is_self_adjoint(b, tr.G, 1e-12):
            continue
        for block, bp in triple.decompose(tr, b):
            dist = min(dist, triple.realization(block, "B", bp[0]).distance(lam))
    return float(dist)


def default_step(expr, tr, lam):
    return STEP_FRACTION * singularity_distance(expr, tr, lam)


def _eval_at(expr, tr, z):
    try:
        return evaluate(expr, tr, z)
    except LambdaInSpectrum as exc:
        raise StencilHitsSpectrum(f"stencil point {z} hits the spectrum") from exc


def fd_derivative(expr, k, tr, lam, h=None, scheme="central", nodes=CIRCLE_NODES):
    """Finite-difference k-th derivative, an oracle for :func:`derivative`.

    ``scheme="central"`` (k <= 4): fourth-order central stencil on the real
    direction at steps ``h`` and ``h/2``, combined by one Richardson step
    ``(16 D(h/2) - D(h)) / 15``. Default ``h`` is ``STEP_FRACTION`` times the
    distance to the nearest pole.

    ``scheme="circle"``: central differences on ``nodes`` points
    ``lam + h w^j`` (w a root of unity),
    ``k! / (nodes h^k) sum_j w^(-jk) f(lam + h w^j)``. The error decays like
    ``(h / dist)^nodes``, so ``h`` can be large (default half the distance)
    and cancellation stays mild even for k = 3 or 4.
    """
    if k == 0:
        return evaluate(expr, tr, lam)
    lam = complex(lam)
    if scheme == "circle":
        if k >= nodes:
            raise ValueError("need more nodes than the derivative order")
        h = 0.5 * singularity_distance(expr, tr, lam) if h is None else float(h)
        if not h > 0:
            raise ValueError("step must be positive")
        w = np.exp(2j * np.pi * np.arange(nodes) / nodes)
        acc = None
        for wj in w:
            val = wj ** (-k) * _eval_at(expr, tr, lam + h * wj)
            acc = val if acc is None else acc + val
        return acc * (math.factorial(k) / (nodes * h**k))
    if scheme != "central":
        raise ValueError(f"unknown scheme {scheme!r}")
    if k not in _STENCILS:
        raise ValueError("central differences support k <= 4")
    h = default_step(expr, tr, lam) if h is None else float(h)
    if not h > 0:
        raise ValueError("step must be positive")

    def central(step):
        acc = None
        for j, c in _STENCILS[k].items():
            val = c * _eval_at(expr, tr, lam + j * step)
            acc = val if acc is None else acc + val
        return acc / step**k

    return (16.0 * central(h / 2) - central(h)) / 15.0
