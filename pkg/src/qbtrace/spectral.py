"""Trace identities and singular-value decay of resolvent power differences.

Pairs of realizations, with the boundary operator entering the trace formula:

====  ===========================  ==============================
pair  difference                   boundary side X(lam) M'(lam)
====  ===========================  ==============================
dn    A_N vs A_D                   M^-1
rn    A_[B] vs A_N                 (I - B M)^-1 B
rr    A_[B1] vs A_[B2]             (I - B1 M)^-1 (B1 - B2) (I - M B2)^-1
rd    A_[B] vs A_D                 (I - B M)^-1 M^-1
====  ===========================  ==============================

The trace of ``(A_1 - lam)^-m - (A_2 - lam)^-m`` equals
``tr d^(m-1)/dlam^(m-1) [X M'] / (m-1)!``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from qbtrace import calculus, linalg, triple
from qbtrace.errors import ConfigError, TooFewValues
from qbtrace.models import ModelConfig, build, build_boundary_op

PAIRS = ("dn", "rn", "rr", "rd")
N_PARAMS = {"dn": 0, "rn": 1, "rr": 2, "rd": 1}

#: s-values at or below this are treated as numerically zero.
S_FLOOR = 1e-13
DEFAULT_WINDOW = (1 / 8, 1 / 2)

#: Allowed |fitted - predicted| at the finest ladder level.
BANDS = {"dn": 0.25, "rd": 0.25, "rn": 0.35, "rr": 0.35}
BAND_IMPROVED = 0.5


def _check_pair(pair, params):
    if pair not in PAIRS:
        raise ConfigError(f"unknown pair {pair!r}; expected one of {PAIRS}")
    if len(params) != N_PARAMS[pair]:
        raise ConfigError(f"pair {pair} takes {N_PARAMS[pair]} boundary operator(s), got {len(params)}")


def _realizations(block, pair, params):
    r = triple.realization
    if pair == "dn":
        return r(block, "N"), r(block, "D")
    if pair == "rn":
        return r(block, "B", params[0]), r(block, "N")
    if pair == "rr":
        return r(block, "B", params[0]), r(block, "B", params[1])
    return r(block, "B", params[0]), r(block, "D")


def resolvent_power_diff(tr, pair, params, m, lam):
    """(A_1 - lam)^-m - (A_2 - lam)^-m by spectral calculus, as a dense matrix on H."""
    _check_pair(pair, params)
    if m < 1:
        raise ValueError("m must be >= 1")
    mats = []
    for block, bp in triple.decompose(tr, *params):
        s1, s2 = _realizations(block, pair, bp)
        mats.append(s1.resolvent_power(lam, m) - s2.resolvent_power(lam, m))
    return mats[0] if len(mats) == 1 else scipy.linalg.block_diag(*mats)


def boundary_expression(pair, params):
    """X(lam) M'(lam) as an operator expression."""
    _check_pair(pair, params)
    B = [p.B if isinstance(p, triple.RobinParameter) else p for p in params]
    mprime = calculus.Deriv(calculus.Weyl(), 1)
    if pair == "dn":
        x = calculus.WeylInv()
    elif pair == "rn":
        x = calculus.Product((calculus.T_B(B[0]), calculus.Const(B[0])))
    elif pair == "rr":
        x = calculus.U(B[0], B[1])
    else:
        x = calculus.V(B[0])
    return calculus.Product((x, mprime))


def _cplx(z):
    return None if z is None else [float(z.real), float(z.imag)]


@dataclass
class TraceReport:
    pair: str
    m: int
    lam: complex
    lhs: complex
    rhs: complex
    abs_discrepancy: float
    rel_discrepancy: float
    continuum_reference: Optional[complex] = None

    def passed(self, tol=1e-8):
        return bool(self.rel_discrepancy <= tol)

    def to_dict(self):
        d = asdict(self)
        for k in ("lam", "lhs", "rhs", "continuum_reference"):
            d[k] = _cplx(d[k])
        return d


def _sl1d_series(scale, shift, m):
    """sum_{k>=1} (scale k^2 + shift)^-m, shift off the negative real axis."""
    if m == 1:
        z = cmath.sqrt(shift / scale)
        x = math.pi * z
        return (x / cmath.tanh(x) - 1.0) / (2.0 * shift)
    kmax = 200000
    k = np.arange(1, kmax + 1, dtype=np.float64)
    head = complex(np.sum((scale * k**2 + shift) ** (-m)))
    # integral of (scale x^2)^-m beyond kmax + 1/2
    tail = scale ** (-m) * (kmax + 0.5) ** (1 - 2 * m) / (2 * m - 1)
    return head + tail


def continuum_reference(cfg: ModelConfig, pair, m, lam):
    """Analytic trace of the continuum D/N difference for constant coefficients, else ``None``."""
    if pair != "dn" or cfg.gamma1_scale != 1.0:
        return None
    lam = complex(lam)
    if cfg.kind == "sl1d":
        a, a0 = cfg.constant("a", 1.0), cfg.constant("a0")
        if a is None or a0 is None:
            return None
        # Neumann spectrum {a (k pi/L)^2 + a0, k >= 0}, Dirichlet the same with k >= 1
        return (a0 - lam) ** (-m)
    if cfg.kind == "rect2d":
        a11, a22 = cfg.constant("a11", 1.0), cfg.constant("a22", 1.0)
        a12, a0 = cfg.constant("a12", 0.0), cfg.constant("a0")
        if None in (a11, a22, a12, a0) or a12 != 0:
            return None
        b = a0 - lam
        sx = a11 * (math.pi / cfg.length) ** 2
        sy = a22 * (math.pi / cfg.width) ** 2
        # (j, k) with j = 0 or k = 0 survive the cancellation
        return b ** (-m) + _sl1d_series(sx, b, m) + _sl1d_series(sy, b, m)
    return None


def _relative(lhs, rhs):
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0 else abs(lhs - rhs) / scale


def trace_formula_check(tr, pair, params, m, lam, cfg: Optional[ModelConfig] = None):
    """Both sides of the trace formula at ``(m, lam)``.

    ``lhs`` is the trace of :func:`resolvent_power_diff`; ``rhs`` is the trace
    of the (m-1)-th derivative of the boundary expression, divided by (m-1)!.
    Independent blocks of a direct sum are handled one at a time.
    """
    _check_pair(pair, params)
    if m < 1:
        raise ValueError("m must be >= 1")
    lam = complex(lam)
    lhs_parts, rhs_parts = [], []
    for block, bp in triple.decompose(tr, *params):
        s1, s2 = _realizations(block, pair, bp)
        lhs_parts.append(linalg.trace(s1.resolvent_power(lam, m) - s2.resolvent_power(lam, m)))
        expr = boundary_expression(pair, bp)
        d = calculus.derivative(expr, m - 1, block, lam)
        rhs_parts.append(linalg.trace(d) / math.factorial(m - 1))
    lhs = complex(math.fsum(z.real for z in lhs_parts), math.fsum(z.imag for z in lhs_parts))
    rhs = complex(math.fsum(z.real for z in rhs_parts), math.fsum(z.imag for z in rhs_parts))
    ref = continuum_reference(cfg, pair, m, lam) if cfg is not None else None
    return TraceReport(pair, m, lam, lhs, rhs, abs(lhs - rhs), _relative(lhs, rhs), ref)


# --------------------------------------------------------------------- decay


def fit_decay_exponent(s, window=DEFAULT_WINDOW, floor=S_FLOOR):
    """Fit s_k ~ C k^-alpha on the tail window; returns ``(alpha, r2)``.

    With K the number of values above ``floor``, the window keeps indices
    ``k`` (1-based) with ``lo*K <= k <= hi*K``.
    """
    lo, hi = window
    if not 0 <= lo < hi <= 1:
        raise ValueError("window must satisfy 0 <= lo < hi <= 1")
    s = np.sort(np.asarray(s, dtype=np.float64).ravel())[::-1]
    K = int(np.sum(s > floor))
    if K < 8:
        raise TooFewValues(f"only {K} singular values above {floor:g}; need 8")
    k = np.arange(1, K + 1, dtype=np.float64)
    sel = (k >= max(1.0, lo * K)) & (k <= hi * K)
    if np.sum(sel) < 3:
        raise TooFewValues("tail window holds fewer than 3 values")
    x, y = np.log(k[sel]), np.log(s[:K][sel])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if sst == 0 else 1.0 - float(np.sum(resid**2)) / sst
    return float(-slope), r2


def predicted_exponent(pair, m, n, t=0.0):
    """alpha = 2m/(n-1) for dn and rd, (2m + 1 + t)/(n-1) for rn and rr."""
    if n < 2:
        return None
    if pair in ("dn", "rd"):
        return 2 * m / (n - 1)
    return (2 * m + 1 + t) / (n - 1)


def weighted_svd_values(tr, k):
    """Singular values of ``k`` as an operator on the weighted space H."""
    sw = np.sqrt(tr.H.weights)
    return linalg.svd_values(sw[:, None] * k / sw[None, :])


def _block_svd_values(tr, pair, params, m, lam):
    vals = []
    seen = {}
    for block, bp in triple.decompose(tr, *params):
        key = (id(block),) + tuple(p.key for p in bp)
        if key not in seen:
            s1, s2 = _realizations(block, pair, bp)
            d = s1.resolvent_power(lam, m) - s2.resolvent_power(lam, m)
            seen[key] = weighted_svd_values(block, d)
            # dense realizations of every block would not fit in memory together
            block._cache.clear()
        vals.append(seen[key])
    return np.sort(np.concatenate(vals))[::-1]


def difference_index(pair, specs):
    """Weak Schatten index of B (rn) or B1 - B2 (rr) readable off the specs, else ``None``.

    Recognized: a ``fourier_decay`` operator, alone (rn, zero shift) or paired
    with multiplication by a constant equal to its shift (rr).
    """
    if pair == "rn" and specs[0].variant == "fourier_decay" and specs[0].shift == 0:
        return specs[0].s
    if pair == "rr":
        for a, b in (specs, specs[::-1]):
            if a.variant == "fourier_decay" and b.constant_value == a.shift:
                return a.s
    return None


@dataclass
class DecayLevel:
    level: int
    resolution: dict
    fitted_exponent: Optional[float]
    r2: Optional[float]
    quasinorm: Optional[float]
    count_above_floor: int
    s_values: List[float] = field(repr=False)


@dataclass
class DecayReport:
    pair: str
    m: int
    n: int
    lam: complex
    t: float
    predicted_exponent: Optional[float]
    levels: List[DecayLevel]
    applicable: bool
    monotone: Optional[bool] = None
    band: Optional[float] = None
    passed: Optional[bool] = None
    note: str = ""

    @property
    def fitted(self):
        return [lv.fitted_exponent for lv in self.levels]

    def to_dict(self, with_s=False):
        d = asdict(self)
        d["lam"] = _cplx(self.lam)
        if not with_s:
            for lv in d["levels"]:
                lv.pop("s_values")
        return d


def _resolution(cfg):
    if cfg.kind == "sl1d":
        return {"N": cfg.N}
    if cfg.kind == "rect2d":
        return {"Nx": cfg.Nx, "Ny": cfg.Ny}
    return {"n_r": cfg.n_r, "mode_max": cfg.mode_max}


def singular_value_ladder(cfg, pair, specs, m, lam, levels, diff_s=None, window=DEFAULT_WINDOW):
    """Decay study over ``levels`` resolutions, each doubling the previous one.

    ``specs`` are :class:`~qbtrace.models.BoundaryOpSpec` objects rebuilt on
    every level. ``diff_s`` declares the weak Schatten index of B1 - B2 (rr) or
    B (rn); when omitted it is read off the specs where possible.
    Passing requires |fitted - predicted| to be non-increasing over the
    ladder and within the pair's band at the finest level.
    """
    _check_pair(pair, specs)
    if levels < 2:
        raise ConfigError("a ladder needs at least 2 levels")
    n = cfg.dimension
    if n < 2:
        return DecayReport(pair, m, n, complex(lam), 0.0, None, [], False,
                           note="not applicable: boundary space is finite-dimensional for n = 1")
    rows = []
    t = 0.0
    for level in range(levels):
        c = cfg.refined(level)
        tr = build(c)
        params = [build_boundary_op(sp, tr, c) for sp in specs]
        if level == 0:
            s_decl = diff_s if diff_s is not None else difference_index(pair, specs)
            if s_decl is None and pair == "rn":
                s_decl = params[0].declared_s
            t = (n - 1) / s_decl if s_decl else 0.0
        s = _block_svd_values(tr, pair, params, m, lam)
        alpha = predicted_exponent(pair, m, n, t)
        try:
            fit, r2 = fit_decay_exponent(s, window)
        except TooFewValues:
            fit, r2 = None, None
        above = s[s > S_FLOOR]
        qn = linalg.weak_schatten_quasinorm(above, 1.0 / alpha) if above.size else None
        rows.append(DecayLevel(level, _resolution(c), fit, r2, qn, int(above.size), s.tolist()))
    alpha = predicted_exponent(pair, m, n, t)
    report = DecayReport(pair, m, n, complex(lam), t, alpha, rows, True)
    errs = [None if f is None else abs(f - alpha) for f in report.fitted]
    if any(e is None for e in errs):
        report.monotone, report.passed = False, False
        report.note = "too few resolved singular values on some level"
        return report
    report.monotone = all(errs[i + 1] <= errs[i] for i in range(len(errs) - 1))
    report.band = BAND_IMPROVED if t > 0 else BANDS[pair]
    report.passed = bool(report.monotone and errs[-1] <= report.band)
    return report
