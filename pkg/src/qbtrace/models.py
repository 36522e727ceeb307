"""Discretized elliptic problems as quasi boundary triples.

Three testbeds are provided:

* ``sl1d``: -(a u')' + a0 u on [0, L], two boundary points;
* ``rect2d``: -div(A grad u) + a0 u on a rectangle, five-point stencil,
  corner nodes carry no boundary dof;
* ``disk_modes``: the Laplacian (plus a constant potential) on a disk of
  radius R, separated into angular modes, one radial problem per mode.

Every builder pairs a one-sided conormal difference with the interior
quadrature so that the discrete Green identity holds to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from qbtrace import linalg
from qbtrace.errors import (
    ConfigError,
    DegenerateGrid,
    DimensionMismatch,
    EllipticityViolated,
    NotSelfAdjoint,
)
from qbtrace.linalg import WeightedSpace
from qbtrace.triple import DirectSumTriple, QuasiTriple, RobinParameter

Coefficient = Union[float, Callable]

KINDS = ("sl1d", "rect2d", "disk_modes")


@dataclass(frozen=True)
class ModelConfig:
    """Recipe for a discretized problem.

    ``coefficients`` maps names to constants or callables of the coordinates:
    ``a`` and ``a0`` for sl1d (x); ``a11``, ``a22``, ``a12`` and ``a0`` for
    rect2d (x, y); only a constant ``a0`` for disk_modes.
    """

    kind: str
    N: int = 2
    Nx: int = 3
    Ny: int = 3
    n_r: int = 3
    mode_max: int = 0
    length: float = 1.0
    width: float = 1.0
    radius: float = 1.0
    coefficients: dict = field(default_factory=dict)
    lambdas: tuple = ()
    gamma1_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        for name in ("length", "width", "radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def dimension(self):
        """Ambient dimension n used in the exponent predictions."""
        return 1 if self.kind == "sl1d" else 2

    def refined(self, level):
        """The configuration with resolution multiplied by ``2**level``."""
        f = 2**level
        if self.kind == "sl1d":
            return replace(self, N=self.N * f)
        if self.kind == "rect2d":
            return replace(self, Nx=self.Nx * f, Ny=self.Ny * f)
        return replace(self, n_r=self.n_r * f, mode_max=self.mode_max * f)

    def constant(self, name, default=0.0):
        """Value of a constant coefficient, or ``None`` if it varies."""
        c = self.coefficients.get(name, default)
        return None if callable(c) else float(c)


def _sample(cfg, name, default, *coords):
    c = cfg.coefficients.get(name, default)
    shape = np.broadcast(*coords).shape
    if callable(c):
        vals = np.asarray(c(*coords), dtype=np.float64)
    else:
        vals = np.asarray(c, dtype=np.float64)
    vals = np.broadcast_to(vals, shape).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"coefficient {name} is not finite on the grid")
    return vals


# ------------------------------------------------------------------------ 1D


def build_sl1d(cfg: ModelConfig) -> QuasiTriple:
    if cfg.kind != "sl1d":
        raise ConfigError("build_sl1d needs kind = sl1d")
    n = cfg.N
    if n < 2:
        raise DegenerateGrid("sl1d needs N >= 2")
    h = cfg.length / n
    x = np.linspace(0.0, cfg.length, n + 1)
    a = _sample(cfg, "a", 1.0, 0.5 * (x[:-1] + x[1:]))
    if np.min(a) <= 0:
        raise EllipticityViolated(f"diffusion coefficient min {np.min(a):.3e} <= 0")
    a0 = _sample(cfg, "a0", 0.0, x)

    # flux[i] = a_{i+1/2} (f_{i+1} - f_i) / h^2 feeds rows i and i+1
    T = np.zeros((n - 1, n + 1))
    for i in range(1, n):
        T[i - 1, i - 1] = -a[i - 1] / h**2
        T[i - 1, i] = (a[i - 1] + a[i]) / h**2 + a0[i]
        T[i - 1, i + 1] = -a[i] / h**2
    P = np.zeros((n - 1, n + 1))
    P[np.arange(n - 1), np.arange(1, n)] = 1.0
    g0 = np.zeros((2, n + 1))
    g0[0, 0], g0[0, 1] = a[0] / h, -a[0] / h
    g0[1, n], g0[1, n - 1] = a[-1] / h, -a[-1] / h
    g1 = np.zeros((2, n + 1))
    g1[0, 0] = g1[1, n] = cfg.gamma1_scale
    return QuasiTriple(
        T, P, g0, g1,
        H=WeightedSpace(np.full(n - 1, h)),
        G=WeightedSpace(np.ones(2)),
        label=f"sl1d(N={n})",
    )


def micro_model() -> QuasiTriple:
    """The three-node model on [0, 1] with a = 1, a0 = 0."""
    return build_sl1d(ModelConfig("sl1d", N=2))


# ------------------------------------------------------------------------ 2D


def rect_boundary_nodes(nx, ny):
    """Non-corner boundary nodes, counter-clockwise from the bottom edge."""
    nodes = [(i, 0) for i in range(1, nx)]
    nodes += [(nx, j) for j in range(1, ny)]
    nodes += [(i, ny) for i in range(nx - 1, 0, -1)]
    nodes += [(0, j) for j in range(ny - 1, 0, -1)]
    return nodes


def build_rect2d(cfg: ModelConfig) -> QuasiTriple:
    if cfg.kind != "rect2d":
        raise ConfigError("build_rect2d needs kind = rect2d")
    nx, ny = cfg.Nx, cfg.Ny
    if nx < 3 or ny < 3:
        raise DegenerateGrid("rect2d needs Nx, Ny >= 3")
    lx, ly = cfg.length, cfg.width
    hx, hy = lx / nx, ly / ny
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    xm = 0.5 * (xs[:-1] + xs[1:])
    ym = 0.5 * (ys[:-1] + ys[1:])

    # a11 on vertical cell faces (x_{i+1/2}, y_j), a22 on horizontal faces (x_i, y_{j+1/2})
    a11 = _sample(cfg, "a11", 1.0, xm[:, None], ys[None, :])
    a22 = _sample(cfg, "a22", 1.0, xs[:, None], ym[None, :])
    a12n = _sample(cfg, "a12", 0.0, xs[:, None], ys[None, :])
    if np.any(a12n != 0):
        raise ConfigError("the five-point stencil supports a12 = 0 only")
    if min(np.min(a11), np.min(a22)) <= 0:
        raise EllipticityViolated("a11 and a22 must be positive on every face")
    a0 = _sample(cfg, "a0", 0.0, xs[:, None], ys[None, :])

    interior = [(i, j) for j in range(1, ny) for i in range(1, nx)]
    boundary = rect_boundary_nodes(nx, ny)
    index = {p: k for k, p in enumerate(interior + boundary)}
    nh, ng = len(interior), len(boundary)
    nd = nh + ng

    T = np.zeros((nh, nd))
    for r, (i, j) in enumerate(interior):
        for (ii, jj), c in (
            ((i + 1, j), a11[i, j] / hx**2),
            ((i - 1, j), a11[i - 1, j] / hx**2),
            ((i, j + 1), a22[i, j] / hy**2),
            ((i, j - 1), a22[i, j - 1] / hy**2),
        ):
            T[r, index[(i, j)]] += c
            if (ii, jj) in index:
                T[r, index[(ii, jj)]] -= c
        T[r, index[(i, j)]] += a0[i, j]
    P = np.zeros((nh, nd))
    P[np.arange(nh), np.arange(nh)] = 1.0

    g0 = np.zeros((ng, nd))
    g1 = np.zeros((ng, nd))
    gw = np.zeros(ng)
    for r, (i, j) in enumerate(boundary):
        if j == 0:
            c, nb, gw[r] = a22[i, 0] / hy, (i, 1), hx
        elif j == ny:
            c, nb, gw[r] = a22[i, ny - 1] / hy, (i, ny - 1), hx
        elif i == 0:
            c, nb, gw[r] = a11[0, j] / hx, (1, j), hy
        else:
            c, nb, gw[r] = a11[nx - 1, j] / hx, (nx - 1, j), hy
        g0[r, index[(i, j)]] = c
        g0[r, index[nb]] = -c
        g1[r, index[(i, j)]] = cfg.gamma1_scale
    return QuasiTriple(
        T, P, g0, g1,
        H=WeightedSpace(np.full(nh, hx * hy)),
        G=WeightedSpace(gw),
        label=f"rect2d({nx}x{ny})",
    )


# ---------------------------------------------------------------------- disk


def disk_mode_order(mode_max):
    """Angular modes in the order 0, 1, -1, 2, -2, ..."""
    out = [0]
    for ell in range(1, mode_max + 1):
        out += [ell, -ell]
    return out


def _radial_block(n_r, radius, ell, a0, g1_scale):
    h = radius / (n_r - 0.5)
    r = (np.arange(1, n_r + 1) - 0.5) * h
    r[-1] = radius
    rh = np.concatenate([[0.0], 0.5 * (r[:-1] + r[1:])])  # r_{i-1/2}, with r_{1/2} = 0
    ni = n_r - 1
    T = np.zeros((ni, n_r))
    for i in range(ni):
        lo, hi = rh[i], rh[i + 1]
        T[i, i] = (lo + hi) / (r[i] * h**2) + ell**2 / r[i] ** 2 + a0
        if i > 0:
            T[i, i - 1] = -lo / (r[i] * h**2)
        T[i, i + 1] = -hi / (r[i] * h**2)
    P = np.zeros((ni, n_r))
    P[np.arange(ni), np.arange(ni)] = 1.0
    c = rh[-1] / (h * radius)
    g0 = np.zeros((1, n_r))
    g0[0, -1], g0[0, -2] = c, -c
    g1 = np.zeros((1, n_r))
    g1[0, -1] = g1_scale
    return QuasiTriple(
        T, P, g0, g1,
        H=WeightedSpace(2 * math.pi * r[:-1] * h),
        G=WeightedSpace(np.array([2 * math.pi * radius])),
        label=f"disk_mode(l={ell})",
    )


def build_disk_modes(cfg: ModelConfig) -> DirectSumTriple:
    if cfg.kind != "disk_modes":
        raise ConfigError("build_disk_modes needs kind = disk_modes")
    if cfg.n_r < 3 or cfg.mode_max < 0:
        raise DegenerateGrid("disk_modes needs n_r >= 3 and mode_max >= 0")
    a0 = cfg.constant("a0")
    if a0 is None:
        raise ConfigError("disk_modes supports a constant potential a0 only")
    for name in ("a", "a11", "a22", "a12"):
        if name in cfg.coefficients:
            raise ConfigError(f"disk_modes has no coefficient {name!r}")
    # +l and -l share one radial problem, so they share one block object (and its caches)
    radial = {}
    blocks = []
    for ell in disk_mode_order(cfg.mode_max):
        if abs(ell) not in radial:
            radial[abs(ell)] = _radial_block(cfg.n_r, cfg.radius, abs(ell), a0, cfg.gamma1_scale)
        blocks.append(radial[abs(ell)])
    tr = DirectSumTriple(blocks, label=f"disk_modes(n_r={cfg.n_r}, modes={cfg.mode_max})")
    tr.modes = disk_mode_order(cfg.mode_max)
    return tr


BUILDERS = {"sl1d": build_sl1d, "rect2d": build_rect2d, "disk_modes": build_disk_modes}


def build(cfg: ModelConfig):
    return BUILDERS[cfg.kind](cfg)


# ------------------------------------------------------- boundary operators


@dataclass(frozen=True)
class BoundaryOpSpec:
    """How to build a Robin parameter.

    ``multiplication``: ``beta`` is a constant, an array over the boundary
    dofs, or a callable of the boundary coordinates (x for sl1d, (x, y) for
    rect2d, the angle for disk_modes).
    ``dense``: ``matrix`` is the operator itself.
    ``fourier_decay``: eigenvalues ``amplitude (1 + |l|)^(-1/s) + shift`` on a
    Fourier basis of the boundary.
    """

    variant: str
    beta: object = 0.0
    matrix: Optional[np.ndarray] = None
    s: float = 1.0
    amplitude: float = 1.0
    shift: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.variant not in ("multiplication", "dense", "fourier_decay"):
            raise ConfigError(f"unknown boundary operator variant {self.variant!r}")
        if self.variant == "fourier_decay" and not self.s > 0:
            raise ConfigError("fourier_decay needs s > 0")
        if self.variant == "dense" and self.matrix is None:
            raise ConfigError("dense boundary operator needs a matrix")

    @property
    def constant_value(self):
        """The constant for ``multiplication`` by a constant, else ``None``."""
        if self.variant == "multiplication" and np.ndim(self.beta) == 0 and not callable(self.beta):
            return float(self.beta)
        return None


def boundary_coordinates(tr, cfg: ModelConfig):
    """Coordinates of the boundary dofs in the order of ``tr.G``."""
    if cfg.kind == "sl1d":
        return (np.array([0.0, cfg.length]),)
    if cfg.kind == "rect2d":
        hx, hy = cfg.length / cfg.Nx, cfg.width / cfg.Ny
        nodes = np.array(rect_boundary_nodes(cfg.Nx, cfg.Ny), dtype=float)
        return (nodes[:, 0] * hx, nodes[:, 1] * hy)
    q = 2 * cfg.mode_max + 1
    return (2 * math.pi * np.arange(q) / q,)


def fourier_frequencies(n):
    """Frequencies 0, 1, -1, 2, -2, ... for ``n`` boundary dofs."""
    freq = [0]
    ell = 1
    while len(freq) < n:
        freq.append(ell)
        if len(freq) < n:
            freq.append(-ell)
        ell += 1
    return np.array(freq)


def _boundary_basis(G: WeightedSpace, freqs):
    """Columns orthonormal in G: weighted discrete Fourier modes along the boundary."""
    n = G.dim
    theta = 2 * math.pi * np.arange(n) / n
    e = np.exp(1j * np.outer(theta, freqs)) / math.sqrt(n)
    return e / np.sqrt(G.weights)[:, None]


def _disk_angle_operator(beta_samples, modes):
    """Multiplication by the samples of beta in the Fourier basis (collocation: B[m, l] = bhat[(m - l) mod q])."""
    q = len(beta_samples)
    bhat = np.fft.fft(beta_samples) / q  # bhat[k] = (1/q) sum_j beta_j e^{-2 pi i jk/q}
    m = np.array(modes)
    return bhat[(m[:, None] - m[None, :]) % q]


def build_boundary_op(spec: BoundaryOpSpec, tr, cfg: ModelConfig) -> RobinParameter:
    G = tr.G
    n = G.dim
    declared = None
    if spec.variant == "multiplication":
        c = spec.constant_value
        if c is not None:
            B = c * np.eye(n)
        else:
            if callable(spec.beta):
                beta = np.asarray(spec.beta(*boundary_coordinates(tr, cfg)), dtype=np.complex128)
            else:
                beta = np.asarray(spec.beta, dtype=np.complex128).ravel()
            if beta.shape != (n,):
                raise DimensionMismatch(f"beta has {beta.size} samples, boundary has {n} dofs")
            if np.any(np.abs(beta.imag) > 0) or not np.all(np.isfinite(beta)):
                raise NotSelfAdjoint("beta must be real-valued")
            beta = beta.real
            if cfg.kind == "disk_modes":
                B = _disk_angle_operator(beta, disk_mode_order(cfg.mode_max))
            else:
                B = np.diag(beta)
    elif spec.variant == "dense":
        B = linalg.as_cmatrix(spec.matrix, "dense B")
        if B.shape != (n, n):
            raise DimensionMismatch(f"dense B has shape {B.shape}, boundary has {n} dofs")
    else:
        if cfg.kind == "disk_modes":
            freqs = np.array(disk_mode_order(cfg.mode_max))
        else:
            freqs = fourier_frequencies(n)
        b = spec.amplitude * (1.0 + np.abs(freqs)) ** (-1.0 / spec.s) + spec.shift
        if cfg.kind == "disk_modes":
            B = np.diag(b)
        else:
            E = _boundary_basis(G, freqs)
            B = (E * b[None, :]) @ (np.conj(E).T * G.weights[None, :])
        if spec.shift == 0:
            declared = spec.s
    return RobinParameter(np.asarray(B, dtype=np.complex128), declared, spec.label).check(G)
