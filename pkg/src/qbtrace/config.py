"""INI-style model configuration files.

::

    [model]
    kind = rect2d              ; sl1d | rect2d | disk_modes
    lambda = -1,0; -5,2        ; complex points "re,im" separated by ';'
    gamma1_scale = 1           ; optional, scales the Dirichlet trace

    [geometry]
    Nx = 20                    ; N for sl1d, n_r and mode_max for disk_modes
    Ny = 20
    length = 1                 ; width for rect2d, radius for disk_modes

    [coefficients]
    a11 = 1 + 0.5*x*y          ; constants or expressions in x (and y)
    a0 = 0

    [boundary_op]
    variant = multiplication   ; multiplication | dense | fourier_decay
    beta = 1 + 0.3*cos(theta)  ; x (sl1d), x and y (rect2d), theta (disk_modes)
    ; file = b.txt             ; dense: path relative to this file
    ; s = 1, amplitude = 1, shift = 0   (fourier_decay)
    ; diff_s = 1               ; declared weak Schatten index of B1 - B2

    [boundary_op2]
    ...

Expressions may use numbers, the coordinate names, ``pi``, ``e`` and the
functions ``sin cos tan exp log sqrt sinh cosh tanh abs``.
"""
from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from qbtrace.errors import ConfigError
from qbtrace.models import BoundaryOpSpec, ModelConfig

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh, "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)
COORDS = {"sl1d": ("x",), "rect2d": ("x", "y"), "disk_modes": ("theta",)}


class Expression:
    """A validated arithmetic expression callable on coordinate arrays."""

    def __init__(self, text, variables):
        self.text = text.strip()
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {text!r}") from exc
        allowed = set(_FUNCS) | set(_CONSTS) | set(self.variables)
        for node in ast.walk(tree):
            if not isinstance(node, _NODES):
                raise ConfigError(f"disallowed syntax {type(node).__name__} in {text!r}")
            if isinstance(node, ast.Name) and node.id not in allowed:
                raise ConfigError(f"unknown name {node.id!r} in {text!r}")
            if isinstance(node, ast.Call) and not (
                isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords
            ):
                raise ConfigError(f"only plain calls of {sorted(_FUNCS)} are allowed")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"only numeric literals are allowed in {text!r}")
        self._code = compile(tree, "<expression>", "eval")

    def __call__(self, *coords):
        env = {"__builtins__": {}}
        env.update(_FUNCS)
        env.update(_CONSTS)
        env.update(zip(self.variables, coords))
        return eval(self._code, env)

    def __repr__(self):
        return self.text


def parse_scalar_or_expr(text, variables):
    try:
        return float(text)
    except ValueError:
        return Expression(text, variables)


def parse_complex(text):
    """``"re,im"`` or ``"re"`` to a complex number."""
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"cannot read complex number {text!r}; expected 're,im'")


def parse_lambda_list(text):
    return tuple(parse_complex(p) for p in text.split(";") if p.strip())


def read_dense_matrix(path):
    """Header ``rows cols``, then ``rows`` lines of ``cols`` pairs ``re im``."""
    try:
        lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    try:
        rows, cols = (int(v) for v in lines[0])
        vals = np.array([[float(v) for v in ln] for ln in lines[1:]])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed matrix file {path}") from exc
    if vals.shape != (rows, 2 * cols):
        raise ConfigError(f"{path}: expected {rows} rows of {cols} 're im' pairs")
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def write_dense_matrix(path, b):
    b = np.asarray(b, dtype=np.complex128)
    out = [f"{b.shape[0]} {b.shape[1]}"]
    for row in b:
        out.append(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    Path(path).write_text("\n".join(out) + "\n")


@dataclass
class LoadedConfig:
    model: ModelConfig
    boundary_ops: tuple
    diff_s: Optional[float]
    path: str
    text: str


_GEOMETRY_INT = ("N", "Nx", "Ny", "n_r", "mode_max")
_GEOMETRY_FLOAT = ("length", "width", "radius")


def _boundary_spec(section, kind, base, label):
    variant = section.get("variant", "multiplication").strip()
    known = {"variant", "beta", "file", "s", "amplitude", "shift", "diff_s"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"[{label}] has unknown keys {sorted(extra)}")
    try:
        if variant == "multiplication":
            beta = parse_scalar_or_expr(section.get("beta", "0"), COORDS[kind])
            return BoundaryOpSpec("multiplication", beta=beta, label=label)
        if variant == "dense":
            if "file" not in section:
                raise ConfigError(f"[{label}] dense operator needs 'file'")
            return BoundaryOpSpec("dense", matrix=read_dense_matrix(base / section["file"]), label=label)
        return BoundaryOpSpec(
            variant,
            s=float(section.get("s", "1")),
            amplitude=float(section.get("amplitude", "1")),
            shift=float(section.get("shift", "0")),
            label=label,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{label}]: {exc}") from exc


def loads(text, path="<string>"):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = set(cp.sections()) - {"model", "geometry", "coefficients", "boundary_op", "boundary_op2"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    if not cp.has_section("model") or "kind" not in cp["model"]:
        raise ConfigError("config needs [model] with 'kind'")
    m = cp["model"]
    kind = m["kind"].strip()
    if kind not in COORDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    kw = {"kind": kind}
    try:
        if "lambda" in m:
            kw["lambdas"] = parse_lambda_list(m["lambda"])
        if "gamma1_scale" in m:
            kw["gamma1_scale"] = float(m["gamma1_scale"])
        if cp.has_section("geometry"):
            for key, val in cp["geometry"].items():
                if key in _GEOMETRY_INT:
                    kw[key] = int(val)
                elif key in _GEOMETRY_FLOAT:
                    kw[key] = float(val)
                else:
                    raise ConfigError(f"unknown geometry key {key!r}")
        coeffs = {}
        if cp.has_section("coefficients"):
            variables = ("x",) if kind == "sl1d" else ("x", "y")
            for key, val in cp["coefficients"].items():
                coeffs[key] = parse_scalar_or_expr(val, variables)
        kw["coefficients"] = coeffs
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    model = ModelConfig(**kw)
    base = Path(path).parent if path != "<string>" else Path(".")
    ops = []
    diff_s = None
    for name in ("boundary_op", "boundary_op2"):
        if cp.has_section(name):
            sec = dict(cp[name])
            ops.append(_boundary_spec(sec, kind, base, name))
            if "diff_s" in sec:
                diff_s = float(sec["diff_s"])
    if len(ops) == 1 and not cp.has_section("boundary_op"):
        raise ConfigError("[boundary_op2] given without [boundary_op]")
    return LoadedConfig(model, tuple(ops), diff_s, str(path), text)


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, path)


def describe_model(cfg: ModelConfig):
    """JSON-friendly view of a model configuration."""
    d = {"kind": cfg.kind}
    if cfg.kind == "sl1d":
        d.update(N=cfg.N, length=cfg.length)
    elif cfg.kind == "rect2d":
        d.update(Nx=cfg.Nx, Ny=cfg.Ny, length=cfg.length, width=cfg.width)
    else:
        d.update(n_r=cfg.n_r, mode_max=cfg.mode_max, radius=cfg.radius)
    d["coefficients"] = {k: (repr(v) if isinstance(v, Expression) else v) for k, v in sorted(cfg.coefficients.items())}
    d["lambdas"] = [[z.real, z.imag] for z in cfg.lambdas]
    d["gamma1_scale"] = cfg.gamma1_scale
    d["dimension"] = cfg.dimension
    return d
