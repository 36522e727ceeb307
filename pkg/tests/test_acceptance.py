"""Acceptance criteria, one test per criterion, each reporting a PASS/FAIL line."""
import time
from pathlib import Path

import numpy as np
import pytest

from qbtrace import calculus as C
from qbtrace import config, linalg, spectral, triple
from qbtrace.models import BoundaryOpSpec, ModelConfig, build, build_boundary_op, micro_model

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SHIPPED = ["micro.ini", "sl1d.ini", "rect2d.ini", "rect2d_dense.ini", "disk.ini"]


def load(name):
    loaded = config.load(CONFIGS / name)
    tr = build(loaded.model)
    return loaded, tr, [build_boundary_op(s, tr, loaded.model) for s in loaded.boundary_ops]


def rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))


def test_criterion_1_micro_model(criterion):
    t0 = time.perf_counter()
    tr = micro_model()
    eye = np.eye(2)
    checks = {
        "M(4)": np.abs(triple.weyl(tr, 4.0) - np.array([[0, -0.5], [-0.5, 0]])).max(),
        "krein_dn": abs(triple.krein_dn(tr, 4.0)[0, 0] + 0.5),
        "krein_robin": abs(triple.krein_robin(tr, eye, 4.0)[0, 0] - 1 / 6),
    }
    dn = spectral.trace_formula_check(tr, "dn", [], 1, 4.0)
    rd = spectral.trace_formula_check(tr, "rd", [eye], 1, 4.0)
    checks["trace_dn"] = max(abs(dn.lhs + 0.5), abs(dn.rhs + 0.5))
    checks["trace_rd"] = max(abs(rd.lhs + 1 / 3), abs(rd.rhs + 1 / 3))
    elapsed = time.perf_counter() - t0
    worst = max(checks.values())
    ok = worst <= 1e-12 and elapsed < 1.0
    criterion(1, ok, f"micro model worst abs error {worst:.2e} (tol 1e-12), {elapsed:.3f}s (< 1 s)")
    assert ok, checks


def test_criterion_2_identity_suite(criterion):
    cases = [
        (ModelConfig("sl1d", N=200, coefficients={"a": lambda x: 1 + x**2, "a0": lambda x: np.sin(3 * x)}),
         [BoundaryOpSpec("multiplication", beta=lambda x: 1 + x),
          BoundaryOpSpec("multiplication", beta=lambda x: 3 + np.cos(5 * x))]),
        (config.load(CONFIGS / "rect2d.ini").model, config.load(CONFIGS / "rect2d.ini").boundary_ops),
        (config.load(CONFIGS / "disk.ini").model, config.load(CONFIGS / "disk.ini").boundary_ops),
    ]
    worst, where = 0.0, None
    for cfg, specs in cases:
        tr = build(cfg)
        params = [build_boundary_op(s, tr, cfg) for s in specs]
        for pair in spectral.PAIRS:
            for m in (1, 2, 3, 4):
                for lam in (-1.0, -5 + 2j):
                    rep = spectral.trace_formula_check(tr, pair, params[: spectral.N_PARAMS[pair]], m, lam)
                    if rep.rel_discrepancy >= worst:
                        worst, where = rep.rel_discrepancy, (cfg.kind, pair, m, lam)
    ok = worst <= 1e-8
    criterion(2, ok, f"trace identities, 3 models x 4 pairs x m=1..4 x 2 lambdas: worst rel {worst:.2e} at {where} (tol 1e-8)")
    assert ok


def test_criterion_3_derivative_oracle(criterion):
    worst, where = 0.0, None
    for name in SHIPPED:
        loaded, tr, params = load(name)
        lam = loaded.model.lambdas[0]
        b1 = params[0].B
        b2 = params[1].B if len(params) > 1 else 0.5 * b1
        exprs = {"M": C.Weyl(), "S": C.S(), "T_B": C.T_B(b1), "U": C.U(b1, b2), "V": C.V(b1)}
        for ename, e in exprs.items():
            for k in (1, 2, 3):
                exact = C.derivative(e, k, tr, lam)
                fd = C.fd_derivative(e, k, tr, lam, scheme="circle")
                r = rel(exact, fd)
                if r >= worst:
                    worst, where = r, (name, ename, k)
    ok = worst <= 1e-6
    criterion(3, ok, f"exact vs finite-difference derivatives, {len(SHIPPED)} models, k<=3: worst rel {worst:.2e} at {where} (tol 1e-6)")
    assert ok


def test_criterion_4_continuum_anchor(criterion):
    errs = []
    for n in (100, 200, 400):
        cfg = ModelConfig("sl1d", N=n, coefficients={"a": 1.0, "a0": 0.0})
        rep = spectral.trace_formula_check(build(cfg), "dn", [], 1, -1.0, cfg)
        errs.append(abs(rep.lhs - 1.0))
    ok = errs[-1] <= 1e-3 and errs[0] > errs[1] > errs[2]
    criterion(4, ok, "sl1d D/N trace vs 1 at N=100,200,400: " + ", ".join(f"{e:.2e}" for e in errs) + " (<=1e-3, decreasing)")
    assert ok


@pytest.mark.slow
def test_criterion_5_decay_exponents(criterion):
    t0 = time.perf_counter()
    base = ModelConfig("disk_modes", n_r=256, mode_max=32)
    cases = [
        ("dn", []),
        ("rr", [BoundaryOpSpec("multiplication", beta=1.0), BoundaryOpSpec("multiplication", beta=2.0)]),
        ("rr", [BoundaryOpSpec("fourier_decay", s=1.0, shift=1.0), BoundaryOpSpec("multiplication", beta=1.0)]),
    ]
    ok, parts = True, []
    for pair, specs in cases:
        rep = spectral.singular_value_ladder(base, pair, specs, 1, -1.0, 3)
        ok &= bool(rep.passed)
        parts.append(
            f"{pair}(t={rep.t:g}) alpha={rep.predicted_exponent:g} fitted="
            + "/".join(f"{f:.3f}" for f in rep.fitted)
            + f" band {rep.band:g} {'ok' if rep.passed else 'FAIL'}"
        )
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 15 * 60
    criterion(5, ok, "; ".join(parts) + f"; {elapsed:.0f}s (<= 900 s)")
    assert ok


def test_criterion_6_property_suite(criterion):
    rng = np.random.default_rng(2024)
    worst = {"green": 0.0, "weyl_sym": 0.0, "weyl_diff": 0.0, "zero": 0.0, "telescope": 0.0}
    green_ok, sa_ok = True, True
    for name in SHIPPED:
        loaded, tr, params = load(name)
        if loaded.model.gamma1_scale != 1.0:
            continue
        rep = triple.check_green_identity(tr, samples=16, tol=1e-12, seed=int(rng.integers(1 << 30)))
        green_ok &= rep.passed
        worst["green"] = max(worst["green"], rep.max_residual / rep.scale)
        dense = tr.to_dense()
        for p in params:
            a = triple.restrict_to_kernel(dense, "robin", p)
            sa_ok &= linalg.is_self_adjoint(a, dense.H, 1e-10)
        for _ in range(3):
            lam = complex(rng.uniform(-6, -0.5), rng.uniform(-3, 3))
            mu = complex(rng.uniform(-6, -0.5), rng.uniform(-3, 3))
            m = triple.weyl(tr, lam)
            worst["weyl_sym"] = max(worst["weyl_sym"], rel(linalg.weighted_adjoint(m, tr.G, tr.G), triple.weyl(tr, np.conj(lam))))
            lhs = m - triple.weyl(tr, np.conj(mu))
            rhs = (lam - np.conj(mu)) * linalg.weighted_adjoint(triple.gamma(tr, mu), tr.H, tr.G) @ triple.gamma(tr, lam)
            worst["weyl_diff"] = max(worst["weyl_diff"], rel(lhs, rhs))
        lam = complex(rng.uniform(-4, -1), 0.5)
        z = spectral.trace_formula_check(tr, "rr", [params[0], params[0]], 1, lam)
        worst["zero"] = max(worst["zero"], abs(z.lhs), abs(z.rhs))
        rd = spectral.trace_formula_check(tr, "rd", params[:1], 2, lam)
        rn = spectral.trace_formula_check(tr, "rn", params[:1], 2, lam)
        dn = spectral.trace_formula_check(tr, "dn", [], 2, lam)
        worst["telescope"] = max(worst["telescope"], abs(rd.rhs - rn.rhs - dn.rhs) / max(1.0, abs(rd.rhs)))
    ok = (green_ok and sa_ok and worst["weyl_sym"] <= 1e-10 and worst["weyl_diff"] <= 1e-10
          and worst["zero"] == 0.0 and worst["telescope"] <= 1e-10)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion(6, ok, f"green {'ok' if green_ok else 'FAIL'}, A_[B] self-adjoint {'ok' if sa_ok else 'FAIL'}; {detail}")
    assert ok
