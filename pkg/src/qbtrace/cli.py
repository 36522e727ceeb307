"""Command-line entry point.

Subcommands ``green``, ``krein``, ``trace``, ``decay`` and ``all`` each write
one JSON document ``{"manifest": ..., "results": [...], "pass": ...}``
(to ``--out`` or stdout). ``decay`` also writes the singular values as CSV
with columns ``k,s_k,level`` next to the JSON report.

Exit status: 0 pass, 1 verification failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from qbtrace import __version__, config, spectral, triple
from qbtrace.errors import ConfigError, DimensionMismatch, QBTError
from qbtrace.models import build, build_boundary_op

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TRACE_TOL = 1e-8
KREIN_TOL = 1e-10


class UsageError(Exception):
    pass


def _lambda_arg(text):
    try:
        return config.parse_complex(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parser():
    p = argparse.ArgumentParser(prog="qbtrace", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=True, help="model config file (INI)")
        sp.add_argument("--lambda", dest="lambdas", action="append", type=_lambda_arg,
                        metavar="RE,IM", help="spectral parameter; repeatable (overrides the config)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="JSON report path (default: stdout)")
        sp.add_argument("--record-time", action="store_true",
                        help="store wall time in the manifest (reports are then not reproducible byte for byte)")

    g = sub.add_parser("green", help="sample the discrete Green identity")
    common(g)
    g.add_argument("--samples", type=int, default=32)
    g.add_argument("--tol", type=float, default=1e-12)

    k = sub.add_parser("krein", help="Krein formulas against direct resolvent differences")
    common(k)
    k.add_argument("--tol", type=float, default=KREIN_TOL)

    t = sub.add_parser("trace", help="both sides of a trace formula")
    common(t)
    t.add_argument("--pair", choices=spectral.PAIRS, default="dn")
    t.add_argument("--m", type=int, default=1)
    t.add_argument("--tol", type=float, default=TRACE_TOL)

    d = sub.add_parser("decay", help="singular-value decay ladder")
    common(d)
    d.add_argument("--pair", choices=spectral.PAIRS, default="dn")
    d.add_argument("--m", type=int, default=1)
    d.add_argument("--levels", type=int, default=3)

    a = sub.add_parser("all", help="green, krein and trace for every available pair")
    common(a)
    a.add_argument("--m", type=int, default=1)
    a.add_argument("--samples", type=int, default=32)
    a.add_argument("--tol", type=float, default=None, help="trace tolerance")
    a.add_argument("--green-tol", type=float, default=1e-12)
    a.add_argument("--levels", type=int, default=0, help="also run decay ladders with this many levels")
    return p


# ------------------------------------------------------------------ helpers


def _lambdas(args, loaded):
    lams = tuple(args.lambdas) if args.lambdas else loaded.model.lambdas
    if not lams:
        raise UsageError("no spectral parameter: pass --lambda or set 'lambda' in [model]")
    return lams


def _params_for(pair, loaded, tr):
    need = spectral.N_PARAMS[pair]
    if len(loaded.boundary_ops) < need:
        raise UsageError(f"pair {pair} needs {need} boundary operator section(s) in the config")
    return [build_boundary_op(s, tr, loaded.model) for s in loaded.boundary_ops[:need]]


def _available_pairs(loaded):
    n = len(loaded.boundary_ops)
    return [p for p in spectral.PAIRS if spectral.N_PARAMS[p] <= n]


def _rel(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def _c(z):
    return [float(z.real), float(z.imag)]


# ------------------------------------------------------------------ commands


def run_green(loaded, args, tr):
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    tol = args.tol if args.command == "green" else args.green_tol
    rep = triple.check_green_identity(tr, samples=args.samples, tol=tol, seed=args.seed)
    return [{
        "check": "green",
        "max_residual": rep.max_residual,
        "scale": rep.scale,
        "tol": rep.tol,
        "samples": rep.samples,
        "pass": rep.passed,
    }]


def run_krein(loaded, args, tr, lams):
    tol = args.tol if args.command == "krein" else KREIN_TOL
    out = []
    dense = tr.to_dense() if isinstance(tr, triple.DirectSumTriple) else tr
    params = [build_boundary_op(s, tr, loaded.model) for s in loaded.boundary_ops]
    for lam in lams:
        rn = triple.realization(dense, "N")
        direct = rn.resolvent_power(lam, 1) - triple.realization(dense, "D").resolvent_power(lam, 1)
        r = _rel(triple.krein_dn(tr, lam), direct)
        out.append({"check": "krein_dn", "lambda": _c(lam), "residual": r, "pass": r <= tol})
        for p in params:
            direct = triple.realization(dense, "B", p).resolvent_power(lam, 1) - rn.resolvent_power(lam, 1)
            left = triple.krein_robin(tr, p, lam, "left")
            right = triple.krein_robin(tr, p, lam, "right")
            r = max(_rel(left, direct), _rel(right, direct))
            out.append({"check": "krein_robin", "operator": p.label, "lambda": _c(lam),
                        "residual": r, "left_right": _rel(left, right), "pass": r <= tol})
    return out


def run_trace(loaded, args, tr, lams, pairs, m, tol):
    if m < 1:
        raise UsageError("--m must be >= 1")
    out = []
    for pair in pairs:
        params = _params_for(pair, loaded, tr)
        for lam in lams:
            rep = spectral.trace_formula_check(tr, pair, params, m, lam, loaded.model)
            d = {"check": "trace", **rep.to_dict(), "tol": tol, "pass": rep.passed(tol)}
            out.append(d)
    return out


def run_decay(loaded, args, lams, pair, m, levels):
    if levels < 2:
        raise UsageError("--levels must be >= 2")
    if m < 1:
        raise UsageError("--m must be >= 1")
    need = spectral.N_PARAMS[pair]
    if len(loaded.boundary_ops) < need:
        raise UsageError(f"pair {pair} needs {need} boundary operator section(s) in the config")
    out, rows = [], []
    for lam in lams:
        rep = spectral.singular_value_ladder(
            loaded.model, pair, list(loaded.boundary_ops[:need]), m, lam, levels, diff_s=loaded.diff_s
        )
        d = {"check": "decay", **rep.to_dict()}
        d["pass"] = bool(rep.passed) if rep.applicable else True
        out.append(d)
        for lv in rep.levels:
            for k, s in enumerate(lv.s_values, start=1):
                rows.append((k, s, lv.level, _c(rep.lam)))
    return out, rows


def _write_csv(path, rows, multi_lambda):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "s_k", "level"] + (["lambda_re", "lambda_im"] if multi_lambda else []))
    for k, s, level, lam in rows:
        w.writerow([k, repr(float(s)), level] + (lam if multi_lambda else []))
    Path(path).write_text(buf.getvalue())


def _csv_path(args):
    if args.out:
        return str(Path(args.out).with_suffix(".csv"))
    return None


def _manifest(args, loaded, outputs, wall):
    m = {
        "command": args.command,
        "config": loaded.path,
        "config_sha256": hashlib.sha256(loaded.text.encode()).hexdigest(),
        "model": config.describe_model(loaded.model),
        "boundary_ops": [s.label or s.variant for s in loaded.boundary_ops],
        "seed": args.seed,
        "outputs": outputs,
        "version": __version__,
    }
    for key in ("pair", "m", "levels", "samples", "tol"):
        if hasattr(args, key):
            m[key] = getattr(args, key)
    if args.record_time:
        m["wall_time_s"] = wall
    return m


def _dispatch(args):
    loaded = config.load(args.model)
    t0 = time.perf_counter()
    results = []
    outputs = [args.out] if args.out else []
    cmd = args.command
    if cmd in ("green", "all"):
        tr = build(loaded.model)
        results += run_green(loaded, args, tr)
    if cmd == "krein" or cmd == "all":
        tr = build(loaded.model)
        results += run_krein(loaded, args, tr, _lambdas(args, loaded))
    if cmd == "trace":
        tr = build(loaded.model)
        results += run_trace(loaded, args, tr, _lambdas(args, loaded), [args.pair], args.m, args.tol)
    if cmd == "all":
        tol = TRACE_TOL if args.tol is None else args.tol
        results += run_trace(loaded, args, tr, _lambdas(args, loaded), _available_pairs(loaded), args.m, tol)
    rows = None
    if cmd == "decay" or (cmd == "all" and args.levels):
        pairs = [args.pair] if cmd == "decay" else _available_pairs(loaded)
        rows = []
        for pair in pairs:
            res, r = run_decay(loaded, args, _lambdas(args, loaded), pair, args.m, args.levels)
            results += res
            rows += r
        csv_path = _csv_path(args)
        if csv_path:
            outputs.append(csv_path)
    wall = time.perf_counter() - t0
    passed = bool(results) and all(r["pass"] for r in results)
    doc = {"manifest": _manifest(args, loaded, outputs, wall), "results": results, "pass": passed}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        if rows is not None:
            multi = len({tuple(r[3]) for r in rows}) > 1
            _write_csv(_csv_path(args), rows, multi)
    else:
        sys.stdout.write(text)
    return EXIT_PASS if passed else EXIT_FAIL


def _glue_negative_lambdas(argv):
    # "--lambda -1,0" would otherwise be read as an unknown option
    out = []
    it = iter(argv)
    for a in it:
        if a == "--lambda":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--lambda={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None):
    parser = _parser()
    argv = _glue_negative_lambdas(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_PASS
    try:
        code = _dispatch(args)
    except (UsageError, ConfigError, DimensionMismatch) as exc:
        print(f"qbtrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QBTError as exc:
        print(f"qbtrace: verification aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        print(f"qbtrace {args.command}: {'PASS' if code == EXIT_PASS else 'FAIL'} -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
