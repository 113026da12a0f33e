"""Command line front end: ``project``, ``gen``, ``bench`` and ``verify``.

All subcommands read and write JSON lines. An input record looks like::

    {"p": 2, "q": 1, "z": [2, 3], "w": [1]}

``project`` adds ``case``, ``lambda``, ``PL``, ``PM_neg``, ``iters``,
``psi_residual``, ``cert`` and ``status``. ``verify`` consumes that output
and recomputes the certificate from scratch.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys
import time

import numpy as np

from .core import AmbientPoint, ConeDims, EsocError, moreau_certificate
from .projector import Case, classify, project_L
from .psi import (Method, PsiProblem, SolverConfig, SolverError, Status,
                  psi_eval, solve)
from .sampling import random_point

log = logging.getLogger("esoc")

CASE_MIXES = {
    "uniform": (Case.DUAL_W_ZERO, Case.PRIMAL_W_ZERO, Case.GENERAL),
    "case1": (Case.DUAL_W_ZERO,),
    "case2": (Case.PRIMAL_W_ZERO,),
    "case3": (Case.GENERAL,),
}


class RecordError(EsocError):
    pass


def parse_point(rec: dict) -> AmbientPoint:
    """Build an :class:`AmbientPoint` from a record, checking ``p``/``q``."""
    try:
        dims = ConeDims(rec["p"], rec["q"])
        z, w = rec["z"], rec["w"]
    except KeyError as exc:
        raise RecordError(f"missing key {exc}") from None
    if not (isinstance(z, list) and isinstance(w, list)):
        raise RecordError("z and w must be arrays")
    try:
        return AmbientPoint(z, w, dims)
    except (TypeError, ValueError) as exc:
        raise RecordError(str(exc)) from None


def _block(rec: dict, key: str, dims: ConeDims) -> AmbientPoint:
    sub = rec.get(key)
    if not isinstance(sub, dict):
        raise RecordError(f"missing object {key!r}")
    return parse_point({"p": dims.p, "q": dims.q, "z": sub.get("z"), "w": sub.get("w")})


def _pt(a: AmbientPoint) -> dict:
    return {"z": a.z.tolist(), "w": a.w.tolist()}


def _dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False)


def _read_records(stream):
    """Yield ``(line_no, record_or_None, error_or_None)``; skips blank lines."""
    for no, line in enumerate(stream, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            yield no, None, f"malformed JSON: {exc}"
            continue
        if not isinstance(rec, dict):
            yield no, None, "record must be a JSON object"
            continue
        yield no, rec, None


def _config(args) -> SolverConfig:
    return SolverConfig(method=args.method, tol=args.solver_tol,
                        max_iter=args.max_iter, lambda0=args.lambda0)


def project_record(rec: dict, cfg: SolverConfig, tol: float) -> dict:
    a = parse_point(rec)
    res = project_L(a, cfg, cert_tol=tol)
    resid = 0.0
    if res.case is Case.GENERAL:
        resid = abs(psi_eval(PsiProblem.from_point(a), res.lam))
    out = {k: rec[k] for k in ("id",) if k in rec}
    out.update({
        "p": a.dims.p, "q": a.dims.q, "z": a.z.tolist(), "w": a.w.tolist(),
        "case": int(res.case),
        "lambda": res.lam,
        "PL": _pt(res.proj_L),
        "PM_neg": _pt(res.proj_M_neg),
        "iters": res.iterations,
        "psi_residual": resid,
        "cert": res.certificate.residuals,
        "status": "ok" if res.certificate.passes(tol) else "cert_failed",
    })
    return out


def cmd_project(args, inp, out) -> int:
    cfg = _config(args)
    failed = False
    for no, rec, err in _read_records(inp):
        if err is None:
            try:
                result = project_record(rec, cfg, args.tol)
                failed |= result["status"] != "ok"
                out.write(_dumps(result) + "\n")
                continue
            except EsocError as exc:
                err = str(exc)
        failed = True
        out.write(_dumps({"line": no, "status": "error", "error": err}) + "\n")
    return 1 if failed else 0


def cmd_gen(args, inp, out) -> int:
    dims = ConeDims(args.p, args.q)
    if args.count < 1:
        raise EsocError("count must be >= 1")
    rng = np.random.default_rng(args.seed)
    mix = CASE_MIXES[args.case_mix]
    for k in range(args.count):
        case = mix[rng.integers(len(mix))] if len(mix) > 1 else mix[0]
        a = random_point(dims, case, rng, max_attempts=args.max_attempts)
        rec = {"id": f"{args.seed}-{k}", "p": dims.p, "q": dims.q,
               "z": a.z.tolist(), "w": a.w.tolist(), "expected_case": int(case)}
        out.write(_dumps(rec) + "\n")
    return 0


def bench_instance(a: AmbientPoint, ident, method: Method, base: SolverConfig,
                   tol: float) -> dict:
    row = {"id": ident, "method": method.value, "iterations": 0,
           "lambda": None, "psi_residual": None,
           "certificate_max_residual": None, "wall_time_ns": 0}
    prob = PsiProblem.from_point(a)
    if classify(a) is not Case.GENERAL:
        row["status"] = "not_case3"
        return row
    cfg = SolverConfig(method, base.tol, base.max_iter, base.lambda0)
    t0 = time.perf_counter_ns()
    try:
        trace = solve(prob, cfg)
    except SolverError as exc:
        row["wall_time_ns"] = time.perf_counter_ns() - t0
        row["status"] = exc.status.value
        return row
    row["wall_time_ns"] = time.perf_counter_ns() - t0
    res = project_L(a, cfg, cert_tol=tol)
    row.update({
        "iterations": trace.iterations,
        "lambda": trace.solution,
        "psi_residual": abs(psi_eval(prob, trace.solution)),
        "certificate_max_residual": res.certificate.max_residual,
        "status": trace.status.value,
    })
    return row


def cmd_bench(args, inp, out) -> int:
    base = _config(args)
    methods = [Method(m) for m in args.methods.split(",")]
    max_iters = {m.value: 0 for m in methods}
    n_case3 = n_picard_ok = 0
    failed = False
    for no, rec, err in _read_records(inp):
        try:
            if err is not None:
                raise RecordError(err)
            a = parse_point(rec)
        except EsocError as exc:
            failed = True
            out.write(_dumps({"line": no, "status": "error", "error": str(exc)}) + "\n")
            continue
        if classify(a) is Case.GENERAL:
            n_case3 += 1
            n_picard_ok += float(np.sum(a.z_abs)) < a.wnorm
        for m in methods:
            row = bench_instance(a, rec.get("id", str(no)), m, base, args.tol)
            if row["status"] == Status.CONVERGED.value:
                max_iters[m.value] = max(max_iters[m.value], row["iterations"])
            out.write(_dumps(row) + "\n")
    summary = {
        "summary": {
            "case3_instances": n_case3,
            "max_iterations": max_iters,
            "picard_applicable_fraction": n_picard_ok / n_case3 if n_case3 else None,
        }
    }
    out.write(_dumps(summary) + "\n")
    return 1 if failed else 0


def verify_record(rec: dict, tol: float) -> dict:
    if rec.get("status") == "error":
        raise RecordError(f"upstream error: {rec.get('error')}")
    a = parse_point(rec)
    primal = _block(rec, "PL", a.dims)
    dual = _block(rec, "PM_neg", a.dims)
    cert = moreau_certificate(a, primal, dual)
    return {
        **{k: rec[k] for k in ("id",) if k in rec},
        "pass": cert.passes(tol),
        "bound": tol * (1.0 + cert.scale),
        "cert": cert.residuals,
    }


def cmd_verify(args, inp, out) -> int:
    n = n_fail = 0
    for no, rec, err in _read_records(inp):
        n += 1
        try:
            if err is not None:
                raise RecordError(err)
            report = verify_record(rec, args.tol)
        except EsocError as exc:
            report = {"line": no, "pass": False, "error": str(exc)}
        report.setdefault("line", no)
        if not report["pass"]:
            n_fail += 1
            out.write(_dumps(report) + "\n")
    out.write(_dumps({"summary": {"records": n, "failed": n_fail, "tol": args.tol}}) + "\n")
    return 1 if n_fail else 0


def _positive_float(s):
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esoc", description="Projection onto extended second order cones.")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--method", default="auto",
                        choices=[m.value for m in Method])
    shared.add_argument("--tol", type=_positive_float, default=1e-10,
                        help="certificate tolerance, relative to 1+||a|| (default 1e-10)")
    shared.add_argument("--solver-tol", type=_positive_float, default=1e-12,
                        help="scalar solver residual tolerance (default 1e-12)")
    shared.add_argument("--max-iter", type=int, default=200)
    shared.add_argument("--lambda0", type=_positive_float, default=1.0)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--input", default="-")
    shared.add_argument("--output", default="-")
    shared.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", parents=[shared], help="project each record onto L")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("gen", parents=[shared], help="generate random instances")
    p.add_argument("-p", type=int, required=True)
    p.add_argument("-q", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--case-mix", choices=sorted(CASE_MIXES), default="uniform")
    p.add_argument("--max-attempts", type=int, default=1000)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", parents=[shared], help="compare scalar solvers")
    p.add_argument("--methods", default="newton,picard,bisection,enumeration")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", parents=[shared], help="re-check projection output")
    p.set_defaults(func=cmd_verify)
    return parser


@contextlib.contextmanager
def _open(path, mode, std):
    if path == "-":
        yield std
    else:
        with open(path, mode) as fh:
            yield fh


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _open(args.input, "r", sys.stdin) as inp, \
                _open(args.output, "w", sys.stdout) as out:
            return args.func(args, inp, out)
    except EsocError as exc:
        print(f"esoc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
