"""``quantk (verify|nerve|pair|index|bound) [flags] --out FILE``.

Every command writes one JSON report with ``"schema": "quantk/1"``.  The
only field that changes between identical runs is ``"timestamp"``.

Exit status
-----------
0  the command ran and every gating check passed
1  a check or certificate failed (the report says which)
2  usage error or malformed input
3  ``pair`` refused non-pairable parameters (no ``--override``)
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import io
from .errors import CertificationError, PairabilityError, QuantkError, ValidationError
from .params import ParameterTuple, fmt, parse_rational

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNPAIRABLE = 0, 1, 2, 3


def _envelope(command: str, arguments: dict, result: dict, passed: bool) -> dict:
    return {
        "schema": io.SCHEMA,
        "command": command,
        "arguments": arguments,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "passed": bool(passed),
        "result": result,
    }


def _fraction_arg(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError, QuantkError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


# ------------------------------------------------------------------ verify

def cmd_verify(args) -> tuple[dict, int]:
    from .suites import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports, timings = {}, {}
    for name in names:
        t0 = time.perf_counter()
        reports[name] = run_suite(name, seed=args.seed, trials=args.trials, workers=args.workers)
        timings[name] = time.perf_counter() - t0
        print(f"{name}: {reports[name]['trials']} trials, "
              f"{'pass' if reports[name]['passed'] else 'FAIL'}", file=sys.stderr)
    if args.timings:
        # wall-clock times stay out of the report so reports are reproducible
        io.write_report({"seconds": timings}, args.timings)
    passed = all(r["passed"] for r in reports.values())
    result = reports[names[0]] if len(names) == 1 else {"suites": reports}
    arguments = {"suite": args.suite, "seed": args.seed, "trials": args.trials}
    return _envelope("verify", arguments, result, passed), EXIT_OK if passed else EXIT_FAIL


# ------------------------------------------------------------------- nerve

def cmd_nerve(args) -> tuple[dict, int]:
    from .metric import cover_stats
    from .nerve import build_nerve, certify_lipschitz_nerve_map, partition_of_unity

    space = io.space_from_json(io.read_json(args.space), args.space)
    cover = io.cover_from_json(io.read_json(args.cover), space, args.cover)
    stats = cover_stats(space, cover, args.h)
    cx = build_nerve(space, cover)
    pou = partition_of_unity(space, cover)
    cert = certify_lipschitz_nerve_map(space, cover, args.claimed_L, grid=args.grid)
    sums = pou.weights.sum(axis=0)
    partition = {
        "names": list(pou.names),
        "points": list(space.point_ids),
        "weights": pou.weights.T,
        "max_abs_sum_minus_1": float(np.abs(sums - 1.0).max(initial=0.0)),
    }
    result = {
        "space": {"name": space.name, "points": len(space), "diameter": space.diameter},
        "cover_stats": {"lebesgue": stats.lebesgue, "multiplicity": stats.multiplicity,
                        "h": stats.h, "dimension": stats.dimension},
        "nerve": io.nerve_to_json(cx),
        "partition_of_unity": partition,
        "lipschitz": {"lhs": cert["max_ratio"], "rhs": cert["claimed_L"], "relation": "<=",
                      **cert},
    }
    arguments = {"space": args.space, "cover": args.cover, "h": args.h,
                 "claimed_L": args.claimed_L, "grid": args.grid}
    passed = cert["passed"]
    return _envelope("nerve", arguments, result, passed), EXIT_OK if passed else EXIT_FAIL


# -------------------------------------------------------------------- pair

def cmd_pair(args) -> tuple[dict, int]:
    from .pairing import LipschitzClass, pair_to_integer, pairability_report
    from .quantitative import KClassQuantitative, certify

    arguments = {"P": args.P, "p": args.p, "params": args.params, "space": args.space,
                 "override": args.override}
    ext = io.space_from_json(io.read_json(args.space), args.space) if args.space else None
    space, _, _, plus, minus = io.quasi_class_from_json(io.read_json(args.P), args.P, ext)
    p1, p2 = io.lipschitz_from_json(io.read_json(args.p), space, args.p)
    params = io.params_from_json(io.read_json(args.params), args.params)
    lc = LipschitzClass(p1, p2)
    if params.L is None:
        params = ParameterTuple(params.epsilon, params.r, params.N, Fraction(lc.L))
    qc = KClassQuantitative(certify(plus, params), certify(minus, params))
    inputs = {"plus": qc.plus.certificate.as_json(), "minus": qc.minus.certificate.as_json(),
              "lipschitz_L": lc.L, "params": params.as_json()}
    for side in ("plus", "minus"):
        if not getattr(qc, side).valid and not args.override:
            result = {"inputs": inputs, "error": f"{side} class fails its certificate"}
            return _envelope("pair", arguments, result, False), EXIT_FAIL
    try:
        k, report = pair_to_integer(qc, lc, params, override=args.override, with_report=True)
    except PairabilityError as exc:
        result = {"inputs": inputs, "pairability": exc.report, "error": str(exc)}
        pr = exc.report
        print(f"not pairable: {pr['lhs']} < {pr['rhs']} is false "
              f"(epsilon' = {pr['epsilon_prime']}); use --override to proceed", file=sys.stderr)
        return _envelope("pair", arguments, result, False), EXIT_UNPAIRABLE
    except CertificationError as exc:
        result = {"inputs": inputs, "chain": exc.report, "error": str(exc),
                  "pairability": pairability_report(params)}
        return _envelope("pair", arguments, result, False), EXIT_FAIL
    result = {"inputs": inputs, "integer": k, "chain": report}
    return _envelope("pair", arguments, result, True), EXIT_OK


# ------------------------------------------------------------------- index

def cmd_index(args) -> tuple[dict, int]:
    from .index_models import build_wilson_torus, index_pairing

    arguments = {"model": args.model, "size": args.size, "flux": args.flux,
                 "params": args.params, "degree": args.degree}
    G, bott = build_wilson_torus(args.size, args.flux)
    params = io.params_from_json(io.read_json(args.params), args.params) if args.params else None
    res = index_pairing(G, bott, degree=args.degree, params=params)
    result = {"integer": res["pairing"], "oracle": res["oracle"],
              "match": {"lhs": res["pairing"], "rhs": res["oracle"], "relation": "==",
                        "passed": res["match"]},
              "params": res["params"], "index": res["index"], "chain": res["pairing_report"],
              "oracle_report": res["oracle_report"], "model": G.meta}
    if args.fixture:
        fixture = {"model": args.model, "size": args.size, "flux": args.flux,
                   "oracle_index": res["oracle"], "oracle_meta": res["oracle_report"]}
        io.write_report(fixture, args.fixture)
    passed = res["match"]
    return _envelope("index", arguments, result, passed), EXIT_OK if passed else EXIT_FAIL


# ------------------------------------------------------------------- bound

def cmd_bound(args) -> tuple[dict, int]:
    from .bounds import curvature_bound, k_bound_closed, k_bound_main

    constants = io.constants_from_json(io.read_json(args.constants), args.constants)
    _, main = k_bound_main(args.R, args.m, constants, with_report=True)
    result = {"k_main": main}
    if args.l is not None:
        result["k_closed"] = k_bound_closed(args.R, args.m, args.l, constants, with_report=True)[1]
    if args.lam is not None:
        result["curvature"] = curvature_bound(args.R, args.m, args.lam, constants,
                                              with_report=True)[1]
    arguments = {"R": fmt(args.R), "m": args.m, "l": args.l,
                 "lambda": None if args.lam is None else fmt(args.lam),
                 "constants": args.constants}
    return _envelope("bound", arguments, result, True), EXIT_OK


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    from .suites import SUITES

    parser = _Parser(prog="quantk", description="Quantitative K-theory verification harness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", default="-", help="report file ('-' for stdout)")
        return p

    p = add("verify", "run a seeded property suite")
    p.add_argument("--suite", required=True, choices=list(SUITES) + ["all"])
    p.add_argument("--trials", type=int, default=None, help="override the suite's trial count")
    p.add_argument("--seed", type=int, default=0, help="global 64-bit seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timings", default=None, help="write wall-clock seconds per suite here")
    p.set_defaults(func=cmd_verify)

    p = add("nerve", "cover statistics, nerve and Lipschitz certification")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--h", type=float, default=None, help="multiplicity scale (default: Lebesgue)")
    p.add_argument("--claimed-L", dest="claimed_L", type=float, default=None)
    p.add_argument("--grid", type=int, default=8, help="waypoints per edge")
    p.set_defaults(func=cmd_nerve)

    p = add("pair", "pair a quantitative class with a Lipschitz class")
    p.add_argument("--P", required=True, help="quasiidempotent class file")
    p.add_argument("--p", required=True, help="Lipschitz projection class file")
    p.add_argument("--params", required=True)
    p.add_argument("--space", default=None, help="space file when the class names its space")
    p.add_argument("--override", action="store_true",
                   help="pair non-pairable parameters if the final defect is below 1/4")
    p.set_defaults(func=cmd_pair)

    p = add("index", "quantitative index of a lattice model paired with its Bott class")
    p.add_argument("--model", required=True, choices=["wilson-torus"])
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--flux", type=int, required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--degree", type=int, default=41, help="polynomial degree budget")
    p.add_argument("--fixture", default=None, help="also write a model fixture file")
    p.set_defaults(func=cmd_index)

    p = add("bound", "exact curvature thresholds")
    p.add_argument("--R", type=_fraction_arg, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--l", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=_fraction_arg, default=None)
    p.add_argument("--constants", required=True)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, code = args.func(args)
    except ValidationError as exc:
        print(f"quantk {args.command}: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(io.to_jsonable(exc.diagnostics), sort_keys=True), file=sys.stderr)
        return EXIT_USAGE
    except QuantkError as exc:
        print(f"quantk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        io.write_report(report, args.out)
    except QuantkError as exc:
        print(f"quantk {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return code


if __name__ == "__main__":
    raise SystemExit(main())
