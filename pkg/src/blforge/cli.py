"""Command-line front end: a thin client over the service handlers.

Reports go to stdout as JSON, logs to stderr; --out also writes the report
to a file. Exit codes: 0 when the analysis completed and every asserted
inequality/certificate held, 1 when a checked inequality or certificate
failed (the report names it), 2 for invalid input.
"""

import os

if os.environ.get("BLFORGE_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["BLFORGE_THREADS"])

import argparse
import json
import sys

from .errors import BLForgeError, InvalidDatumError, ParseError
from .service import (BudgetModel, CaffarelliRequest, CheckRequest, DatumModel,
                      GaussianMeasureRequest, HCRequest, HeatflowRequest,
                      InputModel, OptConfigModel, OptRequest, ReduceRequest,
                      StructureRequest, VerifyRequest, run_command)

INPUT_ERRORS = {
    "ParseError", "InvalidDatum", "InvalidParams", "DimensionMismatch",
    "AsymmetricMatrix", "NotSPD", "NotPSD", "UnsupportedDimension",
    "DimensionTooLarge", "TooManyFactors", "QcalPresent", "EmptyList",
    "MassMismatch", "BetaNotAboveOne", "ConditionViolated",
    "NonIntegerExponentWithClosedForm", "InfeasibleB", "NotCritical",
    "NotGeometric", "UnknownCommand",
}


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def _inline_or_file(text):
    text = text.strip()
    if text.startswith("[") or text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid inline JSON: {exc}") from exc
    return _load_json(text)


def _datum_model(path) -> DatumModel:
    return DatumModel(**_load_json(path))


def _input_models(obj):
    if isinstance(obj, dict) and "inputs" in obj:
        obj = obj["inputs"]
    return [InputModel(**item) for item in obj]


def _budget(args) -> BudgetModel:
    return BudgetModel(samples=args.samples, seed=args.seed, lattice_cap=args.lattice_cap)


def _opt_config(args) -> OptConfigModel:
    return OptConfigModel(starts=args.starts, seed=args.seed, kkt_tol=args.tol_kkt)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blforge", allow_abbrev=False,
        description="Regularized Brascamp-Lieb constants: probe, optimize, certify, verify.")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomized phases")
    parser.add_argument("--starts", type=int, default=16, help="optimizer multi-starts")
    parser.add_argument("--samples", type=int, default=10000, help="finiteness probe samples")
    parser.add_argument("--lattice-cap", type=int, default=4096, help="kernel lattice cap")
    parser.add_argument("--tol-psd", type=float, default=1e-9, help="semidefinite order tolerance")
    parser.add_argument("--tol-kkt", type=float, default=1e-6, help="certificate tolerance")
    parser.add_argument("--method", choices=["closed", "quad", "mc", "auto"], default="auto")
    parser.add_argument("--out", help="also write the report to this path")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("check", help="finiteness verdict and critical subspaces")
    p.add_argument("datum")
    p = sub.add_parser("opt", help="maximize the Gaussian ratio and certify")
    p.add_argument("datum")
    p = sub.add_parser("verify", help="forward inequality on function inputs")
    p.add_argument("datum")
    p.add_argument("inputs")
    p.add_argument("--bl", type=float, default=None)
    p = sub.add_parser("reverse", help="dual sup-convolution inequality")
    p.add_argument("datum")
    p.add_argument("inputs")
    p.add_argument("--bl", type=float, default=None)
    p = sub.add_parser("reduce", help="reduce at a certified tuple to geometric form")
    p.add_argument("datum")
    p.add_argument("--B", default=None, help="JSON list of per-factor matrices (file or inline)")
    p = sub.add_parser("structure", help="equality-case skeleton of a geometric datum")
    p.add_argument("datum")
    p = sub.add_parser("heatflow", help="heat-flow monotonicity curve")
    p.add_argument("datum")
    p.add_argument("inputs")
    p.add_argument("--t-grid", default="1,2,4,8,16,32,64")
    p = sub.add_parser("caffarelli", help="contraction bounds / 1D transport check")
    p.add_argument("--matrix-a", default=None, help="source curvature bound (file or inline)")
    p.add_argument("--matrix-b", default=None, help="target curvature bound (file or inline)")
    p.add_argument("--mu", default=None, help="1D source potential JSON (file or inline)")
    p.add_argument("--nu", default=None, help="1D target potential JSON (file or inline)")
    p = sub.add_parser("hc", help="hypercontractivity datum, threshold and constant")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p = sub.add_parser("gaussian-measure", help="Gaussian-measure inequality with completion")
    p.add_argument("spec", help="JSON file with factors and inputs")
    return parser


def _build_request(args):
    cmd = args.command
    if cmd == "check":
        return CheckRequest(datum=_datum_model(args.datum), budget=_budget(args))
    if cmd == "opt":
        return OptRequest(datum=_datum_model(args.datum), config=_opt_config(args))
    if cmd in ("verify", "reverse"):
        return VerifyRequest(datum=_datum_model(args.datum),
                             inputs=_input_models(_load_json(args.inputs)),
                             method=args.method, bl=args.bl, config=_opt_config(args))
    if cmd == "reduce":
        B = None if args.B is None else _inline_or_file(args.B)
        return ReduceRequest(datum=_datum_model(args.datum), B=B, config=_opt_config(args))
    if cmd == "structure":
        return StructureRequest(datum=_datum_model(args.datum))
    if cmd == "heatflow":
        grid = [float(t) for t in str(args.t_grid).split(",") if t]
        return HeatflowRequest(datum=_datum_model(args.datum),
                               inputs=_input_models(_load_json(args.inputs)),
                               t_grid=grid)
    if cmd == "caffarelli":
        return CaffarelliRequest(
            A=None if args.matrix_a is None else _inline_or_file(args.matrix_a),
            B=None if args.matrix_b is None else _inline_or_file(args.matrix_b),
            mu=None if args.mu is None else _inline_or_file(args.mu),
            nu=None if args.nu is None else _inline_or_file(args.nu))
    if cmd == "hc":
        return HCRequest(p=args.p, q=args.q, s=args.s, alpha=args.alpha, beta=args.beta)
    if cmd == "gaussian-measure":
        spec = _load_json(args.spec)
        return GaussianMeasureRequest(
            factors=spec["factors"], inputs=_input_models(spec.get("inputs", [])),
            method=args.method)
    raise ParseError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return 2
    try:
        req = _build_request(args)
        report = run_command(args.command, req, seed=args.seed,
                             tolerances={"psd": args.tol_psd, "kkt": args.tol_kkt})
    except InvalidDatumError as exc:
        print(f"blforge: invalid datum: {exc}", file=sys.stderr)
        return 2
    except BLForgeError as exc:
        exit_code = 2 if exc.code in INPUT_ERRORS else 1
        print(f"blforge: {exc.code}: {exc}", file=sys.stderr)
        return exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"blforge: ParseError: {exc}", file=sys.stderr)
        return 2
    text = report.model_dump_json(indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if report.exit_code:
        print("blforge: a checked inequality or certificate failed; see report",
              file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
