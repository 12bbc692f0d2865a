"""Service layer: pydantic request/response models, shared command handlers
and the FastAPI application.

Every analysis is exposed twice through the same handler functions: as a
POST endpoint here and as a CLI subcommand in `blforge.cli`. Handlers take
a validated request model and return a JSON-ready results dict; report
assembly (digest, seed, tolerances, timings) is shared so both transports
emit identical payloads.
"""

import hashlib
import json
import time
from typing import Any, Dict, List, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .applications import HCParams, gaussian_measure_check, hc_build, hc_constant, hc_fixed_point_scan, hc_threshold
from .caffarelli import Potential1D, brenier_1d, contraction_bound, gaussian_brenier_hessian
from .datum import BLDatum, LinearFactor, validate_datum
from .errors import BLForgeError, ParseError, ThresholdViolated
from .finiteness import ProbeBudget, deficiency, find_critical, finiteness_verdict
from .gaussopt import OptConfig, kkt_check, optimize
from .geometric import is_generalized_geometric, reduce_to_geometric
from .linalg import psd_order
from .structure import structure_report
from .verify import FunctionInput, TruncatedGaussian1D, forward_check, heatflow_monotone, reverse_check

Matrix = List[List[float]]


def canonical_digest(data) -> str:
    """SHA-256 of the canonical serialization: sorted keys, numbers as floats."""
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data, parse_int=float, parse_float=float)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    else:
        data = json.loads(json.dumps(data), parse_int=float, parse_float=float)
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


class FactorModel(BaseModel):
    C: Matrix
    p: float
    Q: Matrix


class DatumModel(BaseModel):
    n: int
    Qcal: Optional[Matrix] = None
    factors: List[FactorModel]

    def build(self) -> BLDatum:
        return validate_datum(self.model_dump())


class BudgetModel(BaseModel):
    samples: int = 10000
    seed: int = 0
    lattice_cap: int = 4096


class OptConfigModel(BaseModel):
    starts: int = 16
    seed: int = 0
    gtol: float = 1e-10
    max_iter: int = 20000
    boundary_eps: float = 1e-3
    kkt_tol: float = 1e-6

    def build(self) -> OptConfig:
        return OptConfig(**self.model_dump())


class TermModel(BaseModel):
    c: float
    a: List[float]


class InputModel(BaseModel):
    B: Optional[Matrix] = None
    terms: Optional[List[TermModel]] = None
    truncated: Optional[Dict[str, float]] = None

    def build(self):
        if self.truncated is not None:
            return TruncatedGaussian1D(a=float(self.truncated["a"]),
                                       cut=float(self.truncated["cut"]),
                                       center=float(self.truncated.get("center", 0.0)))
        terms = self.terms or [TermModel(c=1.0, a=[0.0] * len(self.B))]
        return FunctionInput(np.array(self.B, dtype=float),
                             tuple((t.c, np.array(t.a, dtype=float)) for t in terms))


class CheckRequest(BaseModel):
    datum: DatumModel
    budget: BudgetModel = Field(default_factory=BudgetModel)


class OptRequest(BaseModel):
    datum: DatumModel
    config: OptConfigModel = Field(default_factory=OptConfigModel)


class VerifyRequest(BaseModel):
    datum: DatumModel
    inputs: List[InputModel]
    method: str = "auto"
    bl: Optional[float] = None
    config: OptConfigModel = Field(default_factory=OptConfigModel)


class ReduceRequest(BaseModel):
    datum: DatumModel
    B: Optional[List[Matrix]] = None
    config: OptConfigModel = Field(default_factory=OptConfigModel)


class StructureRequest(BaseModel):
    datum: DatumModel
    tol: float = 1e-8


class HeatflowRequest(BaseModel):
    datum: DatumModel
    inputs: List[InputModel]
    t_grid: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])


class CaffarelliRequest(BaseModel):
    A: Optional[Matrix] = None
    B: Optional[Matrix] = None
    mu: Optional[Dict[str, float]] = None
    nu: Optional[Dict[str, float]] = None


class HCRequest(BaseModel):
    p: float
    q: float
    s: float
    alpha: float
    beta: float


class GaussianMeasureRequest(BaseModel):
    factors: List[FactorModel]
    inputs: List[InputModel]
    method: str = "auto"


class RunReport(BaseModel):
    command: str
    datum_digest: str
    seed: int
    version: str
    tolerances: Dict[str, float]
    results: Dict[str, Any]
    timings: Dict[str, float]
    exit_code: int = 0


_METHODS = {"closed": "closed_form", "closed_form": "closed_form",
            "quad": "quadrature", "quadrature": "quadrature",
            "mc": "monte_carlo", "monte_carlo": "monte_carlo", "auto": "auto"}


def _method(name: str) -> str:
    if name not in _METHODS:
        raise ParseError(f"unknown method {name!r}")
    return _METHODS[name]


# ---------------------------------------------------------------------------
# handlers (results dict, violated flag)
# ---------------------------------------------------------------------------

def handle_check(req: CheckRequest):
    datum = req.datum.build()
    budget = ProbeBudget(**req.budget.model_dump())
    verdict = finiteness_verdict(datum, budget)
    critical = find_critical(datum, budget) if verdict.status == "FiniteHeuristic" else []
    return {
        "verdict": verdict.to_dict(),
        "critical_subspaces": [s.to_dict() for s in critical],
    }, False


def handle_opt(req: OptRequest):
    datum = req.datum.build()
    res = optimize(datum, req.config.build())
    return res.to_dict(), False


def handle_verify(req: VerifyRequest):
    datum = req.datum.build()
    inputs = [m.build() for m in req.inputs]
    bl = req.bl
    if bl is None:
        bl = optimize(datum, req.config.build()).bl_constant
    report = forward_check(datum, inputs, method=_method(req.method), bl=bl)
    violated = report.slack < -report.est_error
    return {"forward": report.to_dict(), "violated": bool(violated)}, violated


def handle_reverse(req: VerifyRequest):
    datum = req.datum.build()
    inputs = [m.build() for m in req.inputs]
    bl = req.bl
    if bl is None:
        bl = optimize(datum, req.config.build()).bl_constant
    report = reverse_check(datum, inputs, method=_method(req.method), bl=bl)
    violated = report.slack < -report.est_error
    return {"reverse": report.to_dict(), "violated": bool(violated)}, violated


def handle_reduce(req: ReduceRequest):
    datum = req.datum.build()
    cfg = req.config.build()
    if req.B is not None:
        B = [np.array(b, dtype=float) for b in req.B]
        opt_dict = None
    else:
        res = optimize(datum, cfg)
        B = list(res.best.B)
        opt_dict = res.to_dict()
    cert = kkt_check(datum, B, tol=cfg.kkt_tol)
    out: Dict[str, Any] = {"certificate": cert.to_dict()}
    if opt_dict is not None:
        out["optimize"] = opt_dict
    if not cert.passed:
        out["reduced"] = None
        return out, True
    geo, emap = reduce_to_geometric(datum, B, kkt_tol=cfg.kkt_tol)
    report = is_generalized_geometric(geo, tol=1e-7)
    out["reduced"] = geo.to_dict()
    out["equivalence"] = emap.to_dict()
    out["geometric_report"] = report.to_dict()
    return out, not report.is_geometric


def handle_structure(req: StructureRequest):
    datum = req.datum.build()
    rep = structure_report(datum, tol=req.tol)
    return rep.to_dict(), False


def handle_heatflow(req: HeatflowRequest):
    datum = req.datum.build()
    inputs = [m.build() for m in req.inputs]
    curve = heatflow_monotone(datum, inputs, req.t_grid)
    vals = [v for _, v in curve]
    monotone = all(b >= a * (1.0 - 1e-6) for a, b in zip(vals, vals[1:]))
    limit = 1.0
    for f, inp in zip(datum.factors, inputs):
        limit *= inp.mass() ** f.p
    terminal_gap = abs(vals[-1] - limit) / limit
    return {
        "curve": [[t, v] for t, v in curve],
        "monotone": bool(monotone),
        "mass_product": limit,
        "terminal_relative_gap": terminal_gap,
    }, not monotone


def handle_caffarelli(req: CaffarelliRequest):
    if req.mu is not None or req.nu is not None:
        if req.mu is None or req.nu is None:
            raise ParseError("1D mode needs both mu and nu potentials")
        res = brenier_1d(Potential1D.from_dict(req.mu), Potential1D.from_dict(req.nu))
        violated = res.second_diff_max > res.bound + res.grid_tol or not res.monotone
        return {"brenier_1d": res.to_dict(), "violated": bool(violated)}, violated
    if req.A is None or req.B is None:
        raise ParseError("matrix mode needs both A and B")
    A = np.array(req.A, dtype=float)
    B = np.array(req.B, dtype=float)
    H = contraction_bound(A, B)
    X = gaussian_brenier_hessian(A, B)
    sharp = float(np.linalg.norm(X - H))
    dominated = psd_order(X, H, tol=1e-9)
    return {
        "bound": H.tolist(),
        "gaussian_hessian": X.tolist(),
        "sharpness_residual": sharp,
        "dominated": bool(dominated),
    }, not dominated


def handle_hc(req: HCRequest):
    params = HCParams(p=req.p, q=req.q, s=req.s, alpha=req.alpha, beta=req.beta)
    datum = hc_build(params)
    threshold = hc_threshold(params)
    scan = hc_fixed_point_scan(params)
    out: Dict[str, Any] = {
        "threshold": threshold,
        "has_fixed_point": scan["has_fixed_point"],
        "min_gap": scan["min_gap"],
        "datum": datum.to_dict(),
    }
    violated = False
    try:
        const = hc_constant(params)
        res = optimize(datum, OptConfig(seed=0))
        corner_gap = abs(res.bl_constant - const) / const
        out["constant"] = const
        out["corner_check"] = {"optimizer_bl": res.bl_constant,
                               "relative_gap": corner_gap,
                               "passed": bool(corner_gap <= 1e-6)}
        violated = corner_gap > 1e-6
    except ThresholdViolated:
        out["constant"] = None
        out["corner_check"] = None
    return out, violated


def handle_gaussian_measure(req: GaussianMeasureRequest):
    factors = [LinearFactor(C=np.array(f.C, dtype=float), p=f.p,
                            Q=np.array(f.Q, dtype=float)) for f in req.factors]
    inputs = [m.build() for m in req.inputs]
    out = gaussian_measure_check(factors, inputs, method=_method(req.method))
    report = out["report"]
    violated = (report.slack < -report.est_error) or out["identity_residual"] > 1e-9
    return {
        "report": report.to_dict(),
        "identity_residual": out["identity_residual"],
        "added_factors": out["added_factors"],
        "completion_sizes": out["completion_sizes"],
        "violated": bool(violated),
    }, violated


HANDLERS = {
    "check": (CheckRequest, handle_check),
    "opt": (OptRequest, handle_opt),
    "verify": (VerifyRequest, handle_verify),
    "reverse": (VerifyRequest, handle_reverse),
    "reduce": (ReduceRequest, handle_reduce),
    "structure": (StructureRequest, handle_structure),
    "heatflow": (HeatflowRequest, handle_heatflow),
    "caffarelli": (CaffarelliRequest, handle_caffarelli),
    "hc": (HCRequest, handle_hc),
    "gaussian-measure": (GaussianMeasureRequest, handle_gaussian_measure),
}


def _jsonable(obj):
    """Recursively coerce numpy scalars/arrays into plain JSON types."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _digest_payload(command: str, req: BaseModel) -> str:
    payload = req.model_dump()
    return canonical_digest(payload.get("datum", payload))


def run_command(command: str, req: BaseModel, seed: int = 0,
                tolerances: Optional[Dict[str, float]] = None) -> RunReport:
    """Execute one command and assemble the shared report envelope."""
    tolerances = tolerances or {"psd": 1e-9, "kkt": 1e-6}
    t0 = time.perf_counter()
    digest = _digest_payload(command, req)
    t1 = time.perf_counter()
    results, violated = HANDLERS[command][1](req)
    t2 = time.perf_counter()
    return RunReport(
        command=command,
        datum_digest=digest,
        seed=seed,
        version=__version__,
        tolerances=tolerances,
        results=_jsonable(results),
        timings={"parse_ms": 1e3 * (t1 - t0), "compute_ms": 1e3 * (t2 - t1)},
        exit_code=1 if violated else 0,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="blforge", version=__version__)

    @app.exception_handler(BLForgeError)
    async def _blforge_error(request: Request, exc: BLForgeError):
        status = 422 if exc.code in (
            "ParseError", "InvalidDatum", "InvalidParams", "DimensionMismatch",
            "AsymmetricMatrix", "NotSPD", "NotPSD", "UnsupportedDimension",
            "DimensionTooLarge", "TooManyFactors", "QcalPresent", "EmptyList",
            "MassMismatch", "BetaNotAboveOne", "ConditionViolated",
            "NonIntegerExponentWithClosedForm", "InfeasibleB", "NotCritical",
            "NotGeometric") else 409
        detail = {"error": exc.code, "detail": str(exc)}
        if hasattr(exc, "errors"):
            detail["violations"] = exc.errors
        return JSONResponse(status_code=status, content=detail)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    def _register(command: str, model):
        path = "/" + command

        @app.post(path, response_model=RunReport, name=command)
        def endpoint(req: model, seed: int = 0):  # type: ignore[valid-type]
            return run_command(command, req, seed=seed)

    for name, (model, _) in HANDLERS.items():
        _register(name, model)
    return app


app = create_app()
