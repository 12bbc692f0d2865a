"""Numerical verification of the forward and dual inequalities.

Inputs live in the Gaussian x log-sum-exp family

    f(x) = exp(-pi <Bx,x>) * sum_k c_k exp(<a_k, x>),   c_k > 0,

which is exactly as log-convex-relaxed as its Gaussian part allows
(the second factor is log-convex), and which is closed under convolution,
heat flow, translation and scaling. Masses, convolutions and heat
evolution are closed-form; only the outer mixed integral ever needs
quadrature, and then only in dimension <= 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .datum import BLDatum
from .errors import (DimensionMismatch, DimensionTooLarge, InfeasibleB,
                     NotGeometric, SingularM, UnsupportedDimension)
from .gaussopt import optimize
from .geometric import is_generalized_geometric
from .linalg import gaussian_integral, is_psd, psd_order, sym

PI = np.pi
QUAD_NODES = 64
QUAD_MAX_DIM = 3


@dataclass(frozen=True)
class FunctionInput:
    """Gaussian x log-sum-exp input; B is PSD (SPD whenever a plain mass is needed)."""

    B: np.ndarray
    terms: tuple  # of (c, a) with c > 0, a an ndarray

    def __post_init__(self):
        B = sym(linalg.as_matrix(self.B))
        terms = []
        for c, a in self.terms:
            a = np.atleast_1d(np.asarray(a, dtype=float))
            if a.shape != (B.shape[0],):
                raise DimensionMismatch(f"term drift has shape {a.shape}, want ({B.shape[0]},)")
            if not c > 0:
                raise InfeasibleB("term coefficients must be positive")
            terms.append((float(c), a))
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    def mass(self) -> float:
        return float(sum(c * gaussian_integral(self.B, -a) for c, a in self.terms))

    def lse(self, X) -> np.ndarray:
        """The log-sum-exp factor at rows of X."""
        X = np.atleast_2d(X)
        out = np.zeros(X.shape[0])
        for c, a in self.terms:
            out += c * np.exp(X @ a)
        return out

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        quad = np.einsum("ni,ij,nj->n", X, self.B, X)
        return np.exp(-PI * quad) * self.lse(X)

    def log_values(self, y) -> np.ndarray:
        y = np.atleast_1d(y)
        X = y[:, None] if self.dim == 1 else np.atleast_2d(y)
        return np.log(np.maximum(self.values(X), 1e-300))

    def support(self):
        return (-np.inf, np.inf)

    def scaled(self, c: float) -> "FunctionInput":
        return FunctionInput(self.B, tuple((c * ck, ak) for ck, ak in self.terms))

    def translated(self, shift) -> "FunctionInput":
        """The input x -> f(x - shift), re-expanded in the same family."""
        s = np.atleast_1d(np.asarray(shift, dtype=float))
        base = float(np.exp(-PI * s @ self.B @ s))
        terms = tuple((ck * base * float(np.exp(-ak @ s)), ak + 2.0 * PI * self.B @ s)
                      for ck, ak in self.terms)
        return FunctionInput(self.B, terms)

    def to_dict(self) -> dict:
        return {"B": self.B.tolist(),
                "terms": [{"c": c, "a": a.tolist()} for c, a in self.terms]}

    @staticmethod
    def from_dict(obj) -> "FunctionInput":
        return FunctionInput(np.array(obj["B"], dtype=float),
                             tuple((float(t["c"]), np.array(t["a"], dtype=float))
                                   for t in obj["terms"]))

    @staticmethod
    def gaussian(B, c=1.0) -> "FunctionInput":
        B = linalg.as_matrix(B)
        return FunctionInput(B, ((float(c), np.zeros(B.shape[0])),))


@dataclass
class VerifyReport:
    lhs: float
    rhs: float
    slack: float
    method: str
    est_error: float
    bl_constant: Optional[float] = None

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "method": self.method, "est_error": self.est_error,
                "bl_constant": self.bl_constant}


# ---------------------------------------------------------------------------
# closed-form algebra on the family
# ---------------------------------------------------------------------------

def conv_inputs(f: FunctionInput, g: FunctionInput, merge_tol=1e-9) -> FunctionInput:
    """Rescaled convolution 2^{n/2} (f * g)(sqrt(2) x), closed under the family.

    The Gaussian part becomes the doubled harmonic mean 2 (B_f^-1 + B_g^-1)^-1
    and term drifts combine pairwise; drifts that coincide within merge_tol
    are merged so iterated convolutions stay compact.
    """
    if f.dim != g.dim:
        raise DimensionMismatch("convolution needs equal dimensions")
    n = f.dim
    S = f.B + g.B
    sgn, ldS = np.linalg.slogdet(S)
    if sgn <= 0:
        raise SingularM("sum of Gaussian parts is singular")
    Sinv = np.linalg.inv(S)
    C = sym(f.B @ Sinv @ g.B)
    merged = {}
    for cf, af in f.terms:
        uf = np.linalg.solve(f.B, af)
        for cg, ag in g.terms:
            d = ag - af
            coef = (2.0 ** (n / 2.0) * np.exp(-0.5 * ldS) * cf * cg
                    * np.exp((Sinv @ d) @ d / (4.0 * PI)))
            drift = np.sqrt(2.0) * (C @ (uf + np.linalg.solve(g.B, ag)))
            key = tuple(np.round(drift / merge_tol).astype(np.int64))
            if key in merged:
                c0, a0 = merged[key]
                merged[key] = (c0 + coef, a0)
            else:
                merged[key] = (coef, drift)
    return FunctionInput(2.0 * C, tuple(merged.values()))


def heat_evolve(f: FunctionInput, t: float) -> FunctionInput:
    """Solution at time t >= 1 of du/dt = (1/4pi) Lap u started at f at t = 1."""
    tau = float(t) - 1.0
    if tau < 0:
        raise DimensionMismatch("heat flow runs forward from t = 1")
    if tau == 0:
        return f
    d = f.dim
    S = tau * f.B + np.eye(d)
    sgn, ldS = np.linalg.slogdet(S)
    Bt = sym(np.linalg.solve(S, f.B))
    terms = []
    for c, a in f.terms:
        at = np.linalg.solve(S, a)
        ct = c * np.exp(-0.5 * ldS + tau * (at @ a) / (4.0 * PI))
        terms.append((ct, at))
    return FunctionInput(Bt, tuple(terms))


# ---------------------------------------------------------------------------
# the outer mixed integral
# ---------------------------------------------------------------------------

def _total_mixing(datum: BLDatum, inputs) -> np.ndarray:
    M = datum.qcal_or_zero().copy()
    for f, inp in zip(datum.factors, inputs):
        M += f.p * f.C.T @ inp.B @ f.C
    return sym(M)


def _closed_form_terms(datum: BLDatum, inputs):
    """Expand prod_j LSE_j(C_j x)^{p_j} into (coef, drift) pairs, or None.

    Exact for single-term factors at any exponent; multi-term factors
    require integer exponents (multinomial expansion).
    """
    from math import comb, factorial

    per_factor = []
    for f, inp in zip(datum.factors, inputs):
        if len(inp.terms) == 1:
            c, a = inp.terms[0]
            per_factor.append([(c ** f.p, f.p * (f.C.T @ a))])
            continue
        if abs(f.p - round(f.p)) > 1e-12:
            return None
        p = int(round(f.p))
        K = len(inp.terms)
        expanded = []
        for alloc in _compositions(p, K):
            coef = factorial(p)
            drift = np.zeros(datum.n)
            for k, ak in enumerate(alloc):
                coef /= factorial(ak)
                coef *= inp.terms[k][0] ** ak
                drift += ak * (f.C.T @ inp.terms[k][1])
            expanded.append((coef, drift))
        per_factor.append(expanded)
    combos = [(1.0, np.zeros(datum.n))]
    for expanded in per_factor:
        combos = [(c0 * c1, d0 + d1) for c0, d0 in combos for c1, d1 in expanded]
        if len(combos) > 200000:
            return None
    return combos


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def _hermite_tensor(n, nodes):
    z, w = np.polynomial.hermite.hermgauss(nodes)
    grids = np.meshgrid(*([z] * n), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(Z.shape[0])
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    for i in range(n):
        W *= wgrids[i].ravel()
    return Z, W


def _quad_lhs(datum: BLDatum, inputs, nodes):
    M = _total_mixing(datum, inputs)
    lam, U = np.linalg.eigh(M)
    if lam.min() <= 1e-13:
        raise SingularM("total mixing matrix is singular")
    n = datum.n
    Z, W = _hermite_tensor(n, nodes)
    X = (Z / np.sqrt(lam)) @ U.T / np.sqrt(PI)
    G = np.ones(X.shape[0])
    for f, inp in zip(datum.factors, inputs):
        G *= inp.lse(X @ f.C.T) ** f.p
    sgn, ldM = np.linalg.slogdet(M)
    return float(np.exp(-0.5 * ldM) * PI ** (-n / 2.0) * (W @ G))


def forward_lhs(datum: BLDatum, inputs, method="auto", nodes=QUAD_NODES, rng=None):
    """The mixed integral int exp(-pi <Qcal x, x>) prod_j f_j(C_j x)^{p_j} dx.

    Returns (value, method, est_error). Closed form covers single-term
    factors at any exponent and multi-term factors at integer exponents;
    otherwise a Gauss-Hermite tensor rule with node-doubling error control,
    or plain importance-sampled Monte Carlo when asked for.
    """
    if method in ("auto", "closed_form"):
        combos = _closed_form_terms(datum, inputs)
        if combos is not None:
            M = _total_mixing(datum, inputs)
            if linalg.min_eig(M) <= 1e-13:
                raise SingularM("total mixing matrix is singular")
            val = float(sum(c * gaussian_integral(M, -d) for c, d in combos))
            return val, "closed_form", 5e-13 * (abs(val) + 1.0)
        if method == "closed_form":
            raise UnsupportedDimension("no closed form: non-integer exponent with multiple terms")
    if method == "monte_carlo":
        return _mc_lhs(datum, inputs, rng=rng)
    if datum.n > QUAD_MAX_DIM:
        raise DimensionTooLarge(f"quadrature supports n <= {QUAD_MAX_DIM}, got {datum.n}")
    val = _quad_lhs(datum, inputs, nodes)
    val2 = _quad_lhs(datum, inputs, 2 * nodes)
    return val2, "quadrature", abs(val2 - val) + 1e-13 * (abs(val2) + 1.0)


def _mc_lhs(datum: BLDatum, inputs, samples=200000, rng=None):
    rng = rng if rng is not None else np.random.default_rng(0)
    M = _total_mixing(datum, inputs)
    lam, U = np.linalg.eigh(M)
    if lam.min() <= 1e-13:
        raise SingularM("total mixing matrix is singular")
    cov_half = (U / np.sqrt(2.0 * PI * lam))
    X = rng.normal(size=(samples, datum.n)) @ cov_half.T
    G = np.ones(samples)
    for f, inp in zip(datum.factors, inputs):
        G *= inp.lse(X @ f.C.T) ** f.p
    norm = np.exp(-0.5 * np.linalg.slogdet(M)[1])
    est = norm * G.mean()
    err = 3.0 * norm * G.std(ddof=1) / np.sqrt(samples)
    return float(est), "monte_carlo", float(err)


def _check_inputs(datum: BLDatum, inputs, bound_tol=1e-9):
    if len(inputs) != datum.m:
        raise DimensionMismatch(f"{len(inputs)} inputs for {datum.m} factors")
    for j, (f, inp) in enumerate(zip(datum.factors, inputs)):
        if inp.dim != f.nj:
            raise DimensionMismatch(f"input {j} has dim {inp.dim}, want {f.nj}")
        if not psd_order(inp.B, f.Q, tol=bound_tol):
            raise InfeasibleB(
                f"input {j}: Gaussian part exceeds Q; the family is then not "
                f"log-convexity-feasible for this factor")


def forward_check(datum: BLDatum, inputs, method="auto", bl=None,
                  nodes=QUAD_NODES, rng=None) -> VerifyReport:
    """Verify lhs <= bl * prod_j (int f_j)^{p_j} for family inputs.

    Feasibility of an input means its Gaussian part sits below the
    factor's bound in the semidefinite order, which for this family is
    equivalent to the required log-convexity relation. `bl` defaults to
    the optimizer's constant for the datum.
    """
    _check_inputs(datum, inputs)
    if bl is None:
        bl = optimize(datum).bl_constant
    lhs, used, err = forward_lhs(datum, inputs, method=method, nodes=nodes, rng=rng)
    rhs = float(bl)
    for f, inp in zip(datum.factors, inputs):
        rhs *= inp.mass() ** f.p
    return VerifyReport(lhs=lhs, rhs=rhs, slack=rhs - lhs, method=used,
                        est_error=err, bl_constant=float(bl))


def j_functional(datum: BLDatum, inputs, method="auto", nodes=QUAD_NODES) -> float:
    """Mass-normalized mixed integral lhs / prod_j (int f_j)^{p_j}."""
    _check_inputs(datum, inputs)
    lhs, _, _ = forward_lhs(datum, inputs, method=method, nodes=nodes)
    denom = 1.0
    for f, inp in zip(datum.factors, inputs):
        denom *= inp.mass() ** f.p
    return lhs / denom


def equality_check(datum: BLDatum, inputs, bl=None, method="auto",
                   nodes=QUAD_NODES):
    """(is_equality, slack, report): equality within max(1e-6 rhs, est_error)."""
    report = forward_check(datum, inputs, method=method, bl=bl, nodes=nodes)
    tol = max(1e-6 * abs(report.rhs), report.est_error)
    return abs(report.slack) <= tol, report.slack, report


# ---------------------------------------------------------------------------
# dual (sup-convolution) inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedGaussian1D:
    """exp(-pi a y^2) restricted to [center - cut, center + cut]; log-concave."""

    a: float
    cut: float
    center: float = 0.0

    @property
    def dim(self) -> int:
        return 1

    def mass(self) -> float:
        from scipy.special import erf
        r = np.sqrt(PI * self.a)
        return float(erf(r * self.cut) / np.sqrt(self.a))

    def log_values(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        inside = np.abs(y - self.center) <= self.cut
        return np.where(inside, -PI * self.a * (y - self.center) ** 2, -np.inf)

    def support(self):
        return (self.center - self.cut, self.center + self.cut)


def _reverse_gaussian_closed(datum: BLDatum, inputs):
    S = np.zeros((datum.n, datum.n))
    scalars = 1.0
    for f, inp in zip(datum.factors, inputs):
        c, a = inp.terms[0]
        Ainv = np.linalg.inv(inp.B)
        S += f.p * f.C.T @ Ainv @ f.C
        scalars *= (c * np.exp((Ainv @ a) @ a / (4.0 * PI))) ** f.p
    sgn, ldS = np.linalg.slogdet(S)
    if sgn <= 0:
        raise SingularM("dual quadratic form is singular")
    return float(scalars * np.exp(0.5 * ldS))


def _sup_convolution_1d(datum: BLDatum, inputs, grid_pts=4001, half_width=10.0):
    """Grid sup-convolution for two 1D factors; inner sup by golden section."""
    if datum.m != 2:
        raise UnsupportedDimension("grid sup-convolution implemented for two factors")
    c1 = float(datum.factors[0].C[0, 0])
    c2 = float(datum.factors[1].C[0, 0])
    p1, p2 = datum.factors[0].p, datum.factors[1].p
    g1, g2 = inputs
    lo1, hi1 = g1.support()
    lo2, hi2 = g2.support()
    lo1, hi1 = max(lo1, -50.0), min(hi1, 50.0)
    lo2, hi2 = max(lo2, -50.0), min(hi2, 50.0)
    xs = np.linspace(-half_width, half_width, grid_pts)
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    vals = np.empty_like(xs)
    for i, x in enumerate(xs):
        tA = (x - p2 * c2 * hi2) / (p1 * c1)
        tB = (x - p2 * c2 * lo2) / (p1 * c1)
        lo, hi = max(lo1, min(tA, tB)), min(hi1, max(tA, tB))
        if lo > hi:
            vals[i] = -np.inf
            continue

        def val(t):
            y2 = (x - p1 * c1 * t) / (p2 * c2)
            return p1 * g1.log_values(t)[0] + p2 * g2.log_values(y2)[0]

        a, b = lo, hi
        c = b - phi * (b - a)
        d = a + phi * (b - a)
        fc, fd = val(c), val(d)
        for _ in range(80):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = val(c)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = val(d)
        vals[i] = max(fc, fd)
    dense = np.exp(vals)
    full = np.trapezoid(dense, xs)
    half = np.trapezoid(dense[::2], xs[::2])
    return float(full), abs(full - half)


def reverse_check(datum: BLDatum, inputs, method="auto", bl=None) -> VerifyReport:
    """Verify the dual inequality: sup-convolution integral >= masses / bl.

    Gaussian (single-term) inputs use the closed form through quadratic-form
    duality; general log-concave inputs are supported in dimension one with
    a grid sup-convolution. Inputs must be at least as log-concave as the
    inverse bounds, i.e. Gaussian parts above Q_j^{-1}.
    """
    if datum.qcal is not None and np.any(np.abs(datum.qcal) > 0):
        raise UnsupportedDimension("dual check is implemented for a zero localization term")
    if len(inputs) != datum.m:
        raise DimensionMismatch(f"{len(inputs)} inputs for {datum.m} factors")
    for j, (f, inp) in enumerate(zip(datum.factors, inputs)):
        Qinv = np.linalg.inv(f.Q)
        if isinstance(inp, FunctionInput):
            if len(inp.terms) > 1:
                raise InfeasibleB(f"input {j}: multi-term inputs are not log-concave")
            if not psd_order(Qinv, inp.B, tol=1e-9):
                raise InfeasibleB(f"input {j}: Gaussian part below Q^-1")
        elif isinstance(inp, TruncatedGaussian1D):
            if inp.a < Qinv[0, 0] - 1e-9:
                raise InfeasibleB(f"input {j}: Gaussian part below Q^-1")
    if bl is None:
        bl = optimize(datum).bl_constant
    gaussian = all(isinstance(i, FunctionInput) and len(i.terms) == 1 for i in inputs)
    if method in ("auto", "closed_form") and gaussian:
        lhs = _reverse_gaussian_closed(datum, inputs)
        used, err = "closed_form", 5e-13 * (abs(lhs) + 1.0)
    else:
        if method == "closed_form":
            raise UnsupportedDimension("closed form needs Gaussian inputs")
        if datum.n != 1:
            raise UnsupportedDimension("grid sup-convolution only in dimension one")
        lhs, err = _sup_convolution_1d(datum, inputs)
        used = "quadrature"
    rhs = 1.0 / float(bl)
    for f, inp in zip(datum.factors, inputs):
        rhs *= inp.mass() ** f.p
    return VerifyReport(lhs=lhs, rhs=rhs, slack=lhs - rhs, method=used,
                        est_error=err, bl_constant=float(bl))


# ---------------------------------------------------------------------------
# heat-flow monotonicity
# ---------------------------------------------------------------------------

def heatflow_monotone(datum: BLDatum, inputs, t_grid, nodes=QUAD_NODES):
    """Curve t -> t^{(sum_j p_j n_j - n)/2} * mixed integral of heat-evolved inputs.

    Defined for generalized geometric data in dimension <= 2 with the grid
    starting at 1; the curve is nondecreasing and converges to the product
    of input masses.
    """
    report = is_generalized_geometric(datum)
    if not report.is_geometric:
        raise NotGeometric("heat-flow monotonicity needs a generalized geometric datum")
    if datum.n > 2:
        raise DimensionTooLarge("heat-flow curve supports n <= 2")
    t_grid = [float(t) for t in t_grid]
    if abs(t_grid[0] - 1.0) > 1e-12:
        raise UnsupportedDimension("t grid must start at 1")
    _check_inputs(datum, inputs)
    alpha = 0.5 * (sum(f.p * f.nj for f in datum.factors) - datum.n)
    curve = []
    for t in t_grid:
        evolved = [heat_evolve(inp, t) for inp in inputs]
        val, _, _ = forward_lhs(datum, evolved, method="auto", nodes=nodes)
        curve.append((t, float(t ** alpha * val)))
    return curve
