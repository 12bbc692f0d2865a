"""Applications: regularized hypercontractivity and Gaussian-measure checks.

The hypercontractivity datum couples two one-dimensional factors through a
correlation-driven localization matrix; under the constraint
(q-1)/(p-1) = e^{2s} that matrix is exactly singular PSD, the critical
configuration of the classical two-point inequality. For curvature levels
beta > 1 and alpha above an explicit threshold, the box maximum sits at
the corner (1/(2 pi beta), 1/(2 pi alpha)), which yields a closed-form
constant; absence of interior stationary points is established by a grid
plus Picard scan of the stationarity fixed-point map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .datum import BLDatum, LinearFactor
from .errors import (BetaNotAboveOne, ConditionViolated, InvalidParams,
                     ThresholdViolated)
from .linalg import sym
from .verify import FunctionInput, VerifyReport, forward_lhs

PI = np.pi


@dataclass(frozen=True)
class HCParams:
    p: float
    q: float
    s: float
    alpha: float
    beta: float
    n: int = 1

    def __post_init__(self):
        if self.n != 1:
            raise InvalidParams("only dimension one is supported")
        if not (1.0 < self.p < np.inf and 1.0 < self.q < np.inf):
            raise InvalidParams("need 1 < p, q < infinity")
        if not (0.0 < self.s <= 20.0):
            raise InvalidParams("need 0 < s <= 20")
        if abs((self.q - 1.0) / (self.p - 1.0) - np.exp(2.0 * self.s)) > 1e-10:
            raise InvalidParams("(q-1)/(p-1) must equal exp(2s)")
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParams("alpha and beta must be positive")

    @property
    def q_dual(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def exponents(self):
        return 1.0 / self.p, 1.0 / self.q_dual


def hc_build(params: HCParams) -> BLDatum:
    """Two coordinate factors on R^2 with the correlation-coupling localization.

    Qcal = (2 pi t)^{-1} [[1 - t p1, -e^{-s}], [-e^{-s}, 1 - t p2]] with
    t = 1 - e^{-2s} and exponents p1 = 1/p, p2 = 1/q'; the bounds are
    Q1 = 1/(2 pi beta), Q2 = 1/(2 pi alpha). Under the parameter constraint
    Qcal is PSD with a one-dimensional kernel.
    """
    t = 1.0 - np.exp(-2.0 * params.s)
    p1, p2 = params.exponents
    qcal = (1.0 / (2.0 * PI * t)) * np.array(
        [[1.0 - t * p1, -np.exp(-params.s)],
         [-np.exp(-params.s), 1.0 - t * p2]])
    if linalg.min_eig(qcal) < -1e-9:
        raise InvalidParams("localization matrix not PSD for these parameters")
    factors = (
        LinearFactor(C=np.array([[1.0, 0.0]]), p=p1,
                     Q=np.array([[1.0 / (2.0 * PI * params.beta)]])),
        LinearFactor(C=np.array([[0.0, 1.0]]), p=p2,
                     Q=np.array([[1.0 / (2.0 * PI * params.alpha)]])),
    )
    return BLDatum(n=2, factors=factors, qcal=sym(qcal))


def hc_threshold(params: HCParams) -> float:
    """Curvature threshold on alpha for corner attainment; +inf when the
    denominator is nonpositive."""
    if not params.beta > 1.0:
        raise BetaNotAboveOne("the threshold is stated for beta > 1")
    t = 1.0 - np.exp(-2.0 * params.s)
    u = (1.0 - params.beta) / (params.p * params.beta)
    num = 1.0 + u * t
    den = 1.0 + u * (1.0 + (params.q - 1.0) * np.exp(-2.0 * params.s))
    if den <= 0:
        return float("inf")
    return float(num / den)


def hc_stationarity_maps(params: HCParams):
    """The coordinate maps a(b), b(a) solving the interior stationarity equations."""
    e2s = np.exp(-2.0 * params.s)
    t = 1.0 - e2s

    def b_of_a(a):
        u = 2.0 * PI * a - 1.0
        return (1.0 + params.q * (e2s / params.p) * u / ((t / params.p) * u + 1.0)) / (2.0 * PI)

    def a_of_b(b):
        u = 2.0 * PI * b - 1.0
        return (1.0 + params.p_dual * (e2s / params.q) * u / ((t / params.q) * u + 1.0)) / (2.0 * PI)

    return a_of_b, b_of_a


def hc_fixed_point_scan(params: HCParams, grid=400, picard=100, tol=1e-8) -> dict:
    """Scan the stationarity map F(x, y) = (a(y), b(x)) for fixed points.

    Evaluates the gap on a grid over [0, 1/(2 pi beta)] x [0, 1/(2 pi alpha)]
    and runs Picard iterations from the grid minimum; a fixed point exists
    when the final gap drops below tol.
    """
    a_of_b, b_of_a = hc_stationarity_maps(params)
    xmax = 1.0 / (2.0 * PI * params.beta)
    ymax = 1.0 / (2.0 * PI * params.alpha)
    xs = np.linspace(0.0, xmax, grid)
    ys = np.linspace(0.0, ymax, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    FX = np.vectorize(a_of_b)(Y)
    FY = np.vectorize(b_of_a)(X)
    gap = np.hypot(FX - X, FY - Y)
    i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
    x, y = float(X[i, j]), float(Y[i, j])
    for _ in range(picard):
        x, y = (float(np.clip(a_of_b(y), 0.0, xmax)),
                float(np.clip(b_of_a(x), 0.0, ymax)))
    final_gap = float(np.hypot(a_of_b(y) - x, b_of_a(x) - y))
    min_gap = float(min(gap.min(), final_gap))
    return {"has_fixed_point": bool(min_gap < tol), "min_gap": min_gap,
            "witness": [x, y] if min_gap < tol else None,
            "grid_min_gap": float(gap.min())}


def hc_constant(params: HCParams, check_threshold=True) -> float:
    """Closed-form constant at the corner (1/(2 pi beta), 1/(2 pi alpha)).

    Equals the square root of the determinant ratio of the datum at the
    corner tuple:
    (2 pi)^{1 - (p1+p2)/2} beta^{-p1/2} alpha^{-p2/2} t^{1/2} D^{-1/2}
    with D = 1 + u/p + v/q' + t u v/(p q'), u = (1-beta)/beta, v = (1-alpha)/alpha.
    """
    if not params.beta > 1.0:
        raise BetaNotAboveOne("the corner formula is stated for beta > 1")
    thr = hc_threshold(params)
    if check_threshold and not params.alpha >= thr:
        raise ThresholdViolated(f"alpha = {params.alpha} below threshold {thr}")
    t = 1.0 - np.exp(-2.0 * params.s)
    p1, p2 = params.exponents
    u = (1.0 - params.beta) / params.beta
    v = (1.0 - params.alpha) / params.alpha
    D = 1.0 + u / params.p + v / params.q_dual + t * u * v / (params.p * params.q_dual)
    if D <= 0:
        raise ThresholdViolated("corner determinant is nonpositive")
    return float((2.0 * PI) ** (1.0 - 0.5 * (p1 + p2))
                 * params.beta ** (-0.5 * p1) * params.alpha ** (-0.5 * p2)
                 * np.sqrt(t) / np.sqrt(D))


# ---------------------------------------------------------------------------
# Gaussian-measure inequality with factor completion
# ---------------------------------------------------------------------------

def _gamma_mass(inp: FunctionInput) -> float:
    d = inp.dim
    shifted = FunctionInput(inp.B + np.eye(d) / (2.0 * PI), inp.terms)
    return (2.0 * PI) ** (-d / 2.0) * shifted.mass()


def complete_factors(factors: Sequence[LinearFactor], tol=1e-9):
    """Completion of sum_i p_i C_i^T C_i to the identity by rank-one factors.

    With A = sum_i p_i C_i^T C_i (operator norm at most 1), the original
    exponents are scaled by 1/lambda_1(A) and unit eigenvector factors are
    added for every eigenvalue below lambda_1. Returns the full list of
    (C, weight) pairs summing to the identity.
    """
    n = factors[0].C.shape[1]
    A = np.zeros((n, n))
    for f in factors:
        A += f.p * f.C.T @ f.C
    lam, U = np.linalg.eigh(sym(A))
    lam_max = float(lam.max())
    if lam_max > 1.0 + 1e-9:
        raise ConditionViolated("stacked map squares above the identity")
    completion = [(f.C, f.p) for f in factors]
    if lam_max < 1.0 - tol:
        completion.extend((f.C, f.p * (1.0 / lam_max - 1.0)) for f in factors)
    for i in range(n):
        w = 1.0 - lam[i] / lam_max
        if w > tol:
            completion.append((U[:, i].reshape(1, n), float(w)))
    return completion


def gaussian_measure_check(factors: Sequence[LinearFactor], inputs,
                           method="auto", nodes=64) -> dict:
    """Verify the Gaussian-measure inequality under C C^* <= P^{-1}.

    Preconditions: the stacked map C satisfies C C^* <= P^{-1} and each
    factor obeys (I - C_i C_i^T)(Q_i - I) = 0 with C_i C_i^T <= I and
    Q_i >= I. Inputs are family members whose Gaussian part sits below
    (Q_i - I)/(2 pi); the report compares the gamma-weighted mixed integral
    against the product of gamma masses (constant one).
    """
    factors = [f if isinstance(f, LinearFactor) else LinearFactor(*f) for f in factors]
    n = factors[0].C.shape[1]
    N = sum(f.nj for f in factors)
    Cstack = np.vstack([f.C for f in factors])
    Pinv = np.zeros((N, N))
    off = 0
    for f in factors:
        Pinv[off:off + f.nj, off:off + f.nj] = np.eye(f.nj) / f.p
        off += f.nj
    if linalg.min_eig(Pinv - Cstack @ Cstack.T) < -1e-9:
        raise ConditionViolated("C C^* exceeds P^{-1}")
    for i, f in enumerate(factors):
        G = f.C @ f.C.T
        I = np.eye(f.nj)
        if linalg.min_eig(I - G) < -1e-9:
            raise ConditionViolated(f"factor {i}: C C^T exceeds the identity")
        if np.linalg.norm((I - G) @ (f.Q - I)) > 1e-8:
            raise ConditionViolated(f"factor {i}: coupling condition fails")
        if linalg.min_eig(f.Q - I) < -1e-9:
            raise ConditionViolated(f"factor {i}: Q below the identity")
    completion = complete_factors(factors)
    total = np.zeros((n, n))
    for C, w in completion:
        total += w * C.T @ C
    identity_residual = float(np.linalg.norm(total - np.eye(n)))
    for i, (f, inp) in enumerate(zip(factors, inputs)):
        bound = (f.Q - np.eye(f.nj)) / (2.0 * PI)
        if not linalg.psd_order(inp.B, bound, tol=1e-9):
            raise ConditionViolated(f"input {i}: Gaussian part above (Q - I)/(2 pi)")
    gamma_datum = BLDatum(
        n=n, factors=tuple(factors), qcal=np.eye(n) / (2.0 * PI))
    val, used, err = forward_lhs(gamma_datum, list(inputs), method=method, nodes=nodes)
    lhs = (2.0 * PI) ** (-n / 2.0) * val
    rhs = 1.0
    for f, inp in zip(factors, inputs):
        rhs *= _gamma_mass(inp) ** f.p
    report = VerifyReport(lhs=float(lhs), rhs=float(rhs), slack=float(rhs - lhs),
                          method=used, est_error=float((2.0 * PI) ** (-n / 2.0) * err),
                          bl_constant=1.0)
    return {
        "report": report,
        "identity_residual": identity_residual,
        "completion_sizes": [int(C.shape[0]) for C, _ in completion],
        "added_factors": len(completion) - len(factors),
    }


def gaussian_vector_check(T, p, Q, inputs, method="auto", nodes=64) -> dict:
    """Jointly-Gaussian form: factor the covariance T = U U^T and check via U's rows."""
    T = sym(linalg.as_matrix(T))
    lam, V = np.linalg.eigh(T)
    if lam.min() < -1e-9:
        raise ConditionViolated("covariance not PSD")
    keep = lam > 1e-12
    U = V[:, keep] * np.sqrt(lam[keep])
    n = int(keep.sum())
    dims = [linalg.as_matrix(q).shape[0] for q in Q]
    factors, off = [], 0
    for d, pi, Qi in zip(dims, p, Q):
        factors.append(LinearFactor(C=U[off:off + d, :], p=float(pi),
                                    Q=linalg.as_matrix(Qi)))
        off += d
    return gaussian_measure_check(factors, inputs, method=method, nodes=nodes)
