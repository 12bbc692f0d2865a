"""Anisotropic contraction bounds for transport maps.

Given curvature bounds Hess V <= A on the source and Hess W >= B on the
target, the transport potential's Hessian is dominated by
A^{1/2} (A^{1/2} B A^{1/2})^{-1/2} A^{1/2}, with equality for the map
between the Gaussians N(0, A^{-1}) and N(0, B^{-1}). One-dimensional maps
are computed directly from CDF tables for a quadratic + log-cosh + linear
potential family, and the divergence variant bounds ||div(A grad Phi)|| by
sqrt(alpha Tr(A G)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from . import linalg
from .errors import DegenerateDenominator, EmptyList, MassMismatch, NotPSD, NotSPD
from .linalg import sym, sym_inv_sqrt, sym_sqrt

PI = np.pi


def _require_spd(M, name):
    if not linalg.is_spd(M, tol=1e-12):
        raise NotSPD(f"{name} is not positive definite")
    return sym(linalg.as_matrix(M))


def contraction_bound(A, B) -> np.ndarray:
    """H = A^{1/2} (A^{1/2} B A^{1/2})^{-1/2} A^{1/2}; solves H B H = A."""
    A = _require_spd(A, "A")
    B = _require_spd(B, "B")
    Ah = sym_sqrt(A)
    inner = sym_inv_sqrt(sym(Ah @ B @ Ah))
    return sym(Ah @ inner @ Ah)


def gaussian_brenier_hessian(A, B) -> np.ndarray:
    """Hessian of the transport potential from N(0, A^{-1}) to N(0, B^{-1}).

    The unique SPD solution X of X A^{-1} X = B^{-1}; it coincides with
    contraction_bound(A, B), which makes the bound sharp.
    """
    A = _require_spd(A, "A")
    B = _require_spd(B, "B")
    Binv_h = sym_inv_sqrt(B)
    inner = sym_sqrt(sym(sym_sqrt(B) @ A @ sym_sqrt(B)))
    return sym(Binv_h @ inner @ Binv_h)


def divergence_bound(alpha: float, A, G) -> float:
    """sqrt(alpha * Tr(A G)) for div(A grad V) <= alpha and Hess W >= G^{-1}."""
    if not alpha > 0:
        raise NotPSD("alpha must be positive")
    A = sym(linalg.as_matrix(A))
    if not linalg.is_psd(A, tol=1e-12):
        raise NotPSD("A must be positive semi-definite")
    G = _require_spd(G, "G")
    return float(np.sqrt(alpha * np.trace(A @ G)))


def gaussian_divergence_case(S, T, A):
    """Companion identity for Gaussian endpoints N(0,S) -> N(0,T).

    Returns (Tr(A H), bound) with H the transport Hessian, alpha = Tr(A S^{-1})
    and G = T; the first value never exceeds the second.
    """
    S = _require_spd(S, "S")
    T = _require_spd(T, "T")
    A = sym(linalg.as_matrix(A))
    H = gaussian_brenier_hessian(np.linalg.inv(S), np.linalg.inv(T))
    alpha = float(np.trace(A @ np.linalg.inv(S)))
    return float(np.trace(A @ H)), divergence_bound(alpha, A, T)


def trace_inequality_check(B, C, D) -> float:
    """Slack of Tr(B^{-1} C D C) >= Tr(D B)^{-1} Tr(D C)^2; nonnegative."""
    B = _require_spd(B, "B")
    C = sym(linalg.as_matrix(C))
    D = sym(linalg.as_matrix(D))
    for name, M in (("C", C), ("D", D)):
        if not linalg.is_psd(M, tol=1e-12):
            raise NotPSD(f"{name} must be positive semi-definite")
    if not np.any(np.abs(C) > 0):
        raise DegenerateDenominator("C must be nonzero")
    tDB = float(np.trace(D @ B))
    if tDB <= 1e-300:
        raise DegenerateDenominator("Tr(D B) must be positive")
    lhs = float(np.trace(np.linalg.solve(B, C @ D @ C)))
    return lhs - float(np.trace(D @ C)) ** 2 / tDB


def coulomb_bound(factors) -> float:
    """sqrt((sum_i alpha_i) * sum_i Tr(A_i G_i)) over 2x2 blocks."""
    factors = list(factors)
    if not factors:
        raise EmptyList("need at least one factor")
    alpha = 0.0
    trace_sum = 0.0
    for A, G, a in factors:
        A = sym(linalg.as_matrix(A))
        if not linalg.is_psd(A, tol=1e-12):
            raise NotPSD("block A must be positive semi-definite")
        G = _require_spd(G, "block G")
        if not a > 0:
            raise NotPSD("block alpha must be positive")
        alpha += float(a)
        trace_sum += float(np.trace(A @ G))
    return float(np.sqrt(alpha * trace_sum))


# ---------------------------------------------------------------------------
# one-dimensional transport maps from CDF tables
# ---------------------------------------------------------------------------

def _log_cosh(x):
    x = np.asarray(x, dtype=float)
    return np.abs(x) + np.log1p(np.exp(-2.0 * np.abs(x))) - np.log(2.0)


@dataclass(frozen=True)
class Potential1D:
    """V(x) = quad x^2 + logcosh * log(cosh x) + lin x; density exp(-V)."""

    quad: float
    logcosh: float = 0.0
    lin: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.quad * x ** 2 + self.lin * x
        if self.logcosh:
            out = out + self.logcosh * _log_cosh(x)
        return out

    def curvature_max(self) -> float:
        """Supremum of V'' over the line."""
        return 2.0 * self.quad + max(self.logcosh, 0.0)

    def curvature_min(self) -> float:
        return 2.0 * self.quad + min(self.logcosh, 0.0)

    @staticmethod
    def from_dict(obj) -> "Potential1D":
        return Potential1D(quad=float(obj.get("quad", 0.0)),
                           logcosh=float(obj.get("logcosh", 0.0)),
                           lin=float(obj.get("lin", 0.0)))


@dataclass
class Brenier1DResult:
    xs: np.ndarray
    T: np.ndarray
    second_diff_max: float
    bound: float
    grid_tol: float
    monotone: bool

    def to_dict(self) -> dict:
        return {"second_diff_max": self.second_diff_max, "bound": self.bound,
                "grid_tol": self.grid_tol, "monotone": self.monotone,
                "slack": self.bound + self.grid_tol - self.second_diff_max}


def _cdf_table(V: Potential1D, radius, points, tail_cut=1e-14):
    xs = np.linspace(-radius, radius, points)
    dens = np.exp(-V(xs))
    F = cumulative_simpson(dens, x=xs, initial=0.0)
    Z = F[-1]
    if not np.isfinite(Z) or Z <= 0:
        raise MassMismatch("potential does not normalize on the table")
    F, dens = F / Z, dens / Z
    if dens[0] > 1e-8 or dens[-1] > 1e-8:
        raise MassMismatch("density tail not negligible at the table boundary")
    keep = dens > tail_cut
    i0 = int(np.argmax(keep))
    i1 = len(xs) - int(np.argmax(keep[::-1]))
    return xs[i0:i1], F[i0:i1], dens[i0:i1]


def brenier_1d(mu: Potential1D, nu: Potential1D, radius=10.0, table_points=400001,
               step=1e-3, window=3.0) -> Brenier1DResult:
    """Monotone transport map T = F_nu^{-1} o F_mu and its difference quotient.

    CDF tables use cumulative Simpson with tails truncated where the density
    drops below 1e-14; the map's centered difference quotient is evaluated
    on a window where both densities exceed 1e-9, and is bounded by
    sqrt(curvature_max(mu) / curvature_min(nu)) up to grid_tol.
    """
    xs_u, Fu, fu = _cdf_table(mu, radius, table_points)
    xs_v, Fv, fv = _cdf_table(nu, radius, table_points)
    grid = np.arange(-window, window + step / 2.0, step)
    q = np.interp(grid, xs_u, Fu)
    T = np.interp(q, Fv, xs_v)
    fu_g = np.interp(grid, xs_u, fu)
    fv_T = np.interp(T, xs_v, fv)
    dq = (T[2:] - T[:-2]) / (2.0 * step)
    ok = (fu_g[1:-1] > 1e-9) & (fv_T[1:-1] > 1e-9)
    if not ok.any():
        raise MassMismatch("no well-conditioned grid window for the difference quotient")
    second_diff_max = float(dq[ok].max())
    a = mu.curvature_max()
    b = nu.curvature_min()
    if b <= 0:
        raise MassMismatch("target potential needs positive curvature lower bound")
    bound = float(np.sqrt(a / b))
    grid_tol = float(2.0 * max(fu.max(), fv.max()) * step)
    monotone = bool(np.all(np.diff(T) >= -1e-12))
    return Brenier1DResult(xs=grid, T=T, second_diff_max=second_diff_max,
                           bound=bound, grid_tol=grid_tol, monotone=monotone)
