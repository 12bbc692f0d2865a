"""Generalized geometric data: detection, intertwining transforms, reduction.

A datum is generalized geometric when sum_j p_j C_j^T C_j = id,
C_j C_j^T <= id, Q_j >= id and (id - C_j C_j^T)(Q_j - id) = 0 for every
factor; such data have constant exactly 1. Any datum with a certified
stationary tuple B reduces to an equivalent geometric one through the
intertwiners D = M^{-1/2}, D_j = B_j^{-1/2}, and constants of equivalent
data differ by prod_j det(D_j)^{p_j} / det(D).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datum import BLDatum, GaussianInput, LinearFactor
from .errors import KKTNotPassed, QcalPresent, SingularIntertwiner, SingularM
from .gaussopt import KKTCertificate, kkt_check
from .linalg import min_eig, sym, sym_inv_sqrt, sym_sqrt


@dataclass
class GeometricReport:
    sum_residual: float
    cc_max_eig: list
    q_min_eig: list
    coupling_residual: list
    is_geometric: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "is_geometric": self.is_geometric,
            "sum_residual": self.sum_residual,
            "cc_max_eig": self.cc_max_eig,
            "q_min_eig": self.q_min_eig,
            "coupling_residual": self.coupling_residual,
            "tol": self.tol,
        }


@dataclass
class EquivalenceMap:
    """Intertwiners D (ambient) and D_j (per factor), with the constant's scale factor."""

    D: np.ndarray
    Dj: list
    scale: float

    def inverse(self) -> "EquivalenceMap":
        Dinv = np.linalg.inv(self.D)
        Djinv = [np.linalg.inv(Dj) for Dj in self.Dj]
        return EquivalenceMap(D=Dinv, Dj=Djinv, scale=1.0 / self.scale)

    def to_dict(self) -> dict:
        return {"D": self.D.tolist(), "Dj": [d.tolist() for d in self.Dj],
                "scale": self.scale}


def _scale_of(datum: BLDatum, D, Dj) -> float:
    num = 1.0
    for f, d in zip(datum.factors, Dj):
        num *= np.linalg.det(d) ** f.p
    return float(num / np.linalg.det(D))


def is_generalized_geometric(datum: BLDatum, tol=1e-8) -> GeometricReport:
    """Check the four geometric conditions and report every residual."""
    if datum.qcal is not None and np.any(np.abs(datum.qcal) > 0):
        raise QcalPresent("geometric conditions are stated for a zero localization term")
    total = np.zeros((datum.n, datum.n))
    cc_max, q_min, coupling = [], [], []
    for f in datum.factors:
        total += f.p * f.C.T @ f.C
        G = f.C @ f.C.T
        cc_max.append(float(np.linalg.eigvalsh(sym(G)).max()))
        q_min.append(float(min_eig(f.Q)))
        I = np.eye(f.nj)
        coupling.append(float(np.linalg.norm((I - G) @ (f.Q - I))))
    sum_residual = float(np.linalg.norm(total - np.eye(datum.n)))
    ok = (sum_residual <= tol and all(c <= 1.0 + tol for c in cc_max)
          and all(q >= 1.0 - tol for q in q_min) and all(r <= tol for r in coupling))
    return GeometricReport(sum_residual=sum_residual, cc_max_eig=cc_max,
                           q_min_eig=q_min, coupling_residual=coupling,
                           is_geometric=ok, tol=tol)


def apply_equivalence(datum: BLDatum, emap: EquivalenceMap) -> BLDatum:
    """Transform to the equivalent datum C_j' = D_j^{-1} C_j D, Q_j' = D_j^T Q_j D_j."""
    if abs(np.linalg.det(emap.D)) <= 1e-12:
        raise SingularIntertwiner("ambient intertwiner is singular")
    for Dj in emap.Dj:
        if abs(np.linalg.det(Dj)) <= 1e-12:
            raise SingularIntertwiner("factor intertwiner is singular")
    factors = []
    for f, Dj in zip(datum.factors, emap.Dj):
        Cp = np.linalg.solve(Dj, f.C @ emap.D)
        Qp = sym(Dj.T @ f.Q @ Dj)
        factors.append(LinearFactor(C=Cp, p=f.p, Q=Qp))
    return BLDatum(n=datum.n, factors=tuple(factors), qcal=datum.qcal)


def transform_input(datum: BLDatum, emap: EquivalenceMap, B: Sequence[np.ndarray]):
    """Push a feasible tuple through the equivalence: B_j' = D_j^T B_j D_j."""
    return [sym(Dj.T @ Bj @ Dj) for Dj, Bj in zip(emap.Dj, B)]


def reduce_to_geometric(datum: BLDatum, B, kkt_tol=1e-6):
    """Reduce at a certified stationary tuple to an equivalent geometric datum.

    Returns (geometric datum, EquivalenceMap). The output satisfies the
    four geometric conditions up to roundoff and the constants obey
    bl' = scale * bl.
    """
    if datum.qcal is not None and np.any(np.abs(datum.qcal) > 0):
        raise QcalPresent("reduction is stated for a zero localization term")
    gi = B if isinstance(B, GaussianInput) else GaussianInput.from_matrices(datum, B)
    cert = B if isinstance(B, KKTCertificate) else kkt_check(datum, gi, tol=kkt_tol)
    if not cert.passed:
        raise KKTNotPassed(
            f"slack_min={min(cert.slack_min_eig):.3e}, "
            f"complementarity_max={max(cert.complementarity_residual):.3e}")
    if min_eig(gi.M) <= 1e-12:
        raise SingularM("mixing matrix not invertible at the certified tuple")
    D = sym_inv_sqrt(gi.M)
    Dj = [sym_inv_sqrt(Bj) for Bj in gi.B]
    emap = EquivalenceMap(D=D, Dj=Dj, scale=_scale_of(datum, D, Dj))
    return apply_equivalence(datum, emap), emap


def equivalence_from_maps(datum: BLDatum, D, Dj) -> EquivalenceMap:
    return EquivalenceMap(D=np.asarray(D, float),
                          Dj=[np.atleast_2d(np.asarray(d, float)) for d in Dj],
                          scale=_scale_of(datum, np.asarray(D, float),
                                          [np.atleast_2d(np.asarray(d, float)) for d in Dj]))
