"""Equality-case skeleton of a generalized geometric datum.

For each factor let W_j = ker(id - C_j^T C_j) (directions the factor maps
isometrically) and write K for the intersection over j of
ker(C_j) + W_j. Intersections of per-factor choices from
{ker C_j, W_j} that are nonzero are the independent subspaces; their
presence permits non-Gaussian maximizing inputs. The dependent core is
the largest subspace of K invariant under every C_j^T C_j; nonzero
invariant subspaces of K are automatically critical.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from . import linalg
from .datum import BLDatum, Subspace
from .errors import NotGeometric, TooManyFactors
from .finiteness import deficiency
from .geometric import is_generalized_geometric


@dataclass
class StructureReport:
    K: Subspace
    kerC: list
    W: list
    independent: list
    h_dep: Subspace
    critical_flags: dict
    gaussian_forced: bool

    def to_dict(self) -> dict:
        return {
            "K": self.K.to_dict(),
            "kerC": [s.to_dict() for s in self.kerC],
            "W": [s.to_dict() for s in self.W],
            "independent": [s.to_dict() for s in self.independent],
            "H_dep": self.h_dep.to_dict(),
            "critical_flags": self.critical_flags,
            "gaussian_forced": self.gaussian_forced,
        }


def _require_geometric(datum: BLDatum, tol=1e-8):
    report = is_generalized_geometric(datum, tol=tol)
    if not report.is_geometric:
        raise NotGeometric(f"geometric residuals: sum={report.sum_residual:.2e}")


def isometric_part(factor) -> np.ndarray:
    """Orthonormal basis of ker(id - C_j^T C_j) in the ambient space."""
    n = factor.C.shape[1]
    return linalg.null_basis(np.eye(n) - factor.C.T @ factor.C)


def compute_K(datum: BLDatum, tol=1e-8) -> Subspace:
    """Intersection over factors of ker(C_j) + ker(id - C_j^T C_j)."""
    _require_geometric(datum, tol=tol)
    n = datum.n
    pieces = []
    for f in datum.factors:
        pieces.append(linalg.subspace_sum(linalg.null_basis(f.C), isometric_part(f)))
    return Subspace(n, linalg.subspace_intersect(*pieces))


def independent_subspaces(datum: BLDatum, tol=1e-8):
    """All nonzero intersections of per-factor choices from {ker C_j, W_j}."""
    _require_geometric(datum, tol=tol)
    if datum.m > 16:
        raise TooManyFactors(f"{datum.m} factors exceed the 2^m enumeration cap of 16")
    n = datum.n
    options = []
    for f in datum.factors:
        options.append((linalg.null_basis(f.C), isometric_part(f)))
    found = {}
    for choice in product((0, 1), repeat=datum.m):
        inter = linalg.subspace_intersect(*(options[j][c] for j, c in enumerate(choice)))
        if inter.shape[1] > 0:
            found.setdefault(linalg.subspace_key(inter), inter)
    return [Subspace(n, B) for B in found.values()]


def compute_h_dep(datum: BLDatum, tol=1e-8) -> Subspace:
    """Largest subspace of K invariant under every C_j^T C_j.

    Backward iteration V <- V and preimages of V under the maps C_j^T C_j,
    terminating in at most n steps; any nonzero fixed point is critical.
    """
    K = compute_K(datum, tol=tol)
    n = datum.n
    maps = [f.C.T @ f.C for f in datum.factors]
    V = K.basis
    for _ in range(n + 1):
        if V.shape[1] == 0:
            break
        pieces = [V] + [linalg.preimage_basis(T, V) for T in maps]
        newV = linalg.subspace_intersect(*pieces)
        if newV.shape[1] == V.shape[1]:
            V = newV
            break
        V = newV
    return Subspace(n, V)


def structure_report(datum: BLDatum, tol=1e-8) -> StructureReport:
    """Full skeleton: K, kernels, isometric parts, independents, dependent core."""
    _require_geometric(datum, tol=tol)
    n = datum.n
    K = compute_K(datum, tol=tol)
    kerC = [Subspace(n, linalg.null_basis(f.C)) for f in datum.factors]
    W = [Subspace(n, isometric_part(f)) for f in datum.factors]
    indep = independent_subspaces(datum, tol=tol)
    h_dep = compute_h_dep(datum, tol=tol)
    flags = {}
    labeled = [("K", K)] + [(f"independent[{i}]", s) for i, s in enumerate(indep)]
    labeled.append(("H_dep", h_dep))
    for name, s in labeled:
        if 0 < s.dim:
            flags[name] = bool(abs(deficiency(datum, s)) <= 1e-8)
    return StructureReport(K=K, kerC=kerC, W=W, independent=indep, h_dep=h_dep,
                           critical_flags=flags, gaussian_forced=len(indep) == 0)
