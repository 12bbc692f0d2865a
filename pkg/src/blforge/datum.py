"""Datum model: linear factors, the regularized problem datum and Gaussian inputs.

A datum bundles surjective maps C_j : R^n -> R^{n_j}, exponents p_j > 0,
SPD regularization bounds Q_j and an optional PSD localization term Qcal.
The object of interest is

    sup over 0 < B_j <= Q_j  of  prod_j det(B_j)^{p_j} / det(Qcal + sum_j p_j C_j^T B_j C_j)

whose square root is the constant the rest of the package computes,
certifies and verifies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InfeasibleB, InvalidDatumError
from .linalg import PSD_TOL, as_matrix, check_symmetric, sym


@dataclass(frozen=True)
class LinearFactor:
    """One factor (C_j, p_j, Q_j): a surjective map, its exponent and its bound."""

    C: np.ndarray
    p: float
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, "Q", as_matrix(self.Q))
        object.__setattr__(self, "p", float(self.p))

    @property
    def nj(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class BLDatum:
    """Ambient dimension, ordered factors and optional PSD localization matrix."""

    n: int
    factors: tuple
    qcal: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.qcal is not None:
            object.__setattr__(self, "qcal", as_matrix(self.qcal))

    @property
    def m(self) -> int:
        return len(self.factors)

    @property
    def C(self):
        return [f.C for f in self.factors]

    @property
    def p(self):
        return [f.p for f in self.factors]

    @property
    def Q(self):
        return [f.Q for f in self.factors]

    def qcal_or_zero(self) -> np.ndarray:
        return np.zeros((self.n, self.n)) if self.qcal is None else self.qcal

    def mixing_matrix(self, B: Sequence[np.ndarray]) -> np.ndarray:
        """Qcal + sum_j p_j C_j^T B_j C_j for the given per-factor matrices."""
        M = self.qcal_or_zero().copy()
        for f, Bj in zip(self.factors, B):
            M += f.p * f.C.T @ as_matrix(Bj) @ f.C
        return sym(M)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "Qcal": None if self.qcal is None else self.qcal.tolist(),
            "factors": [
                {"C": f.C.tolist(), "p": f.p, "Q": f.Q.tolist()} for f in self.factors
            ],
        }

    @staticmethod
    def from_dict(obj: dict) -> "BLDatum":
        qcal = obj.get("Qcal")
        factors = [LinearFactor(C=np.array(f["C"], dtype=float), p=float(f["p"]),
                                Q=np.array(f["Q"], dtype=float))
                   for f in obj["factors"]]
        return BLDatum(n=int(obj["n"]), factors=tuple(factors),
                       qcal=None if qcal is None else np.array(qcal, dtype=float))


def datum_errors(datum: BLDatum, tol=PSD_TOL) -> list:
    """Names of every violated datum invariant (empty when valid)."""
    errors = []
    n = datum.n
    for idx, f in enumerate(datum.factors):
        if f.C.shape[1] != n:
            errors.append(f"DimensionMismatch: factor {idx} maps from dim {f.C.shape[1]}, want {n}")
            continue
        try:
            check_symmetric(f.Q)
        except Exception:
            errors.append(f"AsymmetricMatrix: Q of factor {idx}")
            continue
        if f.Q.shape[0] != f.nj:
            errors.append(f"DimensionMismatch: Q of factor {idx} is {f.Q.shape}, want ({f.nj},{f.nj})")
        if linalg.matrix_rank(f.C, tol=1e-10) < f.nj:
            errors.append(f"NonSurjectiveC: factor {idx} has rank < {f.nj}")
        if not (f.p > 0):
            errors.append(f"InvalidExponent: factor {idx} has p = {f.p}")
        if not linalg.is_spd(f.Q, tol=tol):
            errors.append(f"NonSPDQ: factor {idx}")
    if datum.qcal is not None:
        try:
            check_symmetric(datum.qcal)
            if datum.qcal.shape != (n, n):
                errors.append("DimensionMismatch: Qcal")
            elif not linalg.is_psd(datum.qcal, tol=tol):
                errors.append("NonPSDQcal")
        except Exception:
            errors.append("AsymmetricMatrix: Qcal")
    else:
        stacked = np.vstack([f.C for f in datum.factors]) if datum.factors else np.zeros((0, n))
        if linalg.matrix_rank(stacked, tol=1e-10) < n:
            errors.append("DegenerateKernelIntersection: common kernel of the C_j is nonzero")
    return errors


def validate_datum(raw, tol=PSD_TOL) -> BLDatum:
    """Build and validate a datum; raises InvalidDatumError naming each violation."""
    datum = BLDatum.from_dict(raw) if isinstance(raw, dict) else raw
    errors = datum_errors(datum, tol=tol)
    if errors:
        raise InvalidDatumError(errors)
    return datum


def qcal_ranks(datum: BLDatum, tol=PSD_TOL):
    """Classify the localization term: 'zero', 'spd' or 'psd' (singular)."""
    if datum.qcal is None or not np.any(np.abs(datum.qcal) > 0):
        return "zero"
    return "spd" if linalg.is_spd(datum.qcal, tol=tol) else "psd"


@dataclass(frozen=True)
class GaussianInput:
    """A feasible tuple (B_j) with 0 < B_j <= Q_j, and its cached mixing matrix."""

    B: tuple
    M: np.ndarray

    @staticmethod
    def from_matrices(datum: BLDatum, B: Sequence[np.ndarray], tol=PSD_TOL,
                      check=True) -> "GaussianInput":
        Bs = tuple(sym(as_matrix(Bj)) for Bj in B)
        if len(Bs) != datum.m:
            raise DimensionMismatch(f"{len(Bs)} input matrices for {datum.m} factors")
        if check:
            for j, (f, Bj) in enumerate(zip(datum.factors, Bs)):
                if Bj.shape != f.Q.shape:
                    raise DimensionMismatch(f"B[{j}] is {Bj.shape}, want {f.Q.shape}")
                if not linalg.is_spd(Bj, tol=1e-13):
                    raise InfeasibleB(f"B[{j}] is not positive definite")
                if not linalg.psd_order(Bj, f.Q, tol=tol):
                    raise InfeasibleB(f"B[{j}] exceeds Q[{j}] in the semidefinite order")
        return GaussianInput(B=Bs, M=datum.mixing_matrix(Bs))


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^n held as an orthonormal n x k basis."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if B.shape[0] != self.ambient_dim:
            raise DimensionMismatch(f"basis rows {B.shape[0]} != ambient dim {self.ambient_dim}")
        if B.shape[1]:
            gram = B.T @ B
            if np.abs(gram - np.eye(B.shape[1])).max() > 1e-10:
                B = linalg.orth_basis(B)
        object.__setattr__(self, "basis", B)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @staticmethod
    def from_span(vectors, ambient_dim=None) -> "Subspace":
        A = np.atleast_2d(np.asarray(vectors, dtype=float))
        if A.shape[0] == 1 and ambient_dim is not None and A.shape[1] == ambient_dim:
            A = A.T
        return Subspace(ambient_dim=A.shape[0], basis=linalg.orth_basis(A))

    def to_dict(self) -> dict:
        return {"ambient_dim": self.ambient_dim, "dim": self.dim, "basis": self.basis.tolist()}
