"""Finiteness probing through the subspace dimension criterion.

The constant is finite iff every subspace V satisfies
dim(V) <= sum_j p_j dim(C_j V); the signed gap of that inequality is the
deficiency. Negative deficiency at any witness certifies an infinite
constant, so probing is one-sided: `Infinite` verdicts are sound, finite
ones are evidence only (`FiniteHeuristic`).

Probing combines the closure of {ker C_j, ker(I - C_j^T C_j)} under sums
and intersections with seeded Haar-random subspaces refined by greedy
local descent toward kernel directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .datum import BLDatum, LinearFactor, Subspace, qcal_ranks
from .errors import DimensionMismatch, NotCritical
from .linalg import RANK_TOL

CRIT_TOL = 1e-9


@dataclass(frozen=True)
class ProbeBudget:
    samples: int = 10000
    seed: int = 0
    lattice_cap: int = 4096

    @staticmethod
    def from_dict(obj) -> "ProbeBudget":
        obj = obj or {}
        return ProbeBudget(samples=int(obj.get("samples", 10000)),
                           seed=int(obj.get("seed", 0)),
                           lattice_cap=int(obj.get("lattice_cap", 4096)))


@dataclass
class FinitenessVerdict:
    status: str  # "Infinite" | "FiniteHeuristic"
    witness: Optional[Subspace]
    deficiency_min: float
    probes: int
    lattice_truncated: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "deficiency_min": self.deficiency_min,
            "probes": self.probes,
            "lattice_truncated": self.lattice_truncated,
            "note": self.note,
        }


def _rank_of_image(C, basis, tol):
    Y = C @ basis
    if C.shape[0] == 1:
        return 1 if np.linalg.norm(Y) > tol else 0
    return int((np.linalg.svd(Y, compute_uv=False) > tol).sum())


def deficiency(datum: BLDatum, V: Subspace, rank_tol=RANK_TOL) -> float:
    """sum_j p_j rank(C_j V) - dim(V); negative values witness an infinite constant."""
    if V.ambient_dim != datum.n:
        raise DimensionMismatch(f"subspace lives in dim {V.ambient_dim}, datum in {datum.n}")
    if V.dim == 0:
        return 0.0
    return _deficiency_basis(datum, V.basis, rank_tol)


def _deficiency_basis(datum: BLDatum, basis, rank_tol=RANK_TOL) -> float:
    total = 0.0
    for f in datum.factors:
        total += f.p * _rank_of_image(f.C, basis, rank_tol)
    return total - basis.shape[1]


def kernel_lattice(datum: BLDatum, cap=4096, depth=4, op_budget=60000):
    """Closure of {ker C_j, ker(I - C_j^T C_j)} under pairwise sum/intersection.

    Closure runs breadth-first; generic-position seeds generate infinite
    sublattices, so it is bounded three ways: element cap, combination
    depth, and a pair-operation budget. Both combinations of a pair come
    from one eigendecomposition of the summed projectors (eigenvalues near
    2 span the intersection, nonzero ones span the sum). The zero and full
    spaces are dropped. Returns (bases, truncated_flag).
    """
    n = datum.n
    seeds = []
    for f in datum.factors:
        seeds.append(linalg.null_basis(f.C))
        seeds.append(linalg.null_basis(np.eye(n) - f.C.T @ f.C))
    seen = {}
    frontier = []

    def push(B, out=None):
        if 0 < B.shape[1] < n:
            key = linalg.subspace_key(B)
            if key not in seen:
                seen[key] = B
                if out is not None:
                    out.append(B)

    for B in seeds:
        push(B, frontier)
    truncated = False
    ops = 0
    for _ in range(depth):
        if not frontier or truncated:
            break
        new = []
        existing = list(seen.values())
        for Bi in frontier:
            Pi = Bi @ Bi.T
            for Bj in existing:
                if len(seen) >= cap or ops >= op_budget:
                    truncated = True
                    break
                ops += 1
                lam, U = np.linalg.eigh(Pi + Bj @ Bj.T)
                push(U[:, lam > 2.0 - 1e-7], new)
                push(U[:, lam > 1e-7], new)
            if truncated:
                break
        frontier = new
    truncated = truncated or bool(frontier)
    return list(seen.values()), truncated


def _descend(datum: BLDatum, basis: np.ndarray, kernels, rng, moves=8):
    """Greedy local descent: swap one column for a random kernel vector of some C_j.

    Returns (basis, deficiency, evaluations); violating subspaces cluster
    around the kernel lattice, which these moves steer toward.
    """
    best = basis
    best_def = _deficiency_basis(datum, basis)
    evals = 1
    if not kernels:
        return best, best_def, evals
    k = basis.shape[1]
    for _ in range(moves):
        K = kernels[rng.integers(len(kernels))]
        v = K @ rng.normal(size=K.shape[1])
        col = rng.integers(k)
        cand = best.copy()
        cand[:, col] = v
        Q, R = np.linalg.qr(cand)
        if np.abs(np.diag(R)).min() < 1e-9:
            continue
        cand = Q
        d = _deficiency_basis(datum, cand)
        evals += 1
        if d < best_def - 1e-12:
            best, best_def = cand, d
    return best, best_def, evals


def _probe(datum: BLDatum, budget: ProbeBudget, collect_critical=False):
    """Shared probing loop; returns (verdict, critical_bases).

    The whole kernel lattice is scanned first and a negative-deficiency
    witness is selected canonically (most negative deficiency, then
    smallest dimension, then discovery order); the random phase stops at
    the first violation it finds.
    """
    n = datum.n
    lattice, truncated = kernel_lattice(datum, cap=budget.lattice_cap)
    kernels = [K for K in (linalg.null_basis(f.C) for f in datum.factors)
               if K.shape[1] > 0]
    rng = np.random.default_rng(budget.seed)
    probes = 0
    best = np.inf
    witness = None
    witness_rank = None
    critical = {}

    def consider(B, order):
        nonlocal probes, best, witness, witness_rank
        probes += 1
        d = _deficiency_basis(datum, B)
        best = min(best, d)
        if d < -CRIT_TOL:
            rank = (d, B.shape[1], order)
            if witness_rank is None or rank < witness_rank:
                witness, witness_rank = Subspace(n, B), rank
        if collect_critical and abs(d) <= CRIT_TOL and 0 < B.shape[1] < n:
            critical.setdefault(linalg.subspace_key(B), B)
        return d

    consider(np.eye(n), -1)
    for order, B in enumerate(lattice):
        consider(B, order)
    if witness is not None and not collect_critical:
        return FinitenessVerdict("Infinite", witness, best, probes, truncated), []
    dims = list(range(1, n + 1))
    for i in range(budget.samples):
        k = dims[i % len(dims)]
        B = linalg.haar_subspace(rng, n, k)
        consider(B, len(lattice) + i)
        if k < n:
            refined, d, evals = _descend(datum, B, kernels, rng)
            probes += evals
            best = min(best, d)
            if d < -CRIT_TOL and witness is None:
                witness = Subspace(n, refined)
            if collect_critical and abs(d) <= CRIT_TOL:
                critical.setdefault(linalg.subspace_key(refined), refined)
        if witness is not None and not collect_critical:
            break
    status = "Infinite" if witness is not None else "FiniteHeuristic"
    return FinitenessVerdict(status, witness, best, probes, truncated), list(critical.values())


def finiteness_verdict(datum: BLDatum, budget: Optional[ProbeBudget] = None) -> FinitenessVerdict:
    """Probe the subspace criterion; `Infinite` carries a certified witness.

    With an SPD localization term the supremum extends continuously to a
    compact box, so the verdict is immediate and the constant is attained.
    With a singular PSD localization only subspaces of its kernel matter
    and probing runs on the restricted datum.
    """
    budget = budget or ProbeBudget()
    kind = qcal_ranks(datum)
    if kind == "spd":
        return FinitenessVerdict("FiniteHeuristic", None, 0.0, 0, False,
                                 note="attained: localization term is positive definite")
    if kind == "psd":
        K = linalg.null_basis(datum.qcal)
        restricted = BLDatum(
            n=K.shape[1],
            factors=tuple(LinearFactor(C=f.C @ K, p=f.p, Q=f.Q) for f in datum.factors),
            qcal=np.zeros((K.shape[1], K.shape[1])))
        verdict, _ = _probe(restricted, budget)
        if verdict.witness is not None:
            lifted = Subspace(datum.n, linalg.orth_basis(K @ verdict.witness.basis))
            verdict.witness = lifted
        verdict.note = "probed subspaces of ker(Qcal)"
        return verdict
    verdict, _ = _probe(datum, budget)
    return verdict


def find_critical(datum: BLDatum, budget: Optional[ProbeBudget] = None):
    """Probed nontrivial subspaces with |deficiency| <= 1e-9, deduplicated."""
    budget = budget or ProbeBudget()
    _, critical = _probe(datum, budget, collect_critical=True)
    return [Subspace(datum.n, B) for B in critical]


def is_critical(datum: BLDatum, V: Subspace, tol=CRIT_TOL) -> bool:
    return abs(deficiency(datum, V)) <= tol


def restrict_quotient(datum: BLDatum, V: Subspace, tol=CRIT_TOL):
    """Split the datum along a critical subspace V.

    Returns (datum on V, datum on the orthogonal complement, splits) where
    splits is true iff every Q_j maps C_j V into itself and its orthogonal
    complement into itself. Factors whose restricted (or quotient) map is
    zero are dropped from the corresponding sub-datum.
    """
    if datum.qcal is not None and np.any(np.abs(datum.qcal) > 0):
        raise NotCritical("splitting requires a zero localization term")
    d = deficiency(datum, V)
    if abs(d) > tol:
        raise NotCritical(f"deficiency(V) = {d:.3e}")
    Vb = V.basis
    Wb = linalg.complement_basis(Vb)
    restricted, quotient = [], []
    splits = True
    for f in datum.factors:
        E = linalg.orth_basis(f.C @ Vb)
        Ec = linalg.complement_basis(E)
        if E.shape[1] > 0:
            P = E @ E.T
            resid = np.linalg.norm((np.eye(f.nj) - P) @ f.Q @ P)
            if resid > 1e-9 * (1.0 + np.abs(f.Q).max()):
                splits = False
            restricted.append(LinearFactor(C=E.T @ f.C @ Vb, p=f.p, Q=E.T @ f.Q @ E))
        if Ec.shape[1] > 0:
            quotient.append(LinearFactor(C=Ec.T @ f.C @ Wb, p=f.p, Q=Ec.T @ f.Q @ Ec))
    dV = BLDatum(n=Vb.shape[1], factors=tuple(restricted))
    dW = BLDatum(n=Wb.shape[1], factors=tuple(quotient))
    return dV, dW, splits


def lift_split_input(datum: BLDatum, V: Subspace, BV, BW):
    """Assemble block inputs E B_V E^T + E_perp B_W E_perp^T factor by factor."""
    out = []
    iV = iW = 0
    for f in datum.factors:
        E = linalg.orth_basis(f.C @ V.basis)
        Ec = linalg.complement_basis(E)
        M = np.zeros((f.nj, f.nj))
        if E.shape[1] > 0:
            M += E @ BV[iV] @ E.T
            iV += 1
        if Ec.shape[1] > 0:
            M += Ec @ BW[iW] @ Ec.T
            iW += 1
        out.append(linalg.sym(M))
    return out


def scaling_slope(datum: BLDatum, V: Subspace, eps_grid=(1e-3, 1e-4, 1e-5, 1e-6),
                  lam: Optional[float] = None) -> float:
    """Slope of log(candidate constant) vs log(eps) under the shrinking-box probe.

    The probe sets B_j = (eps/lam) id on C_j V plus (1/lam) id on its
    complement with lam chosen so the tuple stays inside the box; the fitted
    slope equals deficiency(V)/2 when the mixing matrix degenerates exactly
    on V.
    """
    if lam is None:
        qmin = min(linalg.min_eig(f.Q) for f in datum.factors)
        lam = 2.0 / qmin
    logs = []
    for eps in eps_grid:
        log_num = 0.0
        M = datum.qcal_or_zero().copy()
        for f in datum.factors:
            E = linalg.orth_basis(f.C @ V.basis)
            P = E @ E.T
            Aj = (eps / lam) * P + (1.0 / lam) * (np.eye(f.nj) - P)
            _, ld = np.linalg.slogdet(Aj)
            log_num += f.p * ld
            M += f.p * f.C.T @ Aj @ f.C
        sign, ldM = np.linalg.slogdet(M)
        if sign <= 0:
            raise NotCritical("mixing matrix singular for the scaling probe")
        logs.append(0.5 * (log_num - ldM))
    coeffs = np.polyfit(np.log(np.asarray(eps_grid)), np.asarray(logs), 1)
    return float(coeffs[0])
