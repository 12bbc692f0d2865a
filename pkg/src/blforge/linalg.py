"""Symmetric-matrix utilities and orthonormal subspace arithmetic.

All matrices are dense float64 ndarrays at desk scale (n <= 32).
Semidefinite comparisons go through symmetric eigendecomposition with an
explicit tolerance; the default PSD_TOL = 1e-9 can be overridden per call.
"""

from __future__ import annotations

import numpy as np

from .errors import AsymmetricMatrix, DimensionMismatch, NegativeEigenvalue, NotSPD, SingularA

PSD_TOL = 1e-9
SYM_TOL = 1e-12
RANK_TOL = 1e-9
ANGLE_TOL = 1e-7

TWO_PI = 2.0 * np.pi


def as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim={M.ndim}")
    return M


def check_symmetric(M, tol=SYM_TOL) -> np.ndarray:
    """Validate symmetry of ``M`` and return the symmetrized copy."""
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix is {M.shape}, not square")
    scale = 1.0 + (np.abs(M).max() if M.size else 0.0)
    if np.abs(M - M.T).max() > tol * scale:
        raise AsymmetricMatrix(f"asymmetry {np.abs(M - M.T).max():.3e} exceeds {tol:.1e}*(1+max|M|)")
    return 0.5 * (M + M.T)


def sym(M) -> np.ndarray:
    M = as_matrix(M)
    return 0.5 * (M + M.T)


def min_eig(M) -> float:
    return float(np.linalg.eigvalsh(sym(M)).min())


def is_psd(M, tol=PSD_TOL) -> bool:
    return min_eig(M) >= -tol


def is_spd(M, tol=PSD_TOL) -> bool:
    return min_eig(M) >= tol


def psd_order(A, B, tol=PSD_TOL) -> bool:
    """True iff A <= B in the semidefinite order, i.e. lambda_min(B - A) >= -tol."""
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    return min_eig(B - A) >= -tol


def sym_sqrt(A, tol=PSD_TOL) -> np.ndarray:
    """Spectral PSD square root; eigenvalues in [-1e-9, 0) are clamped to 0."""
    A = check_symmetric(A, tol=1e-9)
    lam, U = np.linalg.eigh(A)
    if lam.min() < -tol:
        raise NegativeEigenvalue(f"eigenvalue {lam.min():.3e} below -{tol:.1e}")
    lam = np.clip(lam, 0.0, None)
    return sym((U * np.sqrt(lam)) @ U.T)


def sym_inv_sqrt(A, floor=1e-12) -> np.ndarray:
    """Spectral inverse square root of an SPD matrix; errors if any eigenvalue < floor."""
    A = sym(as_matrix(A))
    lam, U = np.linalg.eigh(A)
    if lam.min() < floor:
        raise NotSPD(f"eigenvalue {lam.min():.3e} below floor {floor:.1e}")
    return sym((U / np.sqrt(lam)) @ U.T)


def gaussian_integral(A, b) -> float:
    """Closed form of ``int exp(-pi <Ax,x> - <b,x>) dx`` for SPD ``A``.

    Equals det(A)^(-1/2) * exp(<A^-1 b, b> / 4 pi).
    """
    A = sym(as_matrix(A))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (A.shape[0],):
        raise DimensionMismatch(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    lam = np.linalg.eigvalsh(A)
    if lam.min() <= 1e-13:
        raise SingularA(f"lambda_min(A) = {lam.min():.3e}")
    sign, logdet = np.linalg.slogdet(A)
    return float(np.exp(-0.5 * logdet + (np.linalg.solve(A, b) @ b) / (4.0 * np.pi)))


def matrix_rank(M, tol=RANK_TOL) -> int:
    """Rank by counting singular values above ``tol`` (absolute cutoff)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if min(M.shape) == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int((sv > tol).sum())


# ---------------------------------------------------------------------------
# subspaces as n x k matrices with orthonormal columns
# ---------------------------------------------------------------------------

def orth_basis(A, tol=RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column space of ``A`` (n x k, possibly k = 0)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape[1] == 0 or not np.any(A):
        return np.zeros((n, 0))
    U, sv, _ = np.linalg.svd(A, full_matrices=False)
    k = int((sv > tol).sum())
    return U[:, :k]


def null_basis(A, tol=RANK_TOL) -> np.ndarray:
    """Orthonormal basis of ker(A) for an m x n matrix ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if m == 0:
        return np.eye(n)
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    r = int((sv > tol).sum())
    return Vt[r:].T


def complement_basis(B) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(B) in R^n."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return null_basis(B.T)


def subspace_sum(*bases) -> np.ndarray:
    mats = [b for b in bases if b.shape[1] > 0]
    if not mats:
        n = bases[0].shape[0]
        return np.zeros((n, 0))
    return orth_basis(np.hstack(mats))


def subspace_intersect(*bases, tol=RANK_TOL) -> np.ndarray:
    """Intersection via the null space of stacked complement projectors."""
    n = bases[0].shape[0]
    rows = []
    for B in bases:
        if B.shape[1] == 0:
            return np.zeros((n, 0))
        rows.append(np.eye(n) - B @ B.T)
    return null_basis(np.vstack(rows), tol=tol)


def subspace_contains(big, small, tol=RANK_TOL) -> bool:
    """True iff span(small) is a subspace of span(big)."""
    if small.shape[1] == 0:
        return True
    P = big @ big.T
    return float(np.linalg.norm(small - P @ small)) <= tol * max(1.0, small.shape[0])


def subspace_equal(A, B, tol=ANGLE_TOL) -> bool:
    """Column-space equality, tested through the projector distance."""
    if A.shape[1] != B.shape[1]:
        return False
    if A.shape[1] == 0:
        return True
    return float(np.linalg.norm(A @ A.T - B @ B.T)) <= tol


def subspace_key(B, digits=7) -> bytes:
    """Hashable canonical key of a column space (rounded projector bytes)."""
    P = B @ B.T
    return np.round(P, digits).tobytes()


def preimage_basis(T, V, tol=RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the preimage {x : T x in span(V)} for square T."""
    n = T.shape[1]
    if V.shape[1] == 0:
        return null_basis(T, tol=tol)
    P = np.eye(V.shape[0]) - V @ V.T
    return null_basis(P @ T, tol=tol)


def haar_subspace(rng, n, k) -> np.ndarray:
    """Haar-random k-dimensional subspace of R^n via QR of a Gaussian matrix."""
    G = rng.normal(size=(n, k))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))
