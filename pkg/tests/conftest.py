import numpy as np
import pytest

from blforge import BLDatum, LinearFactor

R2 = 1.0 / np.sqrt(2.0)


def five_factor_datum(drop_factor=None):
    """Four-dimensional datum with five rank-one factors.

    Its box supremum is 1/2, approached as the second and third inputs
    shrink to zero, and never attained. Dropping the fourth factor leaves
    e3 in every kernel, so the constant becomes infinite with witness
    span{e3}.
    """
    rows = [
        ([1.0, -1.0, 0.0, 0.0], 2.0),
        ([0.0, 1.0, 0.0, 0.0], 0.5),
        ([1.0, 0.0, 0.0, 0.0], 0.5),
        ([0.0, 0.0, R2, 0.0], 2.0),
        ([0.0, 0.0, 0.0, R2], 2.0),
    ]
    if drop_factor is not None:
        rows = [r for i, r in enumerate(rows) if i != drop_factor]
    factors = tuple(LinearFactor(C=np.array([row]), p=p, Q=np.eye(1)) for row, p in rows)
    return BLDatum(n=4, factors=factors)


def shear_datum(p=(1.0, 2.0)):
    """Two factors on R^2: a shear and a rank-one map with kernel span{(2,-1)}.

    At the default exponents the supremum is exactly 1/5, attained along
    the one-parameter family (B_eps, 1).
    """
    factors = (
        LinearFactor(C=np.array([[1.0, 1.0], [0.0, 1.0]]), p=p[0], Q=np.eye(2)),
        LinearFactor(C=np.array([[1.0, 2.0]]), p=p[1], Q=np.eye(1)),
    )
    return BLDatum(n=2, factors=factors)


def b_eps(eps):
    return 0.5 * np.array([[1.0 + eps, 1.0 - eps], [1.0 - eps, 1.0 + eps]])


def geometric_two_factor(lam=3.0):
    """Generalized geometric datum whose core span{e2} is invariant under
    every C_j^T C_j; constant 1 attained at B1 = diag(1, alpha), b2 = 1."""
    factors = (
        LinearFactor(C=np.array([[R2, 0.0], [0.0, 1.0]]), p=1.0, Q=np.diag([1.0, lam])),
        LinearFactor(C=np.array([[R2, 0.0]]), p=1.0, Q=np.eye(1)),
    )
    return BLDatum(n=2, factors=factors)


def geometric_four_factor():
    """Generalized geometric datum with four factors whose core span{e1} is
    not invariant, so maximizing inputs are forced Gaussian."""
    factors = (
        LinearFactor(C=np.array([[1.0, 0.0], [0.0, R2]]), p=0.5, Q=np.diag([2.0, 1.0])),
        LinearFactor(C=np.array([[0.0, R2]]), p=0.5, Q=np.eye(1)),
        LinearFactor(C=np.array([[R2, R2]]), p=0.5, Q=2.0 * np.eye(1)),
        LinearFactor(C=np.array([[R2, -R2]]), p=0.5, Q=2.0 * np.eye(1)),
    )
    return BLDatum(n=2, factors=factors)


def rand_spd(rng, d, spread=1.0):
    A = rng.normal(size=(d, d))
    return np.eye(d) * 0.3 + spread * (A @ A.T) / d


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
