import numpy as np
import pytest

from blforge import (BLDatum, LinearFactor, OptConfig, Subspace, compute_K,
                     compute_h_dep, deficiency, independent_subspaces, optimize,
                     structure_report)
from blforge.errors import NotGeometric, TooManyFactors
from blforge.geometric import apply_equivalence, equivalence_from_maps, reduce_to_geometric, transform_input
from conftest import geometric_four_factor, geometric_two_factor


def line(v):
    v = np.asarray(v, dtype=float)
    return v[:, None] / np.linalg.norm(v)


E1 = line([1.0, 0.0])
E2 = line([0.0, 1.0])


def same_space(s: Subspace, basis):
    return s.dim == basis.shape[1] and np.allclose(
        s.basis @ s.basis.T, basis @ basis.T, atol=1e-9)


class TestComputeK:
    def test_two_factor_core_is_e2(self):
        assert same_space(compute_K(geometric_two_factor()), E2)

    def test_four_factor_core_is_e1(self):
        assert same_space(compute_K(geometric_four_factor()), E1)

    def test_single_identity_factor_core_is_everything(self):
        datum = BLDatum(n=2, factors=(LinearFactor(C=np.eye(2), p=1.0, Q=2 * np.eye(2)),))
        assert compute_K(datum).dim == 2

    def test_non_geometric_rejected(self):
        from conftest import shear_datum
        with pytest.raises(NotGeometric):
            compute_K(shear_datum())


class TestIndependentSubspaces:
    def test_two_factor_has_one(self):
        indep = independent_subspaces(geometric_two_factor())
        assert len(indep) == 1 and same_space(indep[0], E2)

    def test_four_factor_has_none(self):
        assert independent_subspaces(geometric_four_factor()) == []

    def test_single_identity_factor_gives_whole_space(self):
        datum = BLDatum(n=2, factors=(LinearFactor(C=np.eye(2), p=1.0, Q=2 * np.eye(2)),))
        indep = independent_subspaces(datum)
        assert len(indep) == 1 and indep[0].dim == 2

    def test_factor_cap(self):
        f = LinearFactor(C=np.eye(1), p=1.0 / 17.0, Q=np.eye(1))
        datum = BLDatum(n=1, factors=(f,) * 17)
        with pytest.raises(TooManyFactors):
            independent_subspaces(datum)


class TestDependentCore:
    def test_two_factor_core_is_invariant(self):
        assert same_space(compute_h_dep(geometric_two_factor()), E2)

    def test_four_factor_core_collapses(self):
        assert compute_h_dep(geometric_four_factor()).dim == 0

    def test_single_identity_factor(self):
        datum = BLDatum(n=2, factors=(LinearFactor(C=np.eye(2), p=1.0, Q=2 * np.eye(2)),))
        assert compute_h_dep(datum).dim == 2


class TestStructureReport:
    def test_two_factor_report(self):
        rep = structure_report(geometric_two_factor())
        assert same_space(rep.K, E2)
        assert same_space(rep.h_dep, E2)
        assert len(rep.independent) == 1
        assert not rep.gaussian_forced
        assert rep.critical_flags["K"] and rep.critical_flags["H_dep"]

    def test_four_factor_report_forces_gaussian(self):
        rep = structure_report(geometric_four_factor())
        assert same_space(rep.K, E1)
        assert rep.independent == [] and rep.h_dep.dim == 0
        assert rep.gaussian_forced
        assert not rep.critical_flags["K"]

    def test_isometric_parts_live_in_row_space(self):
        datum = geometric_four_factor()
        rep = structure_report(datum)
        for f, W in zip(datum.factors, rep.W):
            if W.dim == 0:
                continue
            proj = f.C.T @ np.linalg.pinv(f.C).T
            assert np.linalg.norm(W.basis - proj @ W.basis) <= 1e-9

    def test_independent_subspaces_kernel_or_isometry(self):
        datum = geometric_two_factor()
        rep = structure_report(datum)
        for s in rep.independent:
            for f in datum.factors:
                img = f.C @ s.basis
                fixed = f.C.T @ f.C @ s.basis - s.basis
                assert np.linalg.norm(img) <= 1e-9 or np.linalg.norm(fixed) <= 1e-9


class TestInvariantCoreCriticality:
    def test_random_geometric_reductions_have_critical_cores(self, rng):
        # build random certified data as equivalence images of a geometric
        # seed, reduce them back and test the nonzero invariant core
        seed = geometric_two_factor()
        checked = 0
        for _ in range(100):
            D = rng.normal(size=(2, 2)) + 2.5 * np.eye(2)
            Dj = [rng.normal(size=(2, 2)) + 2.5 * np.eye(2),
                  np.array([[rng.uniform(0.5, 2.0)]])]
            emap = equivalence_from_maps(seed, D, Dj)
            moved = apply_equivalence(seed, emap)
            B = transform_input(seed, emap, [np.eye(f.nj) for f in seed.factors])
            geo, _ = reduce_to_geometric(moved, B)
            core = compute_h_dep(geo, tol=1e-6)
            if core.dim > 0:
                assert abs(deficiency(geo, core)) <= 1e-8
                checked += 1
        assert checked >= 90

    def test_forced_gaussian_matches_optimizer(self):
        datum = geometric_four_factor()
        rep = structure_report(datum)
        assert rep.gaussian_forced
        res = optimize(datum, OptConfig(seed=4))
        for f, Bj in zip(datum.factors, res.best.B):
            assert np.allclose(Bj, np.eye(f.nj), atol=1e-5)
