import numpy as np
import pytest

from blforge import BLDatum, LinearFactor, OptConfig, kkt_check, optimize, ratio
from blforge.errors import InfeasibleB, SingularM
from blforge.gaussopt import grad_wrt_B
from conftest import (b_eps, five_factor_datum, geometric_four_factor,
                      geometric_two_factor, rand_spd, shear_datum)


class TestRatio:
    def test_family_value_is_one_fifth(self):
        datum = shear_datum()
        for eps in (0.1, 0.5, 0.9):
            assert ratio(datum, [b_eps(eps), np.eye(1)]) == pytest.approx(0.2, abs=1e-10)

    def test_geometric_identity_inputs_give_one(self):
        datum = geometric_four_factor()
        B = [np.eye(f.nj) for f in datum.factors]
        assert ratio(datum, B) == pytest.approx(1.0, abs=1e-12)

    def test_five_factor_shrinking_pair(self):
        datum = five_factor_datum()
        eps = 0.01
        B = [np.eye(1), eps * np.eye(1), eps * np.eye(1), np.eye(1), np.eye(1)]
        assert ratio(datum, B) == pytest.approx(1.0 / (2.0 + eps / 4.0), rel=1e-12)

    def test_box_violation(self):
        with pytest.raises(InfeasibleB):
            ratio(shear_datum(), [2.0 * np.eye(2), np.eye(1)])


class TestKKT:
    def test_certificate_at_family_member(self):
        datum = shear_datum()
        cert = kkt_check(datum, [b_eps(0.5), np.eye(1)])
        assert cert.passed
        assert min(cert.slack_min_eig) >= -1e-8
        assert max(cert.complementarity_residual) <= 1e-8

    def test_geometric_identity_inputs(self):
        datum = geometric_four_factor()
        cert = kkt_check(datum, [np.eye(f.nj) for f in datum.factors])
        assert cert.passed

    def test_interior_non_extremal_point_fails(self):
        datum = shear_datum()
        cert = kkt_check(datum, [0.5 * np.eye(2), 0.5 * np.eye(1)])
        assert not cert.passed


class TestOptimize:
    def test_attained_family(self):
        datum = shear_datum()
        res = optimize(datum, OptConfig(seed=5))
        assert res.ratio == pytest.approx(0.2, abs=1e-6)
        assert res.attained_flag == "Attained"
        assert res.certificate.passed
        assert res.bl_constant ** 2 == pytest.approx(res.ratio, abs=1e-12)

    def test_boundary_escape(self):
        datum = five_factor_datum()
        res = optimize(datum, OptConfig(seed=5))
        assert 0.497 <= res.ratio <= 0.5 + 1e-6
        assert res.attained_flag == "BoundaryEscape"
        assert not res.certificate.passed

    def test_geometric_data_attain_one(self):
        for datum in (geometric_two_factor(), geometric_four_factor()):
            res = optimize(datum, OptConfig(seed=3))
            assert res.ratio == pytest.approx(1.0, abs=1e-6)
            assert res.attained_flag == "Attained"

    def test_two_factor_geometric_maximizer_shape(self):
        res = optimize(geometric_two_factor(), OptConfig(seed=3))
        B1, B2 = res.best.B
        assert B2[0, 0] == pytest.approx(1.0, abs=1e-6)
        assert B1[0, 0] == pytest.approx(1.0, abs=1e-6)
        assert abs(B1[0, 1]) <= 1e-6

    def test_deterministic_given_seed(self):
        datum = shear_datum()
        r1 = optimize(datum, OptConfig(seed=11))
        r2 = optimize(datum, OptConfig(seed=11))
        assert r1.ratio == r2.ratio
        assert all(np.array_equal(a, b) for a, b in zip(r1.best.B, r2.best.B))
        assert r1.trace["selected_start"] == r2.trace["selected_start"]

    def test_enlarging_bounds_never_decreases_ratio(self):
        base = shear_datum()
        values = []
        for t in (0.0, 0.1, 0.5):
            factors = tuple(
                LinearFactor(C=f.C, p=f.p, Q=f.Q + t * np.eye(f.nj))
                for f in base.factors)
            res = optimize(BLDatum(n=2, factors=factors), OptConfig(seed=2, starts=8))
            values.append(res.ratio)
        assert values[0] <= values[1] + 1e-8 <= values[2] + 2e-8

    def test_extremizer_closure_midpoint_and_harmonic(self):
        datum = shear_datum()
        r = 0.2
        for e1, e2 in ((0.2, 0.7), (0.35, 0.9)):
            B, Bp = b_eps(e1), b_eps(e2)
            assert kkt_check(datum, [B, np.eye(1)]).passed
            assert kkt_check(datum, [Bp, np.eye(1)]).passed
            mid = [(B + Bp) / 2.0, np.eye(1)]
            har = [2.0 * np.linalg.inv(np.linalg.inv(B) + np.linalg.inv(Bp)), np.eye(1)]
            assert ratio(datum, mid) >= r - 1e-8
            assert ratio(datum, har) >= r - 1e-8


class TestGradient:
    def test_matches_finite_differences(self, rng):
        cases = 0
        while cases < 100:
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 4))
            factors = []
            for _ in range(m):
                nj = int(rng.integers(1, n + 1))
                C = rng.normal(size=(nj, n))
                factors.append(LinearFactor(C=C, p=float(rng.uniform(0.3, 2.5)),
                                            Q=rand_spd(rng, nj) + np.eye(nj)))
            stacked = np.vstack([f.C for f in factors])
            if np.linalg.matrix_rank(stacked) < n:
                continue
            datum = BLDatum(n=n, factors=tuple(factors))
            B = []
            for f in factors:
                R = rand_spd(rng, f.nj, 0.3)
                R = R / (np.linalg.eigvalsh(R).max() * 1.25)
                B.append(f.Q @ np.zeros((f.nj, f.nj)) + linalg_scale(f.Q, R))
            try:
                grads = grad_wrt_B(datum, B)
            except (InfeasibleB, SingularM):
                continue
            cases += 1

            def F(Bs):
                return float(np.log(ratio(datum, Bs, check=False)))

            for j in range(m):
                E = rng.normal(size=(factors[j].nj, factors[j].nj))
                E = 0.5 * (E + E.T)
                E /= np.linalg.norm(E)
                h = 1e-5
                Bp = [b.copy() for b in B]
                Bm = [b.copy() for b in B]
                Bp[j] = B[j] + h * E
                Bm[j] = B[j] - h * E
                fd = (F(Bp) - F(Bm)) / (2 * h)
                an = float(np.tensordot(grads[j], E))
                assert an == pytest.approx(fd, rel=1e-5, abs=1e-7)


def linalg_scale(Q, R):
    from blforge.linalg import sym, sym_sqrt
    Qh = sym_sqrt(Q)
    return sym(Qh @ R @ Qh)
