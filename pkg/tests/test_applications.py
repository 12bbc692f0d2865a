import numpy as np
import pytest

from blforge import (FunctionInput, HCParams, LinearFactor, OptConfig,
                     finiteness_verdict, gaussian_measure_check,
                     gaussian_vector_check, hc_build, hc_constant,
                     hc_fixed_point_scan, hc_threshold, optimize, ratio)
from blforge.applications import complete_factors
from blforge.errors import (BetaNotAboveOne, ConditionViolated, InvalidParams,
                            ThresholdViolated)
from conftest import geometric_four_factor, rand_spd

PI = np.pi
S3 = 0.5 * np.log(3.0)


def params(alpha=2.0, beta=2.0):
    return HCParams(p=2.0, q=4.0, s=S3, alpha=alpha, beta=beta)


class TestHCParams:
    def test_mismatched_exponent_relation(self):
        with pytest.raises(InvalidParams):
            HCParams(p=2.0, q=4.0, s=0.7, alpha=2.0, beta=2.0)

    def test_overflow_guard(self):
        with pytest.raises(InvalidParams):
            HCParams(p=2.0, q=1.0 + np.exp(2 * 25.0), s=25.0, alpha=2.0, beta=2.0)

    def test_zero_time_excluded(self):
        with pytest.raises(InvalidParams):
            HCParams(p=2.0, q=2.0, s=0.0, alpha=2.0, beta=2.0)


class TestBuild:
    def test_off_diagonal_value(self):
        datum = hc_build(params())
        t = 2.0 / 3.0
        assert datum.qcal[0, 1] == pytest.approx(-(1 / np.sqrt(3.0)) / (2 * PI * t), rel=1e-12)

    def test_bounds_are_curvature_levels(self):
        datum = hc_build(params(alpha=1.7, beta=2.2))
        assert datum.factors[0].Q[0, 0] == pytest.approx(1.0 / (2 * PI * 2.2))
        assert datum.factors[1].Q[0, 0] == pytest.approx(1.0 / (2 * PI * 1.7))

    def test_localization_singular_psd_on_grid(self):
        for p in (1.5, 2.0, 3.0):
            for s in (0.2, 1.0, 5.0):
                q = 1.0 + np.exp(2 * s) * (p - 1.0)
                datum = hc_build(HCParams(p=p, q=q, s=s, alpha=2.0, beta=2.0))
                eigs = np.linalg.eigvalsh(datum.qcal)
                assert eigs.min() >= -1e-10
                assert eigs.min() <= 1e-10  # exactly critical coupling
                assert eigs.max() > 0

    def test_finiteness_probes_kernel_of_localization(self):
        datum = hc_build(params())
        verdict = finiteness_verdict(datum)
        assert verdict.status == "FiniteHeuristic"
        assert verdict.deficiency_min >= 0.0


class TestThreshold:
    def test_reference_value(self):
        assert hc_threshold(params()) == pytest.approx(5.0 / 3.0, abs=1e-12)

    def test_limit_toward_one(self):
        val = hc_threshold(params(beta=1.0 + 1e-9))
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_denominator_reduces_to_inverse_beta(self):
        # under the validated exponent relation the threshold denominator
        # collapses to 1/beta, so the infinity sentinel is unreachable
        for p, s, beta in ((1.02, 3.0, 60.0), (2.0, S3, 2.0), (3.0, 0.4, 1.2)):
            q = 1.0 + np.exp(2 * s) * (p - 1.0)
            prm = HCParams(p=p, q=q, s=s, alpha=2.0, beta=beta)
            t = 1.0 - np.exp(-2 * s)
            u = (1.0 - beta) / (p * beta)
            val = hc_threshold(prm)
            assert np.isfinite(val)
            assert val == pytest.approx(beta * (1.0 + u * t), rel=1e-12)

    def test_beta_guard(self):
        with pytest.raises(BetaNotAboveOne):
            hc_threshold(params(beta=0.9))


class TestFixedPointScan:
    def test_above_threshold_no_fixed_point(self):
        scan = hc_fixed_point_scan(params(alpha=1.1 * 5.0 / 3.0))
        assert not scan["has_fixed_point"]
        assert scan["min_gap"] > 1e-8

    def test_degenerate_box_no_fixed_point(self):
        scan = hc_fixed_point_scan(params(alpha=500.0))
        assert not scan["has_fixed_point"]


class TestConstant:
    def test_cross_check_against_corner_ratio(self):
        for alpha in (2.0, 1.1 * 5.0 / 3.0, 3.5):
            prm = params(alpha=alpha)
            datum = hc_build(prm)
            corner = [f.Q for f in datum.factors]
            assert hc_constant(prm) == pytest.approx(
                np.sqrt(ratio(datum, corner)), rel=1e-8)

    def test_value_at_exact_threshold_is_finite(self):
        prm = params(alpha=5.0 / 3.0)
        val = hc_constant(prm)
        assert np.isfinite(val) and val > 0

    def test_below_threshold_rejected(self):
        with pytest.raises(ThresholdViolated):
            hc_constant(params(alpha=1.5))

    def test_optimizer_sits_at_corner_above_threshold(self):
        prm = params(alpha=1.1 * 5.0 / 3.0)
        datum = hc_build(prm)
        res = optimize(datum, OptConfig(seed=2))
        assert res.attained_flag == "Attained"
        assert res.best.B[0][0, 0] == pytest.approx(datum.factors[0].Q[0, 0], abs=1e-6)
        assert res.best.B[1][0, 0] == pytest.approx(datum.factors[1].Q[0, 0], abs=1e-6)
        assert res.bl_constant == pytest.approx(hc_constant(prm), rel=1e-7)

    def test_interior_maximizer_below_threshold(self):
        prm = params(alpha=0.99 * 5.0 / 3.0)
        datum = hc_build(prm)
        res = optimize(datum, OptConfig(seed=2))
        corner = [f.Q for f in datum.factors]
        assert res.ratio > ratio(datum, corner) + 1e-9


class TestGaussianMeasure:
    def test_geometric_family_needs_no_completion(self):
        datum = geometric_four_factor()
        inputs = []
        for f in datum.factors:
            bound = (f.Q - np.eye(f.nj)) / (2 * PI)
            inputs.append(FunctionInput(0.5 * bound, ((1.0, 0.1 * np.ones(f.nj)),)))
        out = gaussian_measure_check(list(datum.factors), inputs)
        assert out["added_factors"] == 0
        assert out["identity_residual"] <= 1e-9
        assert out["report"].slack >= -out["report"].est_error

    def test_completion_identity_on_random_feasible_families(self, rng):
        count = 0
        while count < 50:
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 4))
            factors = []
            for _ in range(m):
                nj = int(rng.integers(1, n + 1))
                C = rng.normal(size=(nj, n))
                u, s, vt = np.linalg.svd(C, full_matrices=False)
                C = u @ np.diag(rng.uniform(0.2, 1.0, size=nj)) @ vt
                factors.append(LinearFactor(C=C, p=float(rng.uniform(0.2, 1.5)),
                                            Q=np.eye(nj)))
            A = sum(f.p * f.C.T @ f.C for f in factors)
            lam = np.linalg.eigvalsh(A)
            if lam.max() > 1.0 or lam.min() < 1e-8:
                continue
            Cstack = np.vstack([f.C for f in factors])
            N = Cstack.shape[0]
            Pinv = np.zeros((N, N))
            off = 0
            for f in factors:
                Pinv[off:off + f.nj, off:off + f.nj] = np.eye(f.nj) / f.p
                off += f.nj
            if np.linalg.eigvalsh(Pinv - Cstack @ Cstack.T).min() < 1e-8:
                continue
            count += 1
            completion = complete_factors(factors)
            total = sum(w * C.T @ C for C, w in completion)
            assert np.linalg.norm(total - np.eye(n)) <= 1e-9

    def test_condition_violation_rejected(self):
        factors = [LinearFactor(C=np.eye(2), p=3.0, Q=np.eye(2))]
        inputs = [FunctionInput(np.zeros((2, 2)), ((1.0, np.zeros(2)),))]
        with pytest.raises(ConditionViolated):
            gaussian_measure_check(factors, inputs)

    def test_jointly_gaussian_vector_form(self, rng):
        rho = 0.4
        T = np.array([[1.0, rho, 0.0],
                      [rho, 1.0, 0.0],
                      [0.0, 0.0, 0.5]])
        p = [0.5, 0.5, 0.5]
        Q = [np.eye(1), np.eye(1), np.eye(1)]
        inputs = [FunctionInput(np.zeros((1, 1)), ((1.0, np.array([0.3])),))
                  for _ in range(3)]
        out = gaussian_vector_check(T, p, Q, inputs)
        assert out["identity_residual"] <= 1e-9
        assert out["report"].slack >= -out["report"].est_error
