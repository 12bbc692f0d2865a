"""Regularized Brascamp-Lieb toolkit.

Computes and certifies constants of the form

    BL = sup over 0 < B_j <= Q_j of
         { prod_j det(B_j)^{p_j} / det(Qcal + sum_j p_j C_j^T B_j C_j) }^{1/2}

together with finiteness probing, stationarity certificates, reduction to
generalized geometric data, equality-case structure and numerical
verification of the forward and dual inequalities.
"""

from .datum import BLDatum, GaussianInput, LinearFactor, Subspace, validate_datum
from .finiteness import (FinitenessVerdict, ProbeBudget, deficiency, find_critical,
                         finiteness_verdict, restrict_quotient, scaling_slope)
from .gaussopt import KKTCertificate, OptConfig, OptResult, kkt_check, optimize, ratio
from .geometric import (EquivalenceMap, GeometricReport, apply_equivalence,
                        is_generalized_geometric, reduce_to_geometric)
from .structure import StructureReport, compute_K, compute_h_dep, independent_subspaces, structure_report
from .verify import (FunctionInput, TruncatedGaussian1D, VerifyReport, conv_inputs,
                     equality_check, forward_check, heat_evolve, heatflow_monotone,
                     j_functional, reverse_check)
from .caffarelli import (Brenier1DResult, Potential1D, brenier_1d, contraction_bound,
                         coulomb_bound, divergence_bound, gaussian_brenier_hessian,
                         trace_inequality_check)
from .applications import (HCParams, gaussian_measure_check, gaussian_vector_check,
                           hc_build, hc_constant, hc_fixed_point_scan, hc_threshold)
from .linalg import gaussian_integral, psd_order, sym_sqrt

__version__ = "0.1.0"

__all__ = [
    "BLDatum", "GaussianInput", "LinearFactor", "Subspace", "validate_datum",
    "FinitenessVerdict", "ProbeBudget", "deficiency", "find_critical",
    "finiteness_verdict", "restrict_quotient", "scaling_slope",
    "KKTCertificate", "OptConfig", "OptResult", "kkt_check", "optimize", "ratio",
    "EquivalenceMap", "GeometricReport", "apply_equivalence",
    "is_generalized_geometric", "reduce_to_geometric",
    "StructureReport", "compute_K", "compute_h_dep", "independent_subspaces",
    "structure_report",
    "FunctionInput", "TruncatedGaussian1D", "VerifyReport", "conv_inputs",
    "equality_check", "forward_check", "heat_evolve", "heatflow_monotone",
    "j_functional", "reverse_check",
    "Brenier1DResult", "Potential1D", "brenier_1d", "contraction_bound",
    "coulomb_bound", "divergence_bound", "gaussian_brenier_hessian",
    "trace_inequality_check",
    "HCParams", "gaussian_measure_check", "gaussian_vector_check", "hc_build",
    "hc_constant", "hc_fixed_point_scan", "hc_threshold",
    "gaussian_integral", "psd_order", "sym_sqrt",
    "__version__",
]
