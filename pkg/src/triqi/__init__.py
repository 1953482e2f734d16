"""Numerical error-bound analysis for three-photon entangled-state illumination.

Builds the protocol states in truncated Fock spaces, computes discrimination
quantities (Q_s, Chernoff exponent, Bhattacharyya, Helstrom) from first
principles on dense and structured paths, and audits the closed-form
root-overlap result against the principal-root value.
"""

__version__ = "0.1.0"

from .bounds import (BoundReport, advantage_ratio, bhattacharyya_bound, chernoff,
                     error_bound_2gamma, error_bound_3gamma, evaluate_point,
                     helstrom_optimum, povm_error, q_s)
from .errors import (DenseLimitError, NumericalError, RegimeWarning, TriqiError,
                     TruncationError)
from .fock import (DensityOperator, Ket, SpaceDescriptor, annihilation, build_space,
                   creation, number_operator, partial_trace, tensor_ket)
from .overlap_audit import (SignChoice, TraceAudit, audit_overlap, closed_form_overlap,
                            principal_overlap, signed_root_overlap)
from .spectral import (EigenSystem, SecularRoot, eigh, matrix_power,
                       sqrt_diag_plus_rank_one, trace_product)
from .states import (HypothesisPair, ProtocolParams, background_state,
                     build_hypothesis_pair, evolve_exact, hypothesis_h0,
                     hypothesis_h1, load_params, mean_photon_number, thermal_state,
                     three_photon_state)
from .sweep import SweepSpec, SweepTable, emit, run_sweep

__all__ = [
    "BoundReport", "DenseLimitError", "DensityOperator", "EigenSystem",
    "HypothesisPair", "Ket", "NumericalError", "ProtocolParams", "RegimeWarning",
    "SecularRoot", "SignChoice", "SpaceDescriptor", "SweepSpec", "SweepTable",
    "TraceAudit", "TriqiError", "TruncationError", "advantage_ratio",
    "annihilation", "audit_overlap", "background_state", "bhattacharyya_bound",
    "build_hypothesis_pair", "build_space", "chernoff", "closed_form_overlap",
    "creation", "eigh", "emit", "error_bound_2gamma", "error_bound_3gamma",
    "evaluate_point", "evolve_exact", "helstrom_optimum", "hypothesis_h0",
    "hypothesis_h1", "load_params", "matrix_power", "mean_photon_number",
    "number_operator", "partial_trace", "povm_error", "principal_overlap",
    "q_s", "run_sweep", "signed_root_overlap", "sqrt_diag_plus_rank_one",
    "tensor_ket", "thermal_state", "three_photon_state", "trace_product",
]
