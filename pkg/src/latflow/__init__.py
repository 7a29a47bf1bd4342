"""Decorrelation diagnostics for diagonal-flow translates of lattice tori.

Core objects: balanced flow parameters, block-triangular torus lattices and
the diagonal flows acting on them, admissible index sets, exact separation
certificates for mixing weights, deterministic Monte Carlo estimators for
translate integrals and decorrelation gaps, and an executable form of the
separated-tuple case analysis.
"""

from .core import (
    AdmissibleSet,
    BlockPattern,
    FlowParam,
    LatticeReductionError,
    RestrictedParam,
    TorusPoint,
    UnimodularLattice,
    admissible_sets,
    apply_flow,
    delta_spread,
    dual_lattice,
    flow_matrix,
    group_blocks,
    lattice_from_matrix,
    reduce_basis,
    restrict_param,
    restricted_extrema,
    shortest_vector_length,
)
from .testfns import BumpSpec, TrigPoly, bump_eval, character_eval, omega_kernel, siegel_transform, wiener_norm
from .weights import Weight, WeightCertificate, mixing_weights, optimal_theta, separation_witness, weight_value
from .montecarlo import (
    Estimate,
    SweepResult,
    approx_haar_sample,
    affine_mean_decorrelation,
    circle_mean_decorrelation,
    decay_sweep,
    decorrelation_gap,
    estimate_joint_correlation,
    estimate_muI_integral,
    estimate_nu_integral,
    sample_torus,
)
from .caseplan import (
    CasePlanConstants,
    CaseTrace,
    check_separated,
    classify_case,
    lambda_constant,
    recursion_constants,
)

__version__ = "0.1.0"
