"""Local set approximation on finite point clouds.

Set-to-set distances localized to balls, approximability of a set by model
classes (planes, minimal cones, light cones, zero sets), tangent blow-ups,
flat/singular decomposition, and covering-based dimension estimates — each
numeric result carrying an explicit optimizer gap and sampling slack.
"""

from .geometry import (
    Ball,
    DimensionMismatchError,
    EmptyCloudError,
    PointCloud,
    build_index,
    empty_cloud,
    load_cloud,
    make_cloud,
    nearest_distance,
    restrict,
    save_cloud,
)
from .setdist import (
    DistanceValue,
    EmptyRestrictionError,
    KINDS,
    distance,
    excess,
    relative_excess,
    relative_hausdorff,
    walkup_wets,
)
from .models import (
    ModelClass,
    ModelMember,
    get_class,
    member_distance,
    sample_member,
)
from .generators import (
    SetSampler,
    UnsupportedSpecError,
    analytic_distance,
    generate_window,
    load_sampler,
    make_sampler,
)
from .approx import (
    ApproxQuery,
    ApproxResult,
    EnlargementReport,
    Profile,
    beta,
    enlargement_membership,
    evaluate,
    hausdorff_inf,
    profile,
    theta,
)
from .tangent import (
    BlowupTrace,
    DichotomyVerdict,
    NonConvergentTraceError,
    blow_up,
    dichotomy_check,
    directed_blow_up,
    tangent_membership,
)
from .detect import (
    CalibrationError,
    DecompositionReport,
    DetectabilityParams,
    NotInScopeError,
    PointLabel,
    calibrate_detectability,
    classify_point,
    decompose,
    improving_step_check,
    load_params,
    save_params,
    singular_unilateral,
)
from .dimension import (
    CoveringAudit,
    CoveringProfile,
    CoveringReport,
    DimensionBoundReport,
    DimensionEstimate,
    covering_number_exact,
    covering_number_greedy,
    dimension_bound_audit,
    fit_covering_profile,
    minkowski_estimate,
    verify_covering_lemma,
)

__version__ = "0.1.0"

__all__ = [
    "Ball", "PointCloud", "EmptyCloudError", "DimensionMismatchError",
    "make_cloud", "empty_cloud", "restrict", "build_index", "nearest_distance",
    "save_cloud", "load_cloud",
    "KINDS", "DistanceValue", "EmptyRestrictionError", "excess",
    "relative_excess", "walkup_wets", "relative_hausdorff", "distance",
    "ModelClass", "ModelMember", "get_class", "member_distance", "sample_member",
    "SetSampler", "UnsupportedSpecError", "make_sampler", "load_sampler",
    "generate_window", "analytic_distance",
    "ApproxQuery", "ApproxResult", "Profile", "EnlargementReport",
    "theta", "beta", "hausdorff_inf", "evaluate", "profile",
    "enlargement_membership",
    "BlowupTrace", "DichotomyVerdict", "NonConvergentTraceError",
    "blow_up", "directed_blow_up", "tangent_membership", "dichotomy_check",
    "DetectabilityParams", "CalibrationError", "NotInScopeError", "PointLabel",
    "DecompositionReport", "calibrate_detectability", "classify_point",
    "decompose", "improving_step_check", "singular_unilateral",
    "save_params", "load_params",
    "CoveringReport", "CoveringProfile", "CoveringAudit", "DimensionEstimate",
    "DimensionBoundReport", "covering_number_greedy", "covering_number_exact",
    "minkowski_estimate", "fit_covering_profile", "verify_covering_lemma",
    "dimension_bound_audit",
    "__version__",
]
