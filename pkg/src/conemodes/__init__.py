"""Mode analysis of deformation operators on hyperbolic cone-manifold tubes."""

from conemodes.geometry import (
    ConeModel,
    CrossSection,
    DomainError,
    LaurentSeries,
    RADIAL_FUNCTIONS,
    frame_connection_table,
    radial_series,
)
from conemodes.modes import (
    BasisRelation,
    CoclosedMode,
    ModeList,
    ScalarMode,
    TTMode,
    UnsupportedCrossSectionError,
    active_tensor_families,
    basis_relation_table,
    circle_spectrum,
)
from conemodes.reduction import (
    ModeSystem,
    OneFormModeBlock,
    QuadratureConvergenceError,
    RadialProfile,
    TensorModeBlock,
    apply_L_oneform,
    apply_P_tensor,
    block_csv_rows,
    block_from_dict,
    block_to_dict,
    component_weights,
    ext_d_oneform,
    grad_oneform,
    l2_norm_tube,
    log_grid,
    oneform_system,
    scalar_mode_operator,
    standard_deformation_block,
    tensor_system,
    trace_tensor_mode,
)
from conemodes.indicial import (
    IndicialReport,
    IndicialRoot,
    angle_admissibility,
    classify_exponent,
    exact_indicial_analysis,
    indicial_report,
    root_table_rows,
    system_for_mode,
)
from conemodes.frobenius import (
    AngleDeformation,
    ContinuedSolution,
    FrobeniusError,
    FrobeniusSeries,
    ModeBVPResult,
    admissible_branches,
    angle_deformation_profile,
    frobenius_series,
    induced_singular_deformation,
    inhomogeneous_series,
    integrate_mode_ode,
    series_block,
    solve_mode_bvp,
)

__version__ = "0.1.0"

__all__ = [
    "ConeModel",
    "CrossSection",
    "DomainError",
    "LaurentSeries",
    "RADIAL_FUNCTIONS",
    "frame_connection_table",
    "radial_series",
    "BasisRelation",
    "CoclosedMode",
    "ModeList",
    "ScalarMode",
    "TTMode",
    "UnsupportedCrossSectionError",
    "active_tensor_families",
    "basis_relation_table",
    "circle_spectrum",
    "ModeSystem",
    "OneFormModeBlock",
    "QuadratureConvergenceError",
    "RadialProfile",
    "TensorModeBlock",
    "apply_L_oneform",
    "apply_P_tensor",
    "block_csv_rows",
    "block_from_dict",
    "block_to_dict",
    "component_weights",
    "ext_d_oneform",
    "grad_oneform",
    "l2_norm_tube",
    "log_grid",
    "oneform_system",
    "scalar_mode_operator",
    "standard_deformation_block",
    "tensor_system",
    "trace_tensor_mode",
    "IndicialReport",
    "IndicialRoot",
    "angle_admissibility",
    "classify_exponent",
    "exact_indicial_analysis",
    "indicial_report",
    "root_table_rows",
    "system_for_mode",
    "AngleDeformation",
    "ContinuedSolution",
    "FrobeniusError",
    "FrobeniusSeries",
    "ModeBVPResult",
    "admissible_branches",
    "angle_deformation_profile",
    "frobenius_series",
    "induced_singular_deformation",
    "inhomogeneous_series",
    "integrate_mode_ode",
    "series_block",
    "solve_mode_bvp",
    "__version__",
]
