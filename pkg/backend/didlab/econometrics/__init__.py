from .rng import chunk_indices, component_streams, make_rng, replication_seed
from .dgp_simulator import (
    arm_factor_spec,
    draw_ar1_path,
    draw_ar1_paths,
    draw_factor_paths,
    draw_fixed_population,
    preset_pretest_dgp,
    preset_twoway_mc_dgp,
    simulate_design_based,
    simulate_nested_micro,
    simulate_paired_panel,
    simulate_panel,
    twoway_t_star,
)
from .did_estimators import (
    estimate,
    first_difference,
    long_difference,
    pretest_coefficient,
    switcher_did,
    twfe,
    twfe_regression,
)
from .variance_estimators import (
    compute_variance,
    crve_cluster,
    crve_group,
    hc_robust,
    register_variance_method,
    t_test,
    twoway_cgm,
)
from .closed_forms import (
    corollary_t_variance,
    design_variances,
    exact_finite_variance,
    gap_inputs_from_spec,
    nabla_curve,
    nabla_second_moment,
    paired_twfe_variance,
    prop1_variance_gap,
    propA1_t_variance,
    rejection_from_inflation,
    window_second_moment,
)

__all__ = [
    "chunk_indices",
    "component_streams",
    "make_rng",
    "replication_seed",
    "arm_factor_spec",
    "draw_ar1_path",
    "draw_ar1_paths",
    "draw_factor_paths",
    "draw_fixed_population",
    "preset_pretest_dgp",
    "preset_twoway_mc_dgp",
    "simulate_design_based",
    "simulate_nested_micro",
    "simulate_paired_panel",
    "simulate_panel",
    "twoway_t_star",
    "estimate",
    "first_difference",
    "long_difference",
    "pretest_coefficient",
    "switcher_did",
    "twfe",
    "twfe_regression",
    "compute_variance",
    "crve_cluster",
    "crve_group",
    "hc_robust",
    "register_variance_method",
    "t_test",
    "twoway_cgm",
    "corollary_t_variance",
    "design_variances",
    "exact_finite_variance",
    "gap_inputs_from_spec",
    "nabla_curve",
    "nabla_second_moment",
    "paired_twfe_variance",
    "prop1_variance_gap",
    "propA1_t_variance",
    "rejection_from_inflation",
    "window_second_moment",
]
