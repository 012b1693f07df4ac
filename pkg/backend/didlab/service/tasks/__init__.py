# Experiment runners
from .montecarlo_tasks import binomial_se, rate_cell, run_cell, run_mc, run_replications
from .calibration_tasks import calibrate_factor_variance, two_period_rejection_rate
from .experiment_tasks import (
    run_conditional_lambda_mc,
    run_experiment,
    run_pretest_mc,
    run_pretest_normal_model,
    run_staggered_comparison,
    run_twoway_mc,
    staggered_spec,
)
from .placebo_tasks import enumerate_designs, resolve_panel, run_placebo, run_two_dimension_placebo

__all__ = [
    "binomial_se",
    "rate_cell",
    "run_cell",
    "run_mc",
    "run_replications",
    "calibrate_factor_variance",
    "two_period_rejection_rate",
    "run_conditional_lambda_mc",
    "run_experiment",
    "run_pretest_mc",
    "run_pretest_normal_model",
    "run_staggered_comparison",
    "run_twoway_mc",
    "staggered_spec",
    "enumerate_designs",
    "resolve_panel",
    "run_placebo",
    "run_two_dimension_placebo",
]
