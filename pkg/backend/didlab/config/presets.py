"""Shipped experiment presets."""
from typing import Callable, Dict, List, Union

from ..errors import ErrorCode, LabError
from ..model import (
    ARSpec,
    AssignmentScheme,
    ConditionalLambdaSettings,
    CurvePreset,
    EstimatorTag,
    ExperimentKind,
    FactorModelSpec,
    FixedAssignment,
    MCConfig,
    NestedMicroSpec,
    NormalModelSettings,
    PlaceboPlan,
    PlaceboPreset,
    PretestSettings,
    ReferenceDistribution,
    StaggeredSettings,
    TwoWaySettings,
    VarianceMethod,
)

Preset = Union[MCConfig, PlaceboPreset, CurvePreset]


def _table_a1() -> MCConfig:
    return MCConfig(
        name="table-a1",
        kind=ExperimentKind.TWOWAY,
        preset="table-a1",
        estimators=[EstimatorTag.TWFE],
        variance_methods=[VarianceMethod.HC_ROBUST, VarianceMethod.CRVE_GROUP, VarianceMethod.TWOWAY_CGM],
        reference=ReferenceDistribution.NORMAL,
        reps=5000,
        twoway=TwoWaySettings(),
    )


def _table_a2() -> MCConfig:
    return MCConfig(
        name="table-a2",
        kind=ExperimentKind.PRETEST,
        preset="table-a2",
        estimators=[EstimatorTag.FD],
        reps=5000,
        pretest=PretestSettings(),
    )


def _conditional_lambda() -> MCConfig:
    settings = ConditionalLambdaSettings()
    dgp = FactorModelSpec(
        loading_mean_treated=[0.0],
        loading_mean_control=[0.0],
        loading_cov_treated=[[1.0]],
        loading_cov_control=[[1.0]],
        factor_process=[ARSpec(rho=0.5, sigma_nu2=1.0)],
        assignment=FixedAssignment(n_treated=100),
    )
    return MCConfig(
        name="conditional-lambda",
        kind=ExperimentKind.CONDITIONAL_LAMBDA,
        preset="conditional-lambda",
        dgp=dgp,
        n_groups=200,
        n_periods=10,
        t_star=5,
        reps=settings.n_lambda_draws * settings.reps_per_lambda,
        conditional=settings,
    )


def _staggered_comparison() -> MCConfig:
    return MCConfig(
        name="staggered-comparison",
        kind=ExperimentKind.STAGGERED_COMPARISON,
        preset="staggered-comparison",
        estimators=[EstimatorTag.TWFE, EstimatorTag.SWITCHER, EstimatorTag.LONGDIFF],
        n_groups=200,
        n_periods=10,
        t_star=[3, 7],
        horizon=2,
        reps=5000,
        staggered=StaggeredSettings(),
    )


def _pretest_normal_model() -> MCConfig:
    return MCConfig(
        name="pretest-normal-model",
        kind=ExperimentKind.PRETEST_NORMAL_MODEL,
        preset="pretest-normal-model",
        reps=100_000,
        reference=ReferenceDistribution.NORMAL,
        normal_model=NormalModelSettings(cov=0.5, gap_inflation=0.5),
    )


def _fig_a1() -> CurvePreset:
    return CurvePreset()


def _synthetic_acs_placebo() -> PlaceboPreset:
    return PlaceboPreset(
        data=NestedMicroSpec(
            n_clusters=10,
            groups_per_cluster=20,
            units_per_group=5,
            n_periods=10,
            cluster_factor=ARSpec(rho=0.9, sigma_nu2=0.05),
        ),
        plan=PlaceboPlan(
            schemes=[AssignmentScheme.UNIT_RANDOM, AssignmentScheme.CLUSTER_RANDOM],
            deltas=list(range(1, 10)),
            min_groups_per_arm=20,
        ),
    )


def _synthetic_acs_surface() -> PlaceboPreset:
    return PlaceboPreset(
        data=NestedMicroSpec(
            n_clusters=25,
            groups_per_cluster=10,
            units_per_group=5,
            n_periods=10,
            n_cohorts=10,
            national_factor=ARSpec(rho=0.9, sigma_nu2=0.1),
        ),
        plan=PlaceboPlan(
            schemes=[AssignmentScheme.CLUSTER_RANDOM],
            deltas=list(range(1, 10)),
            group_deltas=list(range(1, 10)),
            min_groups_per_arm=20,
            cluster_level_variance=True,
        ),
        surface=True,
    )


PRESETS: Dict[str, Callable[[], Preset]] = {
    "table-a1": _table_a1,
    "table-a2": _table_a2,
    "fig-a1": _fig_a1,
    "staggered-comparison": _staggered_comparison,
    "conditional-lambda": _conditional_lambda,
    "pretest-normal-model": _pretest_normal_model,
    "synthetic-acs-placebo": _synthetic_acs_placebo,
    "synthetic-acs-surface": _synthetic_acs_surface,
}


def preset_names() -> List[str]:
    return list(PRESETS)


def get_preset(name: str) -> Preset:
    """A fresh copy of the named preset."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise LabError(
            ErrorCode.UNKNOWN_PRESET,
            f"unknown preset {name!r}",
            {"preset": name, "available": preset_names()},
        ) from None
    return factory()
