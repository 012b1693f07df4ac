from enum import Enum
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, model_validator

from ..errors import ErrorCode, LabError
from .dgp_model import FactorModelSpec
from .estimate_model import EstimatorTag, ReferenceDistribution, VarianceMethod


class ExperimentKind(str, Enum):
    STANDARD = "standard"
    TWOWAY = "twoway"
    PRETEST = "pretest"
    CONDITIONAL_LAMBDA = "conditional_lambda"
    STAGGERED_COMPARISON = "staggered_comparison"
    PRETEST_NORMAL_MODEL = "pretest_normal_model"


class TwoWaySettings(BaseModel):
    rho_list: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.4])
    T_list: List[int] = Field(default_factory=lambda: [2, 10, 100])
    n_groups: int = Field(default=100, ge=4)


class PretestSettings(BaseModel):
    """Pre-test grid: ``targets`` are unconditional main-test rejection rates (None = no factors)."""

    T_list: List[int] = Field(default_factory=lambda: [3, 6, 10])
    rho_list: List[float] = Field(default_factory=lambda: [0.0, 0.5, 0.9])
    targets: List[Optional[float]] = Field(default_factory=lambda: [None, 0.08, 0.17, 0.46])
    n_groups: int = Field(default=100, ge=4)
    calibration_reps: int = Field(default=10_000, ge=100)
    calibration_tol: float = Field(default=0.005, gt=0.0)
    min_pass_rate: float = Field(default=0.05, ge=0.0, le=1.0)
    calibrated: Dict[str, float] = Field(default_factory=dict)


class ConditionalLambdaSettings(BaseModel):
    n_lambda_draws: int = Field(default=40, ge=2)
    reps_per_lambda: int = Field(default=200, ge=2)


class StaggeredSettings(BaseModel):
    n_clusters: int = Field(default=20, ge=4)
    groups_per_cluster: int = Field(default=10, ge=1)
    cohorts: List[int] = Field(default_factory=lambda: [3, 7])
    rho: float = Field(default=0.9, gt=-1.0, lt=1.0)
    cluster_factor_var: float = Field(default=0.2, ge=0.0)
    sigma_eps2: float = Field(default=1.0, ge=0.0)
    schemes: List[str] = Field(default_factory=lambda: ["cluster", "unit"])


class NormalModelSettings(BaseModel):
    var1: float = Field(default=1.0, gt=0.0)
    var0: float = Field(default=1.0, gt=0.0)
    cov: float = 0.0
    alpha: float = 0.0
    gap_inflation: float = Field(default=0.0, ge=0.0)
    pretest_level: float = Field(default=0.05, gt=0.0, lt=1.0)


class MCConfig(BaseModel):
    """Description of one Monte Carlo experiment."""

    name: str = "custom"
    kind: ExperimentKind = ExperimentKind.STANDARD
    preset: Optional[str] = None
    dgp: Optional[FactorModelSpec] = None
    n_groups: int = Field(default=100, ge=2)
    n_periods: int = Field(default=2, ge=2)
    t_star: Union[int, List[int]] = 1
    estimators: List[EstimatorTag] = Field(default_factory=lambda: [EstimatorTag.TWFE])
    variance_methods: List[VarianceMethod] = Field(default_factory=lambda: [VarianceMethod.CRVE_GROUP])
    level: float = Field(default=0.05, gt=0.0, lt=1.0)
    reps: int = Field(default=5000, ge=1)
    seed: int = Field(default=0, ge=0)
    workers: Optional[int] = Field(default=None, ge=1)
    reference: ReferenceDistribution = ReferenceDistribution.STUDENT_T
    small_sample: bool = True
    horizon: int = Field(default=0, ge=0)
    not_yet_treated: bool = False

    twoway: Optional[TwoWaySettings] = None
    pretest: Optional[PretestSettings] = None
    conditional: Optional[ConditionalLambdaSettings] = None
    staggered: Optional[StaggeredSettings] = None
    normal_model: Optional[NormalModelSettings] = None

    @model_validator(mode="after")
    def _combinations(self) -> "MCConfig":
        regression_only = {VarianceMethod.HC_ROBUST, VarianceMethod.TWOWAY_CGM}
        if regression_only.intersection(self.variance_methods) and set(self.estimators) != {EstimatorTag.TWFE}:
            raise LabError(
                ErrorCode.INVALID_CONFIG,
                "hc_robust and twoway_cgm are defined on the TWFE regression only",
            )
        if self.kind == ExperimentKind.STANDARD and self.dgp is None:
            raise LabError(ErrorCode.INVALID_CONFIG, "a standard experiment needs a dgp")
        return self


class RateCell(BaseModel):
    """Rejection rate of one (estimator, variance method) pair in one parameter cell."""

    estimator: EstimatorTag
    variance_method: VarianceMethod
    params: Dict[str, Any] = Field(default_factory=dict)
    reps: int
    rejections: int
    rate: float = Field(ge=0.0, le=1.0)
    mc_se: float = Field(ge=0.0)
    psd_adjusted: int = 0
    alpha_mean: float = 0.0
    alpha_var: float = 0.0
    mean_variance: float = 0.0


class PretestRow(BaseModel):
    panel: str
    target: Optional[float] = None
    two_period_var: float = 0.0
    T: int
    rho: float
    reps: int
    pass_rate: float = Field(ge=0.0, le=1.0)
    pass_mc_se: float
    cond_rej: Optional[float] = None
    cond_mc_se: Optional[float] = None
    uncond_rej: float = 0.0


class ConditionalLambdaReport(BaseModel):
    n_lambda_draws: int
    reps_per_lambda: int
    per_lambda_means: List[float]
    across_variance: float
    within_variance: float
    ratio: Optional[float] = None  # unset when the within-draw noise is zero


class NormalModelReport(BaseModel):
    reps: int
    alpha: float
    pass_rate: float
    uncond_mean: float
    cond_mean: Optional[float] = None
    uncond_var: float
    cond_var: Optional[float] = None
    mean_mc_se: Optional[float] = None
    cond_var_mc_se: Optional[float] = None
    uncond_rejection: float
    cond_rejection: Optional[float] = None


class MCReport(BaseModel):
    """Aggregated experiment outcome. ``runtime_seconds`` is the only field that depends on the machine."""

    name: str
    kind: ExperimentKind
    seed: int
    reps: int
    level: float
    cells: List[RateCell] = Field(default_factory=list)
    pretest_rows: List[PretestRow] = Field(default_factory=list)
    conditional: Optional[ConditionalLambdaReport] = None
    normal_model: Optional[NormalModelReport] = None
    calibration: Dict[str, float] = Field(default_factory=dict)
    runtime_seconds: float = 0.0

    def deterministic_dump(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"runtime_seconds"})
