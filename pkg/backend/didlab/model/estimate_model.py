from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class EstimatorTag(str, Enum):
    TWFE = "twfe"
    FD = "fd"
    SWITCHER = "switcher"
    LONGDIFF = "longdiff"
    PLACEBO_PRE = "placebo_pre"


class VarianceMethod(str, Enum):
    CRVE_GROUP = "crve_group"
    HC_ROBUST = "hc_robust"
    TWOWAY_CGM = "twoway_cgm"


class ReferenceDistribution(str, Enum):
    STUDENT_T = "t"
    NORMAL = "normal"


class Comparison(BaseModel):
    """One 2x2 (or window) comparison entering an estimate, with its aggregation weight."""

    pre: Tuple[int, ...]
    post: Tuple[int, ...]
    weight: float = 1.0
    cohort: int = 0
    n_switchers: int = 0
    n_comparison: int = 0
    estimate: float = 0.0


class EstimateRecord(BaseModel):
    """Point estimate with its per-group residual combinations.

    ``what`` is W_j (post-pre residual combination, mean zero within each
    arm); ``contributions`` is psi_j, the group's share of alpha_hat - alpha,
    so that the cluster-robust variance is sum(psi_j^2) for every estimator.
    ``arm`` is 1 for groups on the treated side, 0 for comparison groups and
    -1 for groups that do not enter.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    estimator: EstimatorTag
    alpha_hat: float
    what: np.ndarray
    contributions: np.ndarray
    arm: np.ndarray
    comparisons: List[Comparison] = Field(default_factory=list)
    n_treated: int
    n_control: int

    @field_validator("alpha_hat")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("alpha_hat must be finite")
        return float(v)

    @property
    def windows(self) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        return [(c.pre, c.post) for c in self.comparisons]

    @property
    def n_clusters(self) -> int:
        return self.n_treated + self.n_control


class VarianceEstimate(BaseModel):
    method: VarianceMethod
    value: float = Field(ge=0.0)
    dof: float = Field(ge=1.0)
    psd_adjusted: bool = False
    raw_value: float = 0.0


class TestResult(BaseModel):
    __test__ = False

    t_stat: float
    p_value: float = Field(ge=0.0, le=1.0)
    reject: bool
    level: float
    reference: ReferenceDistribution = ReferenceDistribution.STUDENT_T
