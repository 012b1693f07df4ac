from enum import Enum
from typing import Annotated, Any, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ErrorCode, LabError
from .panel_model import PanelData


class ARInit(str, Enum):
    STATIONARY = "stationary"
    ZERO = "zero"


class ModelStructure(str, Enum):
    GENERIC = "generic"
    PAIRED = "paired"
    ARM_LEVEL = "arm_level"
    BLOCKED = "blocked"


class ARSpec(BaseModel):
    """AR(1) process X_t = rho X_{t-1} + nu_t with Gaussian innovations of variance sigma_nu2."""

    rho: float = 0.0
    sigma_nu2: float = Field(default=1.0, ge=0.0)
    init: ARInit = ARInit.STATIONARY

    @model_validator(mode="after")
    def _stationary_rho(self) -> "ARSpec":
        if self.init == ARInit.STATIONARY and abs(self.rho) >= 1:
            raise LabError(ErrorCode.BAD_RHO, f"stationary AR(1) needs |rho| < 1, got {self.rho}", {"rho": self.rho})
        return self

    @property
    def marginal_variance(self) -> float:
        if self.init == ARInit.STATIONARY:
            return self.sigma_nu2 / (1.0 - self.rho ** 2)
        raise LabError(ErrorCode.BAD_SPEC, "zero-initialised AR(1) has no single marginal variance")


class BernoulliAssignment(BaseModel):
    kind: Literal["bernoulli"] = "bernoulli"
    c: float = Field(default=0.5, gt=0.0, lt=1.0)


class FixedAssignment(BaseModel):
    """Deterministic flags, or the first ``n_treated`` groups treated."""

    kind: Literal["fixed"] = "fixed"
    flags: Optional[List[bool]] = None
    n_treated: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _one_source(self) -> "FixedAssignment":
        if (self.flags is None) == (self.n_treated is None):
            raise ValueError("fixed assignment needs exactly one of flags or n_treated")
        return self


class CompleteAssignment(BaseModel):
    """Exactly ``n_treated`` groups drawn uniformly without replacement."""

    kind: Literal["complete"] = "complete"
    n_treated: int = Field(ge=1)


class GroupedAssignment(BaseModel):
    """Groups form ``n_blocks`` equal consecutive blocks; ``treated_blocks`` of them are treated."""

    kind: Literal["grouped"] = "grouped"
    n_blocks: int = Field(ge=2)
    treated_blocks: int = Field(ge=1)

    @model_validator(mode="after")
    def _fewer_treated(self) -> "GroupedAssignment":
        if self.treated_blocks >= self.n_blocks:
            raise ValueError("treated_blocks must leave at least one control block")
        return self


AssignmentSpec = Annotated[
    Union[BernoulliAssignment, FixedAssignment, CompleteAssignment, GroupedAssignment],
    Field(discriminator="kind"),
]


class TreatmentEffectSpec(BaseModel):
    alpha: float = 0.0
    sigma_alpha2: float = Field(default=0.0, ge=0.0)


def _psd(matrix: List[List[float]], name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(matrix, dtype=float))
    if arr.size == 0:
        return arr.reshape(0, 0)
    if arr.shape[0] != arr.shape[1] or not np.allclose(arr, arr.T):
        raise LabError(ErrorCode.BAD_SPEC, f"{name} must be a symmetric square matrix")
    if np.linalg.eigvalsh(arr).min() < -1e-10:
        raise LabError(ErrorCode.BAD_SPEC, f"{name} is not positive semi-definite")
    return arr


class FactorModelSpec(BaseModel):
    """Potential-outcome model Y_jt = d_jt a_jt + theta_j + gamma_t + lambda_t mu_j + eps_jt.

    ``generic`` draws loadings per arm from Gaussian laws. ``arm_level`` gives
    treated groups loading 1 on factor 0 and controls loading 1 on factor 1.
    ``paired`` puts consecutive pairs of each arm on one factor (treated pairs
    use ``factor_process[0]``, control pairs the last entry). ``blocked``
    splits the groups into ``n_blocks`` equal blocks, each with its own
    factor drawn from ``factor_process[0]``.
    """

    structure: ModelStructure = ModelStructure.GENERIC
    loading_mean_treated: List[float] = Field(default_factory=list)
    loading_mean_control: List[float] = Field(default_factory=list)
    loading_cov_treated: List[List[float]] = Field(default_factory=list)
    loading_cov_control: List[List[float]] = Field(default_factory=list)
    factor_process: List[ARSpec] = Field(default_factory=list)
    n_blocks: Optional[int] = Field(default=None, ge=2)

    sigma_eps2_treated: float = Field(default=1.0, ge=0.0)
    sigma_eps2_control: float = Field(default=1.0, ge=0.0)
    eps_rho: float = Field(default=0.0, gt=-1.0, lt=1.0)

    fe_group_sd: float = Field(default=0.0, ge=0.0)
    fe_time_sd: float = Field(default=0.0, ge=0.0)

    assignment: AssignmentSpec = Field(default_factory=BernoulliAssignment)
    treatment_effect: TreatmentEffectSpec = Field(default_factory=TreatmentEffectSpec)

    @field_validator("loading_cov_treated", "loading_cov_control", mode="before")
    @classmethod
    def _square(cls, v: Any) -> Any:
        return [list(map(float, row)) for row in np.atleast_2d(np.asarray(v, dtype=float))] if len(v) else []

    @model_validator(mode="after")
    def _consistent(self) -> "FactorModelSpec":
        if self.structure == ModelStructure.GENERIC:
            n_factors = len(self.loading_mean_treated)
            if len(self.loading_mean_control) != n_factors:
                raise LabError(ErrorCode.DIM_MISMATCH, "loading means must have the same length per arm")
            for name in ("loading_cov_treated", "loading_cov_control"):
                cov = _psd(getattr(self, name), name) if getattr(self, name) else np.zeros((n_factors, n_factors))
                if cov.shape != (n_factors, n_factors):
                    raise LabError(ErrorCode.DIM_MISMATCH, f"{name} must be {n_factors}x{n_factors}")
            if n_factors and len(self.factor_process) not in (1, n_factors):
                raise LabError(ErrorCode.DIM_MISMATCH, "factor_process needs one ARSpec or one per factor")
        elif not self.factor_process:
            raise LabError(ErrorCode.BAD_SPEC, f"{self.structure.value} structure needs a factor_process")
        if self.structure == ModelStructure.BLOCKED and self.n_blocks is None:
            raise LabError(ErrorCode.BAD_SPEC, "blocked structure needs n_blocks")
        return self

    @property
    def n_factors(self) -> int:
        if self.structure == ModelStructure.GENERIC:
            return len(self.loading_mean_treated)
        if self.structure == ModelStructure.ARM_LEVEL:
            return 2
        if self.structure == ModelStructure.BLOCKED:
            return int(self.n_blocks or 0)
        raise LabError(ErrorCode.BAD_SPEC, "paired structure has one factor per pair; count depends on N")

    def process_for(self, factor: int) -> ARSpec:
        if len(self.factor_process) == 1:
            return self.factor_process[0]
        return self.factor_process[factor]

    def loading_moments(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(mean_treated, mean_control, cov_treated, cov_control) as arrays."""
        if self.structure == ModelStructure.ARM_LEVEL:
            zero = np.zeros((2, 2))
            return np.array([1.0, 0.0]), np.array([0.0, 1.0]), zero, zero
        if self.structure != ModelStructure.GENERIC:
            raise LabError(ErrorCode.BAD_SPEC, f"{self.structure.value} loadings are block indicators")
        n_factors = self.n_factors
        cov_t = _psd(self.loading_cov_treated, "loading_cov_treated") if self.loading_cov_treated else np.zeros((n_factors, n_factors))
        cov_c = _psd(self.loading_cov_control, "loading_cov_control") if self.loading_cov_control else np.zeros((n_factors, n_factors))
        return (
            np.asarray(self.loading_mean_treated, dtype=float),
            np.asarray(self.loading_mean_control, dtype=float),
            cov_t,
            cov_c,
        )


class SimulationResult(BaseModel):
    """A simulated panel together with every latent draw that produced it."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    panel: PanelData
    factors: np.ndarray  # T x F
    loadings: np.ndarray  # N x F
    theta: np.ndarray  # N
    gamma: np.ndarray  # T
    eps: np.ndarray  # N x T
    alpha: np.ndarray  # N x T, effect draws (applied where d_jt = 1)
    blocks: Optional[np.ndarray] = None  # block / pair label per group

    def reconstruct(self) -> np.ndarray:
        d = self.panel.treatment_matrix()
        return d * self.alpha + self.theta[:, None] + self.gamma[None, :] + self.loadings @ self.factors.T + self.eps


class FixedPopulation(BaseModel):
    """Potential outcomes held fixed; only the allocation of blocks to treatment is random."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    y0: np.ndarray
    y1: np.ndarray
    blocks: np.ndarray  # block label per group, 0..F-1
    treated_blocks: int = Field(ge=1)
    t_star: int = Field(ge=1)
    block_factors: Optional[np.ndarray] = None  # T x F latent block shocks
    eps: Optional[np.ndarray] = None  # N x T latent idiosyncratic shocks

    @model_validator(mode="after")
    def _partition(self) -> "FixedPopulation":
        n_groups, n_periods = self.y0.shape
        if self.y1.shape != self.y0.shape or self.blocks.shape != (n_groups,):
            raise LabError(ErrorCode.DIM_MISMATCH, "potential outcomes and blocks must align")
        labels, counts = np.unique(self.blocks, return_counts=True)
        if not np.array_equal(labels, np.arange(labels.size)) or np.unique(counts).size != 1:
            raise LabError(ErrorCode.BAD_SPEC, "blocks must be labelled 0..F-1 and equally sized")
        if self.treated_blocks >= labels.size:
            raise LabError(ErrorCode.BAD_SPEC, "at least one block must stay in control")
        if self.t_star >= n_periods:
            raise LabError(ErrorCode.BAD_TSTAR, f"t* = {self.t_star} leaves no post period")
        return self

    @property
    def n_blocks(self) -> int:
        return int(self.blocks.max()) + 1

    @property
    def n_groups(self) -> int:
        return self.y0.shape[0]


class NestedMicroSpec(BaseModel):
    """Synthetic unit-level data nested as clusters > groups > units.

    With ``n_cohorts`` > 1 every cluster holds one group per cohort and the
    cohort's exposure to a national factor rises linearly with its position,
    so cohorts far apart diverge while neighbours move together.
    """

    n_clusters: int = Field(default=10, ge=2)
    groups_per_cluster: int = Field(default=20, ge=1)
    units_per_group: int = Field(default=5, ge=1)
    n_periods: int = Field(default=10, ge=2)
    cluster_factor: ARSpec = Field(default_factory=lambda: ARSpec(rho=0.9, sigma_nu2=0.05))
    n_cohorts: int = Field(default=1, ge=1)
    national_factor: Optional[ARSpec] = None
    cohort_loading_scale: float = 1.0
    group_sd: float = Field(default=1.0, ge=0.0)
    unit_sd: float = Field(default=1.0, ge=0.0)
    first_period: int = 1

    @model_validator(mode="after")
    def _cohort_layout(self) -> "NestedMicroSpec":
        if self.n_cohorts > 1 and self.groups_per_cluster != self.n_cohorts:
            raise LabError(ErrorCode.BAD_SPEC, "with cohorts, groups_per_cluster must equal n_cohorts")
        return self
