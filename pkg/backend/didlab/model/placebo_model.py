from enum import Enum
from typing import Any, List, Optional, Tuple

from pydantic import BaseModel, Field

from .dgp_model import NestedMicroSpec
from .estimate_model import ReferenceDistribution, VarianceMethod
from .panel_model import PanelSchema


class AssignmentScheme(str, Enum):
    UNIT_RANDOM = "unit_random"
    CLUSTER_RANDOM = "cluster_random"


class PlaceboWindow(str, Enum):
    ENDPOINTS = "endpoints"  # 2x2 between the two periods of the pair
    FULL = "full"  # every period between them, treatment after the midpoint


class PlaceboPlan(BaseModel):
    """Randomized placebo audit of a panel: which cells, which assignment schemes, which sweep."""

    source: Optional[str] = None
    schema_map: PanelSchema = Field(default_factory=PanelSchema)
    schemes: List[AssignmentScheme] = Field(
        default_factory=lambda: [AssignmentScheme.UNIT_RANDOM, AssignmentScheme.CLUSTER_RANDOM]
    )
    unit_share: float = Field(default=0.5, gt=0.0, lt=1.0)
    deltas: List[int] = Field(default_factory=lambda: [1])
    period_pairs: Optional[List[Tuple[int, int]]] = None
    group_deltas: List[int] = Field(default_factory=list)
    min_groups_per_arm: int = Field(default=20, ge=1)
    reps_per_cell: int = Field(default=1, ge=1)
    window: PlaceboWindow = PlaceboWindow.ENDPOINTS
    variance_method: VarianceMethod = VarianceMethod.CRVE_GROUP
    cluster_level_variance: bool = False
    reference: ReferenceDistribution = ReferenceDistribution.STUDENT_T
    level: float = Field(default=0.05, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    workers: Optional[int] = Field(default=None, ge=1)


class DesignCell(BaseModel):
    """One placebo comparison: a pair of outer labels and a pair of (1-based) periods."""

    labels: Tuple[Any, Any]
    periods: Tuple[int, int]
    delta: int
    group_delta: int = 0


class PlaceboPoint(BaseModel):
    delta: int
    scheme: AssignmentScheme
    n_cells: int
    rejections: int
    rate: float = Field(ge=0.0, le=1.0)
    mc_se: float


class PlaceboCurve(BaseModel):
    level: float
    seed: int
    points: List[PlaceboPoint] = Field(default_factory=list)


class PlaceboSurfacePoint(BaseModel):
    delta_time: int
    delta_group: int
    n_cells: int
    rejections: int
    rate: float = Field(ge=0.0, le=1.0)
    mc_se: float


class PlaceboSurface(BaseModel):
    level: float
    seed: int
    points: List[PlaceboSurfacePoint] = Field(default_factory=list)


class PlaceboPreset(BaseModel):
    """A placebo plan together with the synthetic micro data it audits."""

    plan: PlaceboPlan
    data: NestedMicroSpec
    surface: bool = False
