from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ErrorCode, LabError


def _readonly(values: Any, dtype: Any) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class PanelSchema(BaseModel):
    """Mapping from logical column names to the columns of an input file."""

    group: str = "group"
    time: str = "time"
    outcome: str = "outcome"
    unit: str = "unit"
    weight: str = "weight"
    treated: str = "treated"
    treat_start: str = "treat_start"
    cluster: str = "cluster"
    cohort: str = "cohort"


class PanelData(BaseModel):
    """Balanced group x period outcome matrix with its treatment design.

    ``treat_start`` holds the 1-based period t* after which a treated group is
    treated (d_jt = 1 for t > t*); it is 0 for control groups. Arrays are
    read-only once the panel is built.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    outcomes: np.ndarray
    treated: np.ndarray
    treat_start: np.ndarray
    group_ids: Tuple[Any, ...] = ()
    time_ids: Tuple[Any, ...] = ()
    clusters: Optional[Tuple[Any, ...]] = None
    cohorts: Optional[Tuple[Any, ...]] = None
    has_design: bool = True

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        outcomes = np.asarray(data.get("outcomes"), dtype=float)
        if outcomes.ndim != 2:
            raise ValueError("outcomes must be a groups x periods matrix")
        n_groups, n_periods = outcomes.shape

        if data.get("treated") is None:
            data["treated"] = np.zeros(n_groups, dtype=bool)
            data.setdefault("has_design", False)
        start = data.get("treat_start")
        if start is None:
            data["treat_start"] = np.zeros(n_groups, dtype=int)
        elif np.isscalar(start):
            treated = np.asarray(data["treated"], dtype=bool)
            data["treat_start"] = np.where(treated, int(start), 0)
        else:
            raw = np.array([np.nan if pd.isna(v) else v for v in start], dtype=float)
            data["treat_start"] = np.where(np.isnan(raw), 0, raw).astype(int)

        if not data.get("group_ids"):
            data["group_ids"] = tuple(range(1, n_groups + 1))
        if not data.get("time_ids"):
            data["time_ids"] = tuple(range(1, n_periods + 1))
        return data

    @field_validator("outcomes", mode="before")
    @classmethod
    def _outcomes_matrix(cls, v: Any) -> np.ndarray:
        return _readonly(v, float)

    @field_validator("treated", mode="before")
    @classmethod
    def _treated_flags(cls, v: Any) -> np.ndarray:
        return _readonly(np.asarray(v).astype(bool), bool)

    @field_validator("treat_start", mode="before")
    @classmethod
    def _start_periods(cls, v: Any) -> np.ndarray:
        return _readonly(v, int)

    @field_validator("group_ids", "time_ids", "clusters", "cohorts", mode="before")
    @classmethod
    def _labels(cls, v: Any) -> Any:
        return None if v is None else tuple(v)

    @model_validator(mode="after")
    def _check_shapes(self) -> "PanelData":
        n_groups, n_periods = self.outcomes.shape
        if self.treated.shape != (n_groups,) or self.treat_start.shape != (n_groups,):
            raise ValueError("treated and treat_start must have one entry per group")
        if len(self.group_ids) != n_groups or len(self.time_ids) != n_periods:
            raise ValueError("label counts must match the outcome matrix")
        for name in ("clusters", "cohorts"):
            labels = getattr(self, name)
            if labels is not None and len(labels) != n_groups:
                raise ValueError(f"{name} must have one entry per group")
        return self

    @property
    def n_groups(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_periods(self) -> int:
        return self.outcomes.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.treated.sum())

    @property
    def n_control(self) -> int:
        return self.n_groups - self.n_treated

    @property
    def treated_index(self) -> np.ndarray:
        return np.flatnonzero(self.treated)

    @property
    def control_index(self) -> np.ndarray:
        return np.flatnonzero(~self.treated)

    @property
    def start_periods(self) -> List[int]:
        """Distinct t* values among treated groups, ascending."""
        return sorted({int(s) for s in self.treat_start[self.treated]})

    @property
    def is_uniform(self) -> bool:
        return len(self.start_periods) <= 1

    @property
    def t_star(self) -> int:
        starts = self.start_periods
        if len(starts) != 1:
            raise LabError(
                ErrorCode.STAGGERED_UNSUPPORTED,
                f"treated groups start in periods {starts}; estimator needs a common t*",
                {"start_periods": starts},
            )
        return starts[0]

    def treatment_matrix(self) -> np.ndarray:
        """Indicator d_jt, 1 for treated groups in periods after their t*."""
        periods = np.arange(1, self.n_periods + 1)
        return self.treated[:, None] & (periods[None, :] > self.treat_start[:, None])

    def with_outcomes(self, outcomes: np.ndarray) -> "PanelData":
        return self._rebuild(outcomes=outcomes)

    def with_design(self, treated: Sequence[bool], treat_start: Any) -> "PanelData":
        return self._rebuild(treated=np.asarray(treated, dtype=bool), treat_start=treat_start, has_design=True)

    def subset_periods(self, periods: Sequence[int]) -> "PanelData":
        """Restrict to the given 1-based periods; t* is re-indexed to the kept periods."""
        kept = np.asarray(sorted(periods), dtype=int)
        if kept.size == 0 or kept.min() < 1 or kept.max() > self.n_periods:
            raise LabError(ErrorCode.BAD_WINDOW, f"periods {list(kept)} outside 1..{self.n_periods}")
        new_start = (kept[None, :] <= self.treat_start[:, None]).sum(axis=1)
        new_start = np.where(self.treated, new_start, 0)
        return self._rebuild(
            outcomes=self.outcomes[:, kept - 1],
            treat_start=new_start,
            time_ids=tuple(self.time_ids[k - 1] for k in kept),
        )

    def subset_groups(self, index: Sequence[int]) -> "PanelData":
        idx = np.asarray(index, dtype=int)
        return self._rebuild(
            outcomes=self.outcomes[idx],
            treated=self.treated[idx],
            treat_start=self.treat_start[idx],
            group_ids=tuple(self.group_ids[i] for i in idx),
            clusters=None if self.clusters is None else tuple(self.clusters[i] for i in idx),
            cohorts=None if self.cohorts is None else tuple(self.cohorts[i] for i in idx),
        )

    def to_frame(self) -> pd.DataFrame:
        """Long format with the group-panel CSV columns."""
        n_groups, n_periods = self.outcomes.shape
        frame = pd.DataFrame(
            {
                "group": np.repeat(np.array(self.group_ids, dtype=object), n_periods),
                "time": np.tile(np.array(self.time_ids, dtype=object), n_groups),
                "outcome": self.outcomes.ravel(),
            }
        )
        if self.has_design:
            frame["treated"] = np.repeat(self.treated.astype(int), n_periods)
            starts = np.where(self.treated, self.treat_start, 0)
            frame["treat_start"] = pd.array(
                [s if s > 0 else None for s in np.repeat(starts, n_periods)], dtype="Int64"
            )
        if self.clusters is not None:
            frame["cluster"] = np.repeat(np.array(self.clusters, dtype=object), n_periods)
        if self.cohorts is not None:
            frame["cohort"] = np.repeat(np.array(self.cohorts, dtype=object), n_periods)
        return frame

    def _rebuild(self, **update: Any) -> "PanelData":
        fields: Dict[str, Any] = {
            "outcomes": self.outcomes,
            "treated": self.treated,
            "treat_start": self.treat_start,
            "group_ids": self.group_ids,
            "time_ids": self.time_ids,
            "clusters": self.clusters,
            "cohorts": self.cohorts,
            "has_design": self.has_design,
        }
        fields.update(update)
        return PanelData(**fields)


class MicroPanel(BaseModel):
    """Unit-level rows (unit, group, time, outcome, weight) before aggregation to cells."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    frame: pd.DataFrame
    source: Optional[str] = Field(default=None, description="file the rows came from")

    @field_validator("frame")
    @classmethod
    def _required_columns(cls, frame: pd.DataFrame) -> pd.DataFrame:
        missing = [c for c in ("unit", "group", "time", "outcome") if c not in frame.columns]
        if missing:
            raise LabError(ErrorCode.SCHEMA_ERROR, f"micro panel missing columns {missing}", {"missing": missing})
        if "weight" not in frame.columns:
            frame = frame.assign(weight=1.0)
        return frame

    @property
    def n_units(self) -> int:
        return int(self.frame["unit"].nunique())

    @property
    def has_clusters(self) -> bool:
        return "cluster" in self.frame.columns

    @property
    def has_cohorts(self) -> bool:
        return "cohort" in self.frame.columns
