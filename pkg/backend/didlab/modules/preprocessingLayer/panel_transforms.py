from typing import Iterable, Optional

import numpy as np
import pandas as pd
import structlog

from ...errors import ErrorCode, LabError
from ...model import MicroPanel, PanelData


class PanelValidator:
    """Design checks, window weights and micro-to-group aggregation for panels."""

    def __init__(self):
        self.logger = structlog.get_logger(__name__, component="panel_validator")

    def validate(self, p: PanelData, require_design: Optional[bool] = None, allow_all_treated: bool = False) -> None:
        """Raise a LabError naming the offending group/period if the panel is not a valid design.

        Balance is always checked; the treatment design only when the panel carries one
        (or ``require_design`` is set). ``allow_all_treated`` admits panels whose
        comparisons come from not-yet-treated groups only.
        """
        missing = np.argwhere(~np.isfinite(p.outcomes))
        if missing.size:
            j, t = missing[0]
            raise LabError(
                ErrorCode.UNBALANCED,
                f"no outcome for group {p.group_ids[j]} in period {p.time_ids[t]}",
                {"group": p.group_ids[j], "time": p.time_ids[t], "missing_cells": int(len(missing))},
            )

        if require_design is None:
            require_design = p.has_design
        if not require_design:
            return

        if p.n_treated == 0:
            raise LabError(ErrorCode.NO_TREATED, "panel has no treated group")
        if p.n_control == 0 and not allow_all_treated:
            raise LabError(ErrorCode.NO_CONTROL, "every group is treated; a control group is required")

        bad = [j for j in p.treated_index if not 1 <= p.treat_start[j] <= p.n_periods - 1]
        if bad:
            j = bad[0]
            raise LabError(
                ErrorCode.BAD_TSTAR,
                f"group {p.group_ids[j]} has treat_start {int(p.treat_start[j])}, expected 1..{p.n_periods - 1}",
                {"group": p.group_ids[j], "treat_start": int(p.treat_start[j])},
            )

    @staticmethod
    def window_weights(n_periods: int, pre_set: Iterable[int], post_set: Iterable[int]) -> np.ndarray:
        """Weights w with grad(Y) = Y @ w: 1/|post| on post periods, -1/|pre| on pre periods (1-based sets)."""
        pre = sorted(set(int(t) for t in pre_set))
        post = sorted(set(int(t) for t in post_set))
        if not pre or not post:
            raise LabError(ErrorCode.EMPTY_WINDOW, "pre and post windows must be non-empty", {"pre": pre, "post": post})
        if set(pre) & set(post):
            raise LabError(ErrorCode.BAD_WINDOW, f"windows overlap in periods {sorted(set(pre) & set(post))}")
        outside = [t for t in pre + post if not 1 <= t <= n_periods]
        if outside:
            raise LabError(ErrorCode.BAD_WINDOW, f"periods {outside} outside 1..{n_periods}")

        w = np.zeros(n_periods)
        w[np.asarray(post) - 1] = 1.0 / len(post)
        w[np.asarray(pre) - 1] = -1.0 / len(pre)
        return w

    def nabla_means(self, p: PanelData, pre_set: Iterable[int], post_set: Iterable[int]) -> np.ndarray:
        """Per-group mean over ``post_set`` minus mean over ``pre_set``."""
        pre = sorted(set(int(t) for t in pre_set))
        post = sorted(set(int(t) for t in post_set))
        self.window_weights(p.n_periods, pre, post)
        outcomes = p.outcomes
        return outcomes[:, np.asarray(post) - 1].mean(axis=1) - outcomes[:, np.asarray(pre) - 1].mean(axis=1)

    def group_attribute(
        self,
        frame: pd.DataFrame,
        column: str,
        groups: list,
        values: Optional[pd.Series] = None,
    ) -> Optional[pd.Series]:
        """One value of ``column`` per group, in ``groups`` order.

        Every row of a group must carry the same value (missing counts as a value);
        the first row that disagrees with its group's first row is reported with its
        1-based file line. ``values`` replaces ``frame[column]`` when given.
        """
        if column not in frame.columns:
            return None
        values = frame[column] if values is None else values
        first = values.groupby(frame["group"], sort=False).transform(lambda s: s.iloc[0])
        differs = (values != first) & ~(values.isna() & first.isna())
        if differs.any():
            position = int(np.flatnonzero(differs.to_numpy())[0])
            index = frame.index[position]
            group, row = frame.at[index, "group"], position + 2
            self.logger.warning("group_attribute_conflict", group=group, column=column, row=row)
            raise LabError(
                ErrorCode.PARSE_ERROR,
                f"row {row}: group {group} has conflicting {column} values "
                f"({first.at[index]!r} then {values.at[index]!r})",
                {"group": group, "row": row, "column": column},
            )
        return values.groupby(frame["group"], sort=True).first().reindex(groups)

    def aggregate(self, m: MicroPanel) -> PanelData:
        """Collapse unit rows to (optionally weighted) group x period means."""
        frame = m.frame
        weighted = frame.assign(_wy=frame["outcome"] * frame["weight"])
        cells = weighted.groupby(["group", "time"], sort=True).agg(wy=("_wy", "sum"), w=("weight", "sum"))

        groups = sorted(frame["group"].unique().tolist())
        times = sorted(frame["time"].unique().tolist())
        full_index = pd.MultiIndex.from_product([groups, times], names=["group", "time"])
        cells = cells.reindex(full_index)

        empty = cells.index[cells["w"].isna() | (cells["w"] <= 0)]
        if len(empty):
            group, time = empty[0]
            raise LabError(
                ErrorCode.EMPTY_CELL,
                f"no units with positive weight in cell (group={group}, time={time})",
                {"group": group, "time": time, "empty_cells": int(len(empty))},
            )

        means = (cells["wy"] / cells["w"]).to_numpy().reshape(len(groups), len(times))

        design = {}
        treated = self.group_attribute(frame, "treated", groups)
        if treated is not None:
            starts = self.group_attribute(frame, "treat_start", groups)
            design = {
                "treated": treated.fillna(0).astype(int).to_numpy().astype(bool),
                "treat_start": None if starts is None else starts.tolist(),
            }
        clusters = self.group_attribute(frame, "cluster", groups)
        cohorts = self.group_attribute(frame, "cohort", groups)

        self.logger.debug("micro_aggregated", units=len(frame), groups=len(groups), periods=len(times))
        return PanelData(
            outcomes=means,
            group_ids=tuple(groups),
            time_ids=tuple(times),
            clusters=None if clusters is None else tuple(clusters.tolist()),
            cohorts=None if cohorts is None else tuple(cohorts.tolist()),
            **design,
        )


_validator = PanelValidator()


def validate_panel(p: PanelData, require_design: Optional[bool] = None, allow_all_treated: bool = False) -> None:
    _validator.validate(p, require_design=require_design, allow_all_treated=allow_all_treated)


def window_weights(n_periods: int, pre_set: Iterable[int], post_set: Iterable[int]) -> np.ndarray:
    return PanelValidator.window_weights(n_periods, pre_set, post_set)


def nabla_means(p: PanelData, pre_set: Iterable[int], post_set: Iterable[int]) -> np.ndarray:
    return _validator.nabla_means(p, pre_set, post_set)


def aggregate_micro(m: MicroPanel) -> PanelData:
    return _validator.aggregate(m)
