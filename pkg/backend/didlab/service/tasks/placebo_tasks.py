"""Randomized placebo audits of observed (or synthetic) panels."""
from functools import partial
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from ...econometrics import compute_variance, make_rng, replication_seed, t_test, twfe
from ...errors import ErrorCode, LabError
from ...model import (
    AssignmentScheme,
    DesignCell,
    MicroPanel,
    PanelData,
    PlaceboCurve,
    PlaceboPlan,
    PlaceboPoint,
    PlaceboSurface,
    PlaceboSurfacePoint,
    PlaceboWindow,
)
from ...modules.ingestionLayer import PanelIngestor
from ...modules.preprocessingLayer import PanelValidator
from .montecarlo_tasks import binomial_se, run_replications

logger = structlog.get_logger(__name__)

_MAX_UNIT_DRAWS = 1000
_MIN_ARM = 2

PanelInput = Union[PanelData, MicroPanel]


def resolve_panel(plan: PlaceboPlan, panel: Optional[PanelInput] = None) -> PanelData:
    """Group panel for the audit: the one given, or ``plan.source`` loaded and aggregated."""
    validator = PanelValidator()
    if panel is None:
        if plan.source is None:
            raise LabError(ErrorCode.INVALID_CONFIG, "placebo plan has no data source")
        panel = PanelIngestor(plan.schema_map, validator).load(plan.source)
    if isinstance(panel, MicroPanel):
        panel = validator.aggregate(panel)
    validator.validate(panel, require_design=False)
    if panel.clusters is None:
        raise LabError(ErrorCode.SCHEMA_ERROR, "placebo audits need a cluster column nesting the groups")
    return panel


def _period_pairs(plan: PlaceboPlan, n_periods: int) -> List[Tuple[int, int]]:
    if plan.period_pairs is not None:
        bad = [(a, b) for a, b in plan.period_pairs if not 1 <= a < b <= n_periods]
        if bad:
            raise LabError(ErrorCode.BAD_WINDOW, f"period pair {bad[0]} outside 1..{n_periods} or unordered")
        return [(int(a), int(b)) for a, b in plan.period_pairs]
    return [(t, t + d) for d in plan.deltas for t in range(1, n_periods - d + 1)]


def _label_pairs(
    labels: Sequence[Any],
    min_groups: int,
    group_deltas: Sequence[int],
) -> List[Tuple[Tuple[Any, Any], int]]:
    """Admissible label pairs with their positional distance; labels with too few groups are dropped."""
    size = pd.Series(list(labels), dtype=object).value_counts()
    ordered = sorted(size.index, key=_sort_key)
    position = {label: i for i, label in enumerate(ordered)}
    eligible = [label for label in ordered if size[label] >= min_groups]

    pairs = []
    for a, b in combinations(eligible, 2):
        distance = position[b] - position[a]
        if group_deltas and distance not in group_deltas:
            continue
        pairs.append(((a, b), distance))
    return pairs


def _sort_key(label: Any) -> Tuple[int, Any]:
    return (0, label) if isinstance(label, (int, float, np.integer, np.floating)) else (1, str(label))


def enumerate_designs(plan: PlaceboPlan, panel: Optional[PanelInput] = None) -> List[DesignCell]:
    """Every admissible (label pair, period pair) cell of the plan.

    Labels are clusters, or cohorts when ``plan.group_deltas`` asks for a
    two-dimension sweep. A label enters only when it holds at least
    ``min_groups_per_arm`` groups.
    """
    p = resolve_panel(plan, panel)
    if plan.group_deltas:
        if p.cohorts is None:
            raise LabError(ErrorCode.SCHEMA_ERROR, "a two-dimension sweep needs a cohort column")
        labels = p.cohorts
    else:
        labels = p.clusters

    label_pairs = _label_pairs(labels, plan.min_groups_per_arm, plan.group_deltas)
    period_pairs = _period_pairs(plan, p.n_periods)
    cells = [
        DesignCell(labels=pair, periods=periods, delta=periods[1] - periods[0], group_delta=distance if plan.group_deltas else 0)
        for pair, distance in label_pairs
        for periods in period_pairs
    ]
    if not cells:
        raise LabError(
            ErrorCode.NO_CELLS,
            "no placebo cell survives the period sweep and the minimum arm size",
            {"label_pairs": len(label_pairs), "period_pairs": len(period_pairs), "min_groups_per_arm": plan.min_groups_per_arm},
        )
    logger.debug("placebo_cells", cells=len(cells), label_pairs=len(label_pairs), period_pairs=len(period_pairs))
    return cells


def _cell_panel(p: PanelData, labels: Sequence[Any], cell: DesignCell, window: PlaceboWindow) -> Tuple[PanelData, np.ndarray, int]:
    """Groups of the two labels over the cell's periods, which side each group is on, and the placebo t*."""
    label_arr = np.asarray(labels, dtype=object)
    side = np.full(label_arr.size, -1)
    side[label_arr == cell.labels[0]] = 0
    side[label_arr == cell.labels[1]] = 1
    index = np.flatnonzero(side >= 0)

    first, last = cell.periods
    if window == PlaceboWindow.ENDPOINTS:
        periods, t_star = [first, last], 1
    else:
        periods, t_star = list(range(first, last + 1)), max(1, (cell.delta + 1) // 2)
    return p.subset_groups(index).subset_periods(periods), side[index], t_star


def _assign(scheme: AssignmentScheme, side: np.ndarray, share: float, rng: np.random.Generator) -> np.ndarray:
    if scheme == AssignmentScheme.CLUSTER_RANDOM:
        return side == rng.integers(2)
    for _ in range(_MAX_UNIT_DRAWS):
        treated = rng.random(side.size) < share
        if _MIN_ARM <= treated.sum() <= side.size - _MIN_ARM:
            return treated
    raise LabError(ErrorCode.BAD_SPEC, f"no assignment of {side.size} groups leaves two per arm with share {share}")


def _placebo_replication(
    p: PanelData,
    cells: Sequence[DesignCell],
    plan: PlaceboPlan,
    scheme: AssignmentScheme,
    scheme_index: int,
    r: int,
) -> Dict[str, Any]:
    c, rep = divmod(r, plan.reps_per_cell)
    cell = cells[c]
    labels = p.cohorts if cell.group_delta else p.clusters
    sub, side, t_star = _cell_panel(p, labels, cell, plan.window)
    rng = make_rng(replication_seed(plan.seed, rep, scheme_index, c))
    treated = _assign(scheme, side, plan.unit_share, rng)

    placebo = sub.with_design(treated, t_star)
    e = twfe(placebo)
    clusters = sub.clusters if plan.cluster_level_variance else None
    v = compute_variance(plan.variance_method, e, placebo, clusters=clusters)
    return {"reject": t_test(e.alpha_hat, v, plan.level, plan.reference).reject}


def _rejections(p: PanelData, cells: List[DesignCell], plan: PlaceboPlan, scheme: AssignmentScheme, s: int) -> np.ndarray:
    replicate = partial(_placebo_replication, p, cells, plan, scheme, s)
    draws = run_replications(replicate, len(cells) * plan.reps_per_cell, plan.workers, desc=f"placebo {scheme.value}")
    return draws["reject"].reshape(len(cells), plan.reps_per_cell)


def run_placebo(plan: PlaceboPlan, panel: Optional[PanelInput] = None) -> PlaceboCurve:
    """Share of placebo cells rejecting at the nominal level, per period distance and assignment scheme."""
    p = resolve_panel(plan, panel)
    cells = enumerate_designs(plan, p)
    deltas = np.array([cell.delta for cell in cells])
    logger.info("placebo_started", cells=len(cells), schemes=[s.value for s in plan.schemes], seed=plan.seed)

    points: List[PlaceboPoint] = []
    for s, scheme in enumerate(plan.schemes):
        rejects = _rejections(p, cells, plan, scheme, s)
        for delta in sorted(set(deltas.tolist())):
            hits = rejects[deltas == delta]
            rate = float(hits.mean())
            points.append(
                PlaceboPoint(
                    delta=delta,
                    scheme=scheme,
                    n_cells=int(hits.shape[0]),
                    rejections=int(hits.sum()),
                    rate=rate,
                    mc_se=binomial_se(rate, hits.size),
                )
            )
        logger.info("placebo_scheme_finished", scheme=scheme.value, rates={pt.delta: pt.rate for pt in points if pt.scheme == scheme})
    return PlaceboCurve(level=plan.level, seed=plan.seed, points=points)


def run_two_dimension_placebo(plan: PlaceboPlan, panel: Optional[PanelInput] = None) -> PlaceboSurface:
    """Rejection surface over (period distance, cohort distance); one of the two cohorts is treated at random."""
    p = resolve_panel(plan, panel)
    if p.cohorts is None:
        raise LabError(ErrorCode.SCHEMA_ERROR, "a two-dimension sweep needs a cohort column")
    if not plan.group_deltas:
        n_cohorts = len(set(p.cohorts))
        plan = plan.model_copy(update={"group_deltas": list(range(1, n_cohorts))})
    cells = enumerate_designs(plan, p)
    logger.info("placebo_surface_started", cells=len(cells), group_deltas=plan.group_deltas, seed=plan.seed)

    rejects = _rejections(p, cells, plan, AssignmentScheme.CLUSTER_RANDOM, 0)
    keys = np.array([(cell.delta, cell.group_delta) for cell in cells])
    points = []
    for delta_time, delta_group in sorted({tuple(k) for k in keys.tolist()}):
        hits = rejects[(keys[:, 0] == delta_time) & (keys[:, 1] == delta_group)]
        rate = float(hits.mean())
        points.append(
            PlaceboSurfacePoint(
                delta_time=delta_time,
                delta_group=delta_group,
                n_cells=int(hits.shape[0]),
                rejections=int(hits.sum()),
                rate=rate,
                mc_se=binomial_se(rate, hits.size),
            )
        )
    return PlaceboSurface(level=plan.level, seed=plan.seed, points=points)
