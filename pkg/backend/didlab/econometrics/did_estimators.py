"""Difference-in-differences point estimators.

Every estimator returns an EstimateRecord whose ``contributions`` psi_j add
up to the group's share of alpha_hat - alpha, so one cluster-robust formula
(sum of psi_j^2) serves all of them.
"""
from typing import List, Sequence, Tuple

import numpy as np
import structlog

from ..errors import ErrorCode, LabError
from ..model import Comparison, EstimateRecord, EstimatorTag, PanelData
from ..modules.preprocessingLayer import nabla_means, validate_panel

logger = structlog.get_logger(__name__)


def _two_arm(
    p: PanelData,
    pre: Sequence[int],
    post: Sequence[int],
    tag: EstimatorTag,
    cohort: int = 0,
) -> EstimateRecord:
    """Treated-minus-control difference of window means over ever-treated vs never-treated groups."""
    nabla = nabla_means(p, pre, post)
    treated = p.treated
    mean_1 = nabla[treated].mean()
    mean_0 = nabla[~treated].mean()
    alpha_hat = mean_1 - mean_0

    what = nabla - np.where(treated, mean_1, mean_0)
    contributions = np.where(treated, what / p.n_treated, -what / p.n_control)
    comparison = Comparison(
        pre=tuple(int(t) for t in pre),
        post=tuple(int(t) for t in post),
        cohort=cohort,
        n_switchers=p.n_treated,
        n_comparison=p.n_control,
        estimate=float(alpha_hat),
    )
    return EstimateRecord(
        estimator=tag,
        alpha_hat=alpha_hat,
        what=what,
        contributions=contributions,
        arm=treated.astype(int),
        comparisons=[comparison],
        n_treated=p.n_treated,
        n_control=p.n_control,
    )


def twfe(p: PanelData) -> EstimateRecord:
    """Two-way fixed effects estimate with a common adoption period.

    Equals the mean post-minus-pre change of treated groups minus that of
    control groups, with pre = 1..t* and post = t*+1..T.
    """
    validate_panel(p, require_design=True)
    t_star = p.t_star
    pre = range(1, t_star + 1)
    post = range(t_star + 1, p.n_periods + 1)
    return _two_arm(p, pre, post, EstimatorTag.TWFE, cohort=t_star)


def first_difference(p: PanelData) -> EstimateRecord:
    """TWFE on the two periods around adoption, t* and t*+1."""
    validate_panel(p, require_design=True)
    t_star = p.t_star
    return _two_arm(p, [t_star], [t_star + 1], EstimatorTag.FD, cohort=t_star)


def within_transform(x: np.ndarray) -> np.ndarray:
    """Remove row and column means of a balanced groups x periods matrix."""
    return x - x.mean(axis=1, keepdims=True) - x.mean(axis=0, keepdims=True) + x.mean()


def within_fit(p: PanelData) -> Tuple[float, np.ndarray, np.ndarray, float]:
    """(alpha_hat, demeaned d_jt, residuals u_jt, sum of squared demeaned d) of the TWFE regression."""
    d_tilde = within_transform(p.treatment_matrix().astype(float))
    y_tilde = within_transform(p.outcomes)
    sxx = float((d_tilde ** 2).sum())
    if sxx <= 0:
        raise LabError(ErrorCode.NO_TREATED, "treatment indicator has no variation after removing fixed effects")
    alpha_hat = float((d_tilde * y_tilde).sum() / sxx)
    residuals = y_tilde - alpha_hat * d_tilde
    return alpha_hat, d_tilde, residuals, sxx


def _with_arms(
    tag: EstimatorTag,
    alpha_hat: float,
    contributions: np.ndarray,
    arm: np.ndarray,
    comparisons: List[Comparison],
) -> EstimateRecord:
    n_treated = int((arm == 1).sum())
    n_control = int((arm == 0).sum())
    what = np.where(arm == 1, n_treated * contributions, np.where(arm == 0, -n_control * contributions, 0.0))
    return EstimateRecord(
        estimator=tag,
        alpha_hat=alpha_hat,
        what=what,
        contributions=contributions,
        arm=arm,
        comparisons=comparisons,
        n_treated=n_treated,
        n_control=n_control,
    )


def twfe_regression(p: PanelData) -> EstimateRecord:
    """TWFE coefficient by the two-way within transformation; any adoption timing.

    With a common t* it coincides with ``twfe``. Group contributions are the
    summed regression scores d~_jt u_jt / sum(d~^2).
    """
    validate_panel(p, require_design=True)
    alpha_hat, d_tilde, residuals, sxx = within_fit(p)
    contributions = (d_tilde * residuals).sum(axis=1) / sxx
    comparisons = [
        Comparison(
            pre=tuple(range(1, s + 1)),
            post=tuple(range(s + 1, p.n_periods + 1)),
            cohort=s,
            n_switchers=int((p.treated & (p.treat_start == s)).sum()),
            n_comparison=p.n_control,
        )
        for s in p.start_periods
    ]
    return _with_arms(EstimatorTag.TWFE, alpha_hat, contributions, p.treated.astype(int), comparisons)


def _comparison_set(p: PanelData, last_untreated: int, not_yet_treated: bool) -> np.ndarray:
    """Groups still untreated in period ``last_untreated``: never treated, optionally also t* >= last_untreated."""
    comparison = ~p.treated
    if not_yet_treated:
        comparison = comparison | (p.treated & (p.treat_start >= last_untreated))
    return comparison


def _accumulate(
    p: PanelData,
    cells: List[Tuple[int, int, int]],
    weights: np.ndarray,
    not_yet_treated: bool,
    tag: EstimatorTag,
) -> EstimateRecord:
    """Weighted average of 2x2 comparisons (cohort s, base period, later period)."""
    N = p.n_groups
    contributions = np.zeros(N)
    arm = np.full(N, -1)
    comparisons: List[Comparison] = []
    alpha_hat = 0.0

    for (cohort, base, later), weight in zip(cells, weights):
        switchers = p.treated & (p.treat_start == cohort)
        comparison = _comparison_set(p, later, not_yet_treated)
        if not comparison.any():
            raise LabError(
                ErrorCode.NO_COMPARISON_GROUP,
                f"no untreated comparison group for cohort t*={cohort} through period {later}",
                {"cohort": cohort, "period": later},
            )
        diff = p.outcomes[:, later - 1] - p.outcomes[:, base - 1]
        mean_s = diff[switchers].mean()
        mean_c = diff[comparison].mean()
        n_s, n_c = int(switchers.sum()), int(comparison.sum())

        contributions[switchers] += weight * (diff[switchers] - mean_s) / n_s
        contributions[comparison] -= weight * (diff[comparison] - mean_c) / n_c
        arm[comparison & (arm < 0)] = 0
        arm[switchers] = 1

        estimate = mean_s - mean_c
        alpha_hat += weight * estimate
        comparisons.append(
            Comparison(
                pre=(base,),
                post=(later,),
                weight=float(weight),
                cohort=cohort,
                n_switchers=n_s,
                n_comparison=n_c,
                estimate=float(estimate),
            )
        )

    logger.debug("comparisons_aggregated", estimator=tag.value, cells=len(cells), alpha_hat=alpha_hat)
    return _with_arms(tag, alpha_hat, contributions, arm, comparisons)


def _staggered_design(p: PanelData, not_yet_treated: bool) -> None:
    validate_panel(p, require_design=True, allow_all_treated=not_yet_treated)


def switcher_did(p: PanelData, not_yet_treated: bool = False) -> EstimateRecord:
    """Average of the 2x2 DIDs between s and s+1 at each switch date s.

    Switchers at s are compared with groups untreated through s+1; each date
    is weighted by its number of switchers.
    """
    _staggered_design(p, not_yet_treated)
    cohorts = p.start_periods
    sizes = np.array([(p.treated & (p.treat_start == s)).sum() for s in cohorts], dtype=float)
    cells = [(s, s, s + 1) for s in cohorts]
    return _accumulate(p, cells, sizes / sizes.sum(), not_yet_treated, EstimatorTag.SWITCHER)


def long_difference(p: PanelData, L: int = 0, not_yet_treated: bool = False) -> EstimateRecord:
    """Equal-weight average over (cohort s, horizon l) of DIDs of period s+l+1 against period s."""
    if L < 0:
        raise LabError(ErrorCode.BAD_WINDOW, f"horizon must be >= 0, got {L}")
    _staggered_design(p, not_yet_treated)
    cells = []
    for s in p.start_periods:
        if s + L + 1 > p.n_periods:
            raise LabError(
                ErrorCode.HORIZON_UNAVAILABLE,
                f"cohort t*={s} is observed for {p.n_periods - s - 1} horizons after the first, {L} requested",
                {"cohort": s, "horizon": L, "n_periods": p.n_periods},
            )
        cells.extend((s, s, s + l + 1) for l in range(L + 1))
    weights = np.full(len(cells), 1.0 / len(cells))
    return _accumulate(p, cells, weights, not_yet_treated, EstimatorTag.LONGDIFF)


def pretest_coefficient(p: PanelData, s: int, base: int) -> EstimateRecord:
    """Placebo 2x2 DID of period ``s`` against ``base``, both before any group is treated."""
    validate_panel(p, require_design=True)
    if s == base:
        raise LabError(ErrorCode.BAD_WINDOW, f"pre-test period and base period are both {s}")
    first_start = min(p.start_periods)
    late = [t for t in (s, base) if t > first_start]
    if late:
        raise LabError(
            ErrorCode.POST_PERIOD_IN_PRETEST,
            f"period {late[0]} is after the first adoption period {first_start}",
            {"period": late[0], "t_star": first_start},
        )
    return _two_arm(p, [base], [s], EstimatorTag.PLACEBO_PRE)


def estimate(p: PanelData, tag: EstimatorTag, **options) -> EstimateRecord:
    """Run the estimator named by ``tag``.

    Options: ``horizon`` (longdiff), ``not_yet_treated`` (switcher, longdiff),
    ``s`` / ``base`` (placebo_pre), ``regression`` (twfe by within transform).
    """
    tag = EstimatorTag(tag)
    not_yet = bool(options.get("not_yet_treated", False))
    if tag == EstimatorTag.TWFE:
        return twfe_regression(p) if options.get("regression") else twfe(p)
    if tag == EstimatorTag.FD:
        return first_difference(p)
    if tag == EstimatorTag.SWITCHER:
        return switcher_did(p, not_yet_treated=not_yet)
    if tag == EstimatorTag.LONGDIFF:
        return long_difference(p, int(options.get("horizon", 0)), not_yet_treated=not_yet)
    if "s" not in options or "base" not in options:
        raise LabError(ErrorCode.INVALID_CONFIG, "placebo_pre needs the periods s and base")
    return pretest_coefficient(p, int(options["s"]), int(options["base"]))

