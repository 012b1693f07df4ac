from functools import lru_cache
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog
from scipy import stats

from ..errors import ErrorCode, LabError
from ..model import (
    EstimateRecord,
    PanelData,
    ReferenceDistribution,
    TestResult,
    VarianceEstimate,
    VarianceMethod,
)
from .did_estimators import within_fit

logger = structlog.get_logger(__name__)


def _cluster_factor(G: int, small_sample: bool) -> float:
    return G / (G - 1.0) if small_sample else 1.0


def crve_group(e: EstimateRecord, small_sample: bool = True) -> VarianceEstimate:
    """Cluster-robust variance with one cluster per group.

    (1/N1^2) sum_treated W_j^2 + (1/N0^2) sum_control W_j^2, i.e. sum(psi_j^2),
    times G/(G-1) unless ``small_sample`` is off. Student-t reference with G-1 dof.
    """
    if e.n_treated < 2 or e.n_control < 2:
        raise LabError(
            ErrorCode.TOO_FEW_CLUSTERS,
            f"cluster variance needs two groups per arm, got N1={e.n_treated}, N0={e.n_control}",
            {"n_treated": e.n_treated, "n_control": e.n_control},
        )
    G = e.n_clusters
    raw = float(np.sum(e.contributions ** 2))
    value = raw * _cluster_factor(G, small_sample)
    return VarianceEstimate(method=VarianceMethod.CRVE_GROUP, value=value, dof=G - 1, raw_value=raw)


def crve_cluster(e: EstimateRecord, cluster_ids: Sequence[Any], small_sample: bool = True) -> VarianceEstimate:
    """Cluster-robust variance at a coarser level: contributions are summed within each cluster first."""
    labels = np.asarray(cluster_ids, dtype=object)
    if labels.shape != e.contributions.shape:
        raise LabError(ErrorCode.DIM_MISMATCH, f"{labels.size} cluster labels for {e.contributions.size} groups")
    used = e.arm >= 0
    sums = pd.Series(e.contributions[used]).groupby(labels[used]).sum()
    G = int(sums.size)
    if G < 2:
        raise LabError(ErrorCode.TOO_FEW_CLUSTERS, f"cluster variance needs at least two clusters, got {G}", {"clusters": G})
    raw = float((sums ** 2).sum())
    value = raw * _cluster_factor(G, small_sample)
    return VarianceEstimate(method=VarianceMethod.CRVE_GROUP, value=value, dof=G - 1, raw_value=raw)


def _regression_factor(n: int, small_sample: bool) -> float:
    # fixed effects are absorbed, only the treatment coefficient is counted
    return n / (n - 1.0) if small_sample else 1.0


def hc_robust(p: PanelData, small_sample: bool = True) -> VarianceEstimate:
    """Heteroskedasticity-robust sandwich treating every (group, period) cell as independent."""
    _, d_tilde, residuals, sxx = within_fit(p)
    n = d_tilde.size
    raw = float(((d_tilde * residuals) ** 2).sum() / sxx ** 2)
    value = raw * _regression_factor(n, small_sample)
    dof = max(1, n - p.n_groups - p.n_periods)
    return VarianceEstimate(method=VarianceMethod.HC_ROBUST, value=value, dof=dof, raw_value=raw)


@lru_cache(maxsize=None)
def _warn_few_periods(n_periods: int) -> None:
    logger.warning("twoway_cluster_few_periods", n_periods=n_periods)


def twoway_cgm(p: PanelData, small_sample: bool = True) -> VarianceEstimate:
    """Two-way clustered variance by group and period: V_group + V_time - V_cell.

    A negative total is clamped to 0 and flagged ``psd_adjusted``.
    """
    if p.n_periods < 3:
        _warn_few_periods(p.n_periods)
    _, d_tilde, residuals, sxx = within_fit(p)
    scores = d_tilde * residuals / sxx
    v_group = float((scores.sum(axis=1) ** 2).sum())
    v_time = float((scores.sum(axis=0) ** 2).sum())
    v_cell = float((scores ** 2).sum())
    raw = (v_group + v_time - v_cell) * _regression_factor(scores.size, small_sample)

    psd_adjusted = raw < 0
    if psd_adjusted:
        logger.debug("twoway_variance_clamped", raw_value=raw)
    dof = max(1, min(p.n_groups, p.n_periods) - 1)
    return VarianceEstimate(
        method=VarianceMethod.TWOWAY_CGM,
        value=max(raw, 0.0),
        dof=dof,
        psd_adjusted=psd_adjusted,
        raw_value=raw,
    )


def t_test(
    alpha_hat: float,
    v: VarianceEstimate,
    level: float = 0.05,
    reference: Union[ReferenceDistribution, str] = ReferenceDistribution.STUDENT_T,
) -> TestResult:
    """Two-sided test of alpha = 0. A zero variance rejects iff alpha_hat is non-zero."""
    reference = ReferenceDistribution(reference)
    if v.value <= 0:
        reject = bool(alpha_hat != 0)
        t_stat = 0.0 if not reject else float(np.sign(alpha_hat) * np.inf)
        return TestResult(t_stat=t_stat, p_value=0.0 if reject else 1.0, reject=reject, level=level, reference=reference)

    t_stat = alpha_hat / np.sqrt(v.value)
    if reference == ReferenceDistribution.STUDENT_T:
        p_value = 2.0 * stats.t.sf(abs(t_stat), v.dof)
    else:
        p_value = 2.0 * stats.norm.sf(abs(t_stat))
    p_value = float(min(1.0, max(0.0, p_value)))
    return TestResult(t_stat=float(t_stat), p_value=p_value, reject=bool(p_value < level), level=level, reference=reference)


VarianceFn = Callable[..., VarianceEstimate]

_METHODS: Dict[VarianceMethod, VarianceFn] = {
    VarianceMethod.CRVE_GROUP: lambda e, p, small_sample, clusters: (
        crve_group(e, small_sample) if clusters is None else crve_cluster(e, clusters, small_sample)
    ),
    VarianceMethod.HC_ROBUST: lambda e, p, small_sample, clusters: hc_robust(p, small_sample),
    VarianceMethod.TWOWAY_CGM: lambda e, p, small_sample, clusters: twoway_cgm(p, small_sample),
}


def register_variance_method(method: VarianceMethod, fn: VarianceFn) -> None:
    """Install (or replace) the implementation behind ``method``; ``fn(e, p, small_sample, clusters)``."""
    _METHODS[VarianceMethod(method)] = fn


def compute_variance(
    method: Union[VarianceMethod, str],
    e: EstimateRecord,
    p: Optional[PanelData] = None,
    small_sample: bool = True,
    clusters: Optional[Sequence[Any]] = None,
) -> VarianceEstimate:
    method = VarianceMethod(method)
    if method != VarianceMethod.CRVE_GROUP and p is None:
        raise LabError(ErrorCode.INVALID_CONFIG, f"{method.value} needs the panel the estimate came from")
    return _METHODS[method](e, p, small_sample, clusters)
