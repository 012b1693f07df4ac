"""Replication engine and the standard Monte Carlo experiment."""
import time
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from joblib import Parallel, delayed
from tqdm import tqdm

from ...config import get_settings
from ...econometrics import compute_variance, estimate, replication_seed, simulate_panel, t_test
from ...econometrics.rng import chunk_indices
from ...errors import ErrorCode, LabError
from ...model import (
    EstimateRecord,
    EstimatorTag,
    ExperimentKind,
    MCConfig,
    MCReport,
    PanelData,
    RateCell,
    ReferenceDistribution,
    VarianceMethod,
)

logger = structlog.get_logger(__name__)

Replicate = Callable[[int], Dict[str, Any]]


def _run_chunk(replicate: Replicate, indices: range) -> List[Dict[str, Any]]:
    outputs = []
    for r in indices:
        try:
            outputs.append(replicate(r))
        except LabError as exc:
            raise LabError(
                ErrorCode.REPLICATION_FAILED,
                f"replication {r} failed: {exc}",
                {"replication": r, "cause": exc.code.value, **exc.details},
            ) from exc
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise LabError(
                ErrorCode.REPLICATION_FAILED,
                f"replication {r} failed: {exc}",
                {"replication": r, "cause": type(exc).__name__},
            ) from exc
    return outputs


def run_replications(
    replicate: Replicate,
    reps: int,
    workers: Optional[int] = None,
    desc: str = "replications",
) -> Dict[str, np.ndarray]:
    """Evaluate ``replicate(r)`` for r = 0..reps-1 and stack every output key in replication order.

    Replications run in contiguous chunks on a joblib pool; results are
    identical for any worker count as long as ``replicate`` draws its
    randomness from ``replication_seed(master, r, ...)``.
    """
    if reps < 1:
        raise LabError(ErrorCode.INVALID_CONFIG, f"need at least one replication, got {reps}")
    settings = get_settings()
    n_workers = workers or settings.workers
    chunks = chunk_indices(reps, n_workers * settings.chunks_per_worker)
    progress = dict(total=len(chunks), desc=desc, unit="chunk", disable=not settings.progress, leave=False)

    if n_workers == 1:
        results = [_run_chunk(replicate, chunk) for chunk in tqdm(chunks, **progress)]
    else:
        pool = Parallel(n_jobs=n_workers, backend="loky", return_as="generator")
        results = list(tqdm(pool(delayed(_run_chunk)(replicate, chunk) for chunk in chunks), **progress))

    rows = [row for chunk in results for row in chunk]
    return {key: np.asarray([row[key] for row in rows]) for key in rows[0]}


def binomial_se(rate: float, n: int) -> float:
    return float(np.sqrt(rate * (1.0 - rate) / n)) if n > 0 else 0.0


def rate_cell(
    estimator: EstimatorTag,
    method: VarianceMethod,
    rejects: np.ndarray,
    alpha_hat: np.ndarray,
    variance: np.ndarray,
    psd_adjusted: Optional[np.ndarray] = None,
    params: Optional[Dict[str, Any]] = None,
) -> RateCell:
    reps = int(rejects.size)
    rejections = int(rejects.sum())
    rate = rejections / reps
    return RateCell(
        estimator=estimator,
        variance_method=method,
        params=params or {},
        reps=reps,
        rejections=rejections,
        rate=rate,
        mc_se=binomial_se(rate, reps),
        psd_adjusted=int(psd_adjusted.sum()) if psd_adjusted is not None else 0,
        alpha_mean=float(alpha_hat.mean()),
        alpha_var=float(alpha_hat.var(ddof=1)) if reps > 1 else 0.0,
        mean_variance=float(variance.mean()),
    )


def estimator_options(cfg: MCConfig, p: PanelData, tag: EstimatorTag) -> Dict[str, Any]:
    """Options for ``estimate``: staggered TWFE goes through the regression form, placebo compares t*-1 with t*."""
    options: Dict[str, Any] = {"horizon": cfg.horizon, "not_yet_treated": cfg.not_yet_treated}
    if tag == EstimatorTag.TWFE:
        options["regression"] = not p.is_uniform
    elif tag == EstimatorTag.PLACEBO_PRE:
        base = min(p.start_periods)
        options.update(s=base - 1, base=base)
    return options


def _pairs(cfg: MCConfig) -> List[Tuple[EstimatorTag, VarianceMethod]]:
    return [(est, method) for est in cfg.estimators for method in cfg.variance_methods]


def _standard_replication(cfg: MCConfig, path: Tuple[int, ...], r: int) -> Dict[str, Any]:
    sim = simulate_panel(cfg.dgp, cfg.n_groups, cfg.n_periods, cfg.t_star, replication_seed(cfg.seed, r, *path))
    p = sim.panel
    pairs = _pairs(cfg)
    out = {
        "alpha": np.empty(len(pairs)),
        "variance": np.empty(len(pairs)),
        "reject": np.empty(len(pairs), dtype=bool),
        "psd": np.empty(len(pairs), dtype=bool),
    }
    records: Dict[EstimatorTag, EstimateRecord] = {}
    for k, (tag, method) in enumerate(pairs):
        if tag not in records:
            records[tag] = estimate(p, tag, **estimator_options(cfg, p, tag))
        e = records[tag]
        v = compute_variance(method, e, p, small_sample=cfg.small_sample)
        test = t_test(e.alpha_hat, v, cfg.level, cfg.reference)
        out["alpha"][k] = e.alpha_hat
        out["variance"][k] = v.value
        out["reject"][k] = test.reject
        out["psd"][k] = v.psd_adjusted
    return out


def run_cell(cfg: MCConfig, path: Tuple[int, ...], params: Dict[str, Any]) -> List[RateCell]:
    """Rejection cells of one parameter point; ``path`` separates its random streams from other points."""
    draws = run_replications(partial(_standard_replication, cfg, tuple(path)), cfg.reps, cfg.workers, desc=cfg.name)
    return [
        rate_cell(
            tag,
            method,
            draws["reject"][:, k],
            draws["alpha"][:, k],
            draws["variance"][:, k],
            draws["psd"][:, k],
            params,
        )
        for k, (tag, method) in enumerate(_pairs(cfg))
    ]


def run_mc(cfg: MCConfig) -> MCReport:
    """Simulate, estimate, compute variances and test, ``cfg.reps`` times; one cell per (estimator, method)."""
    if cfg.dgp is None:
        raise LabError(ErrorCode.INVALID_CONFIG, "a standard experiment needs a dgp")
    started = time.perf_counter()
    logger.info("mc_run_started", name=cfg.name, reps=cfg.reps, seed=cfg.seed, pairs=len(_pairs(cfg)))

    cells = run_cell(cfg, (), {"N": cfg.n_groups, "T": cfg.n_periods, "t_star": cfg.t_star})
    runtime = time.perf_counter() - started
    logger.info("mc_run_finished", name=cfg.name, runtime_seconds=round(runtime, 3))
    return MCReport(
        name=cfg.name,
        kind=ExperimentKind.STANDARD,
        seed=cfg.seed,
        reps=cfg.reps,
        level=cfg.level,
        cells=cells,
        runtime_seconds=runtime,
    )


def crve_rejections(
    records: Sequence[EstimateRecord],
    level: float,
    reference: ReferenceDistribution,
    small_sample: bool = True,
) -> np.ndarray:
    """CRVE t-test decisions for a list of estimates."""
    return np.array(
        [t_test(e.alpha_hat, compute_variance(VarianceMethod.CRVE_GROUP, e, small_sample=small_sample), level, reference).reject for e in records],
        dtype=bool,
    )
