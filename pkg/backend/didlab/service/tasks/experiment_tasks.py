"""Preset experiment families built on the replication engine."""
import time
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog
from scipy import stats

from ...config import get_settings
from ...econometrics import (
    compute_variance,
    crve_group,
    draw_factor_paths,
    estimate,
    first_difference,
    make_rng,
    preset_pretest_dgp,
    preset_twoway_mc_dgp,
    pretest_coefficient,
    replication_seed,
    simulate_panel,
    t_test,
    twoway_t_star,
)
from ...errors import ErrorCode, LabError
from ...model import (
    ARSpec,
    CompleteAssignment,
    ConditionalLambdaReport,
    ConditionalLambdaSettings,
    EstimatorTag,
    ExperimentKind,
    FactorModelSpec,
    GroupedAssignment,
    MCConfig,
    MCReport,
    ModelStructure,
    NormalModelReport,
    NormalModelSettings,
    PretestRow,
    PretestSettings,
    RateCell,
    StaggeredSettings,
    TwoWaySettings,
    VarianceMethod,
)
from .calibration_tasks import calibrate_factor_variance
from .montecarlo_tasks import binomial_se, crve_rejections, rate_cell, run_cell, run_mc, run_replications

logger = structlog.get_logger(__name__)

PANEL_LABELS = "ABCDEFGH"
STAGGERED_ESTIMATORS = (EstimatorTag.TWFE, EstimatorTag.SWITCHER, EstimatorTag.LONGDIFF)

# spawn-key tags that keep auxiliary streams apart from replication streams
_CALIBRATION_STREAM = 101
_LAMBDA_STREAM = 102


def _report(cfg: MCConfig, kind: ExperimentKind, **fields: Any) -> MCReport:
    return MCReport(name=cfg.name, kind=kind, seed=cfg.seed, reps=cfg.reps, level=cfg.level, **fields)


def run_twoway_mc(cfg: MCConfig) -> MCReport:
    """Grid over (rho, T) of the two-way clustering design, one rate per variance method and cell."""
    grid = cfg.twoway or TwoWaySettings()
    n = grid.n_groups
    cells: List[RateCell] = []
    for i, rho in enumerate(grid.rho_list):
        for k, T in enumerate(grid.T_list):
            cell_cfg = cfg.model_copy(
                update={
                    "kind": ExperimentKind.STANDARD,
                    "dgp": preset_twoway_mc_dgp(rho, T, n),
                    "n_groups": n,
                    "n_periods": T,
                    "t_star": twoway_t_star(T),
                    "estimators": [EstimatorTag.TWFE],
                }
            )
            cells.extend(run_cell(cell_cfg, (i, k), {"rho": rho, "T": T}))
            logger.info("twoway_cell_finished", rho=rho, T=T)
    return _report(cfg, ExperimentKind.TWOWAY, cells=cells)


def _pretest_replication(
    spec: FactorModelSpec,
    n_groups: int,
    T: int,
    cfg: MCConfig,
    path: Tuple[int, ...],
    r: int,
) -> Dict[str, Any]:
    # treatment only in period T; every earlier period is compared with T-1
    p = simulate_panel(spec, n_groups, T, T - 1, replication_seed(cfg.seed, r, *path)).panel
    main = crve_rejections([first_difference(p)], cfg.level, cfg.reference, cfg.small_sample)[0]
    placebos = [pretest_coefficient(p, s=t, base=T - 1) for t in range(1, T - 1)]
    rejected = crve_rejections(placebos, cfg.level, cfg.reference, cfg.small_sample)
    return {"pass": not rejected.any(), "main": main}


def _calibrated_variance(cfg: MCConfig, grid: PretestSettings, k: int, target: Optional[float]) -> float:
    if target is None:
        return 0.0
    key = str(target)
    if key in grid.calibrated:
        return grid.calibrated[key]
    return calibrate_factor_variance(
        target,
        seed=cfg.seed,
        level=cfg.level,
        n_groups=grid.n_groups,
        reps=grid.calibration_reps,
        tol=grid.calibration_tol,
        reference=cfg.reference,
        workers=cfg.workers,
        stream=(_CALIBRATION_STREAM, k),
    )


def run_pretest_mc(cfg: MCConfig) -> MCReport:
    """Pass rate of the pre-trend tests and main-test rejection conditional on passing.

    One panel per target: no factors for a ``None`` target, otherwise
    arm-level shocks calibrated so the main test rejects at the target rate.
    Panels without factors do not depend on rho and are run at rho = 0 only.
    """
    grid = cfg.pretest or PretestSettings()
    rows: List[PretestRow] = []
    calibration: Dict[str, float] = {}
    for k, target in enumerate(grid.targets):
        v = _calibrated_variance(cfg, grid, k, target)
        if target is not None:
            calibration[str(target)] = v
        rhos = [0.0] if target is None else grid.rho_list
        for i, T in enumerate(grid.T_list):
            for j, rho in enumerate(rhos):
                spec = preset_pretest_dgp(rho, v, grid.n_groups)
                replicate = partial(_pretest_replication, spec, grid.n_groups, T, cfg, (k, i, j))
                draws = run_replications(replicate, cfg.reps, cfg.workers, desc=f"pretest {PANEL_LABELS[k]}")
                passed, main = draws["pass"], draws["main"]
                n_pass = int(passed.sum())
                pass_rate = n_pass / cfg.reps
                cond_rej = cond_se = None
                if n_pass and pass_rate >= grid.min_pass_rate:
                    cond_rej = float(main[passed].mean())
                    cond_se = binomial_se(cond_rej, n_pass)
                rows.append(
                    PretestRow(
                        panel=PANEL_LABELS[k],
                        target=target,
                        two_period_var=v,
                        T=T,
                        rho=rho,
                        reps=cfg.reps,
                        pass_rate=pass_rate,
                        pass_mc_se=binomial_se(pass_rate, cfg.reps),
                        cond_rej=cond_rej,
                        cond_mc_se=cond_se,
                        uncond_rej=float(main.mean()),
                    )
                )
                logger.info("pretest_cell_finished", panel=PANEL_LABELS[k], T=T, rho=rho, pass_rate=pass_rate)
    return _report(cfg, ExperimentKind.PRETEST, pretest_rows=rows, calibration=calibration)


def _conditional_replication(cfg: MCConfig, reps_per_lambda: int, r: int) -> Dict[str, Any]:
    i, _ = divmod(r, reps_per_lambda)
    paths = draw_factor_paths(cfg.dgp, cfg.n_periods, replication_seed(cfg.seed, i, _LAMBDA_STREAM))
    p = simulate_panel(cfg.dgp, cfg.n_groups, cfg.n_periods, cfg.t_star, replication_seed(cfg.seed, r), factor_paths=paths).panel
    e = estimate(p, cfg.estimators[0])
    return {"scaled": p.n_groups * crve_group(e, cfg.small_sample).value}


def run_conditional_lambda_mc(cfg: MCConfig) -> MCReport:
    """Dispersion of N x CRVE across fixed draws of the common shocks, against its within-draw noise.

    A ratio well above one means the variance estimator tracks the realized
    shocks instead of averaging them out.
    """
    if cfg.dgp is None:
        raise LabError(ErrorCode.INVALID_CONFIG, "a conditional-lambda experiment needs a dgp")
    settings = cfg.conditional or ConditionalLambdaSettings()
    n_draws, per = settings.n_lambda_draws, settings.reps_per_lambda
    replicate = partial(_conditional_replication, cfg, per)
    scaled = run_replications(replicate, n_draws * per, cfg.workers, desc="conditional lambda")["scaled"]
    scaled = scaled.reshape(n_draws, per)

    means = scaled.mean(axis=1)
    across = float(means.var(ddof=1))
    within = float(scaled.var(axis=1, ddof=1).mean() / per)
    ratio = across / within if within > 0 else None
    logger.info("conditional_lambda_finished", across=across, within=within, ratio=ratio)
    report = ConditionalLambdaReport(
        n_lambda_draws=n_draws,
        reps_per_lambda=per,
        per_lambda_means=means.tolist(),
        across_variance=across,
        within_variance=within,
        ratio=ratio,
    )
    return _report(cfg, ExperimentKind.CONDITIONAL_LAMBDA, conditional=report)


def staggered_spec(settings: StaggeredSettings, scheme: str) -> FactorModelSpec:
    """Blocked design: clusters share a stationary AR(1) shock; treatment is drawn per cluster or per group."""
    n_groups = settings.n_clusters * settings.groups_per_cluster
    if scheme == "cluster":
        assignment = GroupedAssignment(n_blocks=settings.n_clusters, treated_blocks=settings.n_clusters // 2)
    elif scheme == "unit":
        assignment = CompleteAssignment(n_treated=n_groups // 2)
    else:
        raise LabError(ErrorCode.INVALID_CONFIG, f"unknown assignment scheme {scheme!r}", {"scheme": scheme})
    factor = ARSpec(rho=settings.rho, sigma_nu2=settings.cluster_factor_var * (1.0 - settings.rho ** 2))
    return FactorModelSpec(
        structure=ModelStructure.BLOCKED,
        n_blocks=settings.n_clusters,
        factor_process=[factor],
        sigma_eps2_treated=settings.sigma_eps2,
        sigma_eps2_control=settings.sigma_eps2,
        assignment=assignment,
    )


def _staggered_replication(
    spec: FactorModelSpec,
    settings: StaggeredSettings,
    cfg: MCConfig,
    path: Tuple[int, ...],
    r: int,
) -> Dict[str, Any]:
    n_groups = settings.n_clusters * settings.groups_per_cluster
    p = simulate_panel(spec, n_groups, cfg.n_periods, settings.cohorts, replication_seed(cfg.seed, r, *path)).panel
    options = {"regression": True, "horizon": cfg.horizon, "not_yet_treated": cfg.not_yet_treated}
    alpha, variance, reject = [], [], []
    for tag in STAGGERED_ESTIMATORS:
        e = estimate(p, tag, **options)
        v = compute_variance(VarianceMethod.CRVE_GROUP, e, p, small_sample=cfg.small_sample)
        alpha.append(e.alpha_hat)
        variance.append(v.value)
        reject.append(t_test(e.alpha_hat, v, cfg.level, cfg.reference).reject)
    return {"alpha": np.array(alpha), "variance": np.array(variance), "reject": np.array(reject, dtype=bool)}


def run_staggered_comparison(cfg: MCConfig) -> MCReport:
    """TWFE, switcher and long-difference rejection rates under cluster-level and group-level assignment."""
    settings = cfg.staggered or StaggeredSettings()
    cells: List[RateCell] = []
    for s, scheme in enumerate(settings.schemes):
        spec = staggered_spec(settings, scheme)
        replicate = partial(_staggered_replication, spec, settings, cfg, (s,))
        draws = run_replications(replicate, cfg.reps, cfg.workers, desc=f"staggered {scheme}")
        for k, tag in enumerate(STAGGERED_ESTIMATORS):
            cells.append(
                rate_cell(
                    tag,
                    VarianceMethod.CRVE_GROUP,
                    draws["reject"][:, k],
                    draws["alpha"][:, k],
                    draws["variance"][:, k],
                    params={"scheme": scheme, "rho": settings.rho, "cohorts": list(settings.cohorts)},
                )
            )
        logger.info("staggered_scheme_finished", scheme=scheme, rates=[c.rate for c in cells[-len(STAGGERED_ESTIMATORS):]])
    return _report(cfg, ExperimentKind.STAGGERED_COMPARISON, cells=cells)


def _variance_se(x: np.ndarray) -> Optional[float]:
    if x.size < 2:
        return None
    dev2 = (x - x.mean()) ** 2
    return float(np.sqrt(dev2.var(ddof=1) / x.size))


def run_pretest_normal_model(cfg: MCConfig) -> MCReport:
    """Main and placebo estimates drawn jointly normal; the placebo pre-test uses a variance understated by 1 + kappa."""
    m = cfg.normal_model or NormalModelSettings()
    cov = np.array([[m.var1, m.cov], [m.cov, m.var0]])
    if np.linalg.eigvalsh(cov).min() < -1e-12:
        raise LabError(ErrorCode.BAD_COV, "covariance of (alpha_1, alpha_0) is not positive semi-definite", {"cov": m.cov})

    draws = make_rng(cfg.seed).multivariate_normal([m.alpha, 0.0], cov, size=cfg.reps, method="cholesky")
    main, placebo = draws[:, 0], draws[:, 1]
    shrink = 1.0 + m.gap_inflation
    z_pre = stats.norm.isf(m.pretest_level / 2.0)
    z_main = stats.norm.isf(cfg.level / 2.0)

    passed = np.abs(placebo) / np.sqrt(m.var0 / shrink) <= z_pre
    rejects = np.abs(main - m.alpha) / np.sqrt(m.var1 / shrink) > z_main
    kept = main[passed]
    n_pass = kept.size
    enough = n_pass >= 2
    report = NormalModelReport(
        reps=cfg.reps,
        alpha=m.alpha,
        pass_rate=n_pass / cfg.reps,
        uncond_mean=float(main.mean()),
        cond_mean=float(kept.mean()) if enough else None,
        uncond_var=float(main.var(ddof=1)),
        cond_var=float(kept.var(ddof=1)) if enough else None,
        mean_mc_se=float(np.sqrt(kept.var(ddof=1) / n_pass)) if enough else None,
        cond_var_mc_se=_variance_se(kept),
        uncond_rejection=float(rejects.mean()),
        cond_rejection=float(rejects[passed].mean()) if n_pass else None,
    )
    logger.info("normal_model_finished", pass_rate=report.pass_rate, cond_mean=report.cond_mean)
    return _report(cfg, ExperimentKind.PRETEST_NORMAL_MODEL, normal_model=report)


_RUNNERS: Dict[ExperimentKind, Callable[[MCConfig], MCReport]] = {
    ExperimentKind.STANDARD: run_mc,
    ExperimentKind.TWOWAY: run_twoway_mc,
    ExperimentKind.PRETEST: run_pretest_mc,
    ExperimentKind.CONDITIONAL_LAMBDA: run_conditional_lambda_mc,
    ExperimentKind.STAGGERED_COMPARISON: run_staggered_comparison,
    ExperimentKind.PRETEST_NORMAL_MODEL: run_pretest_normal_model,
}


def run_experiment(cfg: MCConfig) -> MCReport:
    """Run ``cfg`` with the runner for its kind and stamp the wall-clock runtime."""
    started = time.perf_counter()
    logger.info("experiment_started", name=cfg.name, kind=cfg.kind.value, reps=cfg.reps, seed=cfg.seed,
                workers=cfg.workers or get_settings().workers)
    report = _RUNNERS[cfg.kind](cfg)
    runtime = time.perf_counter() - started
    logger.info("experiment_finished", name=cfg.name, kind=cfg.kind.value, runtime_seconds=round(runtime, 3))
    return report.model_copy(update={"runtime_seconds": runtime})
