from functools import partial
from typing import Any, Dict, Optional, Sequence, Union

import structlog

from ...econometrics import (
    arm_factor_spec,
    crve_group,
    first_difference,
    preset_pretest_dgp,
    replication_seed,
    simulate_panel,
    t_test,
)
from ...errors import ErrorCode, LabError
from ...model import FactorModelSpec, ReferenceDistribution
from .montecarlo_tasks import run_replications

logger = structlog.get_logger(__name__)

CALIBRATION_PERIODS = 2
_FIRST_UPPER_BOUND = 0.01
_MAX_DOUBLINGS = 30
_MAX_BISECTIONS = 40


def _with_factor_variance(base_spec: FactorModelSpec, two_period_var: float) -> FactorModelSpec:
    factor = arm_factor_spec(0.0, two_period_var)
    return base_spec.model_copy(update={"factor_process": [factor, factor]})


def _two_period_replication(
    spec: FactorModelSpec,
    n_groups: int,
    level: float,
    reference: ReferenceDistribution,
    seed: int,
    stream: Sequence[int],
    r: int,
) -> Dict[str, Any]:
    sim = simulate_panel(spec, n_groups, CALIBRATION_PERIODS, 1, replication_seed(seed, r, *stream))
    e = first_difference(sim.panel)
    return {"reject": t_test(e.alpha_hat, crve_group(e), level, reference).reject}


def two_period_rejection_rate(
    two_period_var: float,
    base_spec: Optional[FactorModelSpec] = None,
    n_groups: int = 100,
    reps: int = 10_000,
    level: float = 0.05,
    reference: Union[ReferenceDistribution, str] = ReferenceDistribution.STUDENT_T,
    seed: int = 0,
    workers: Optional[int] = None,
    stream: Sequence[int] = (),
) -> float:
    """Rejection rate of the CRVE t-test on the two-period main test of the arm-level design.

    The same seed gives common random numbers across ``two_period_var``
    values: only the scale of the arm shocks changes.
    """
    spec = _with_factor_variance(base_spec or preset_pretest_dgp(0.0, 0.0, n_groups), two_period_var)
    replicate = partial(_two_period_replication, spec, n_groups, level, ReferenceDistribution(reference), seed, tuple(stream))
    draws = run_replications(replicate, reps, workers, desc="calibration")
    return float(draws["reject"].mean())


def calibrate_factor_variance(
    target_rejection: float,
    base_spec: Optional[FactorModelSpec] = None,
    seed: int = 0,
    level: float = 0.05,
    n_groups: int = 100,
    reps: int = 10_000,
    tol: float = 0.005,
    reference: Union[ReferenceDistribution, str] = ReferenceDistribution.STUDENT_T,
    workers: Optional[int] = None,
    stream: Sequence[int] = (),
) -> float:
    """Two-period arm-shock variance E[(lambda_2 - lambda_1)^2] whose main-test rejection rate is ``target_rejection``.

    Bisection on the simulated rate, ``reps`` replications per evaluation, stops
    within ``tol`` of the target. The two-period normalization makes the
    answer the same for every rho.
    """
    if not level <= target_rejection < 1.0:
        raise LabError(
            ErrorCode.NO_BRACKET,
            f"target rejection {target_rejection} must lie in [{level}, 1)",
            {"target": target_rejection, "level": level},
        )

    def rate(v: float) -> float:
        value = two_period_rejection_rate(v, base_spec, n_groups, reps, level, reference, seed, workers, stream)
        logger.debug("calibration_step", two_period_var=v, rate=value, target=target_rejection)
        return value

    if rate(0.0) >= target_rejection - tol:
        return 0.0

    lo, hi = 0.0, _FIRST_UPPER_BOUND
    for _ in range(_MAX_DOUBLINGS):
        if rate(hi) >= target_rejection:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise LabError(ErrorCode.NO_BRACKET, f"no shock variance reaches rejection rate {target_rejection}")

    mid = (lo + hi) / 2.0
    for _ in range(_MAX_BISECTIONS):
        mid = (lo + hi) / 2.0
        current = rate(mid)
        if abs(current - target_rejection) <= tol:
            break
        if current < target_rejection:
            lo = mid
        else:
            hi = mid
    logger.info("calibration_finished", target=target_rejection, two_period_var=mid)
    return mid
