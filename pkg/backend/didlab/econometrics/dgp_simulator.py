from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy import signal

from ..errors import ErrorCode, LabError
from ..model import (
    ARInit,
    ARSpec,
    BernoulliAssignment,
    CompleteAssignment,
    FactorModelSpec,
    FixedAssignment,
    FixedPopulation,
    GroupedAssignment,
    MicroPanel,
    ModelStructure,
    NestedMicroSpec,
    PanelData,
    SimulationResult,
)
from .rng import SeedLike, component_streams, make_rng

logger = structlog.get_logger(__name__)

TStar = Union[int, Sequence[int]]

TWOWAY_GROUPS = 100
PRETEST_GROUPS = 100
_MAX_ASSIGNMENT_DRAWS = 10_000
_COMPONENTS = ("assignment", "loadings", "factors", "eps", "fixed_effects", "effects")


def draw_ar1_paths(spec: ARSpec, T: int, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """``n_paths`` independent AR(1) paths of length T, one per row."""
    if T < 1:
        raise LabError(ErrorCode.BAD_SPEC, f"AR(1) path needs T >= 1, got {T}")
    sd = np.sqrt(spec.sigma_nu2)
    shocks = rng.standard_normal((n_paths, T)) * sd
    if spec.init == ARInit.STATIONARY:
        shocks[:, 0] = rng.standard_normal(n_paths) * np.sqrt(spec.marginal_variance)
    # zero init: X_0 = 0 so X_1 is the first innovation
    return signal.lfilter([1.0], [1.0, -spec.rho], shocks, axis=1)


def draw_ar1_path(spec: ARSpec, T: int, rng: np.random.Generator) -> np.ndarray:
    return draw_ar1_paths(spec, T, 1, rng)[0]


def arm_factor_spec(rho: float, two_period_var: float) -> ARSpec:
    """Stationary AR(1) whose two-period second moment E[(X_2 - X_1)^2] equals ``two_period_var``."""
    return ARSpec(rho=rho, sigma_nu2=two_period_var * (1.0 + rho) / 2.0)


def preset_twoway_mc_dgp(rho: float, T: int, n_groups: int = TWOWAY_GROUPS) -> FactorModelSpec:
    """Two-way clustering design: half the groups treated, arm-level AR(1) shocks with unit innovations.

    T only fixes the adoption period, after T/2 (see ``twoway_t_star``).
    """
    factor = ARSpec(rho=rho, sigma_nu2=1.0)
    return FactorModelSpec(
        structure=ModelStructure.ARM_LEVEL,
        factor_process=[factor, factor],
        sigma_eps2_treated=1.0,
        sigma_eps2_control=1.0,
        assignment=FixedAssignment(n_treated=n_groups // 2),
    )


def twoway_t_star(T: int) -> int:
    return max(1, T // 2)


def preset_pretest_dgp(rho: float, two_period_var: float, n_groups: int = PRETEST_GROUPS) -> FactorModelSpec:
    """Pre-test design: arm-level shocks scaled by their two-period variance, N(0,1) noise, half treated."""
    factor = arm_factor_spec(rho, two_period_var)
    return FactorModelSpec(
        structure=ModelStructure.ARM_LEVEL,
        factor_process=[factor, factor],
        sigma_eps2_treated=1.0,
        sigma_eps2_control=1.0,
        assignment=FixedAssignment(n_treated=n_groups // 2),
    )


def _draw_assignment(spec: FactorModelSpec, N: int, rng: np.random.Generator) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Treated flags plus the treated assignment units (groups or blocks) in cohort order."""
    rule = spec.assignment
    if isinstance(rule, BernoulliAssignment):
        if N < 2:
            raise LabError(ErrorCode.BAD_SPEC, "bernoulli assignment needs at least two groups")
        for _ in range(_MAX_ASSIGNMENT_DRAWS):
            treated = rng.random(N) < rule.c
            if 0 < treated.sum() < N:
                break
        else:
            raise LabError(ErrorCode.BAD_SPEC, f"no non-degenerate assignment with c={rule.c}, N={N}")
    elif isinstance(rule, FixedAssignment):
        if rule.flags is not None:
            if len(rule.flags) != N:
                raise LabError(ErrorCode.DIM_MISMATCH, f"{len(rule.flags)} assignment flags for {N} groups")
            treated = np.asarray(rule.flags, dtype=bool)
        else:
            treated = np.arange(N) < rule.n_treated
    elif isinstance(rule, CompleteAssignment):
        if rule.n_treated >= N:
            raise LabError(ErrorCode.BAD_SPEC, f"cannot treat {rule.n_treated} of {N} groups and keep a control")
        treated = np.zeros(N, dtype=bool)
        treated[rng.choice(N, size=rule.n_treated, replace=False)] = True
    elif isinstance(rule, GroupedAssignment):
        blocks = _block_labels(N, rule.n_blocks)
        chosen = np.sort(rng.choice(rule.n_blocks, size=rule.treated_blocks, replace=False))
        treated = np.isin(blocks, chosen)
        return treated, [np.flatnonzero(blocks == b) for b in chosen]
    else:  # pragma: no cover - guarded by the discriminated union
        raise LabError(ErrorCode.BAD_SPEC, f"unknown assignment {rule!r}")
    return treated, [np.array([j]) for j in np.flatnonzero(treated)]


def _block_labels(N: int, n_blocks: int) -> np.ndarray:
    if N % n_blocks:
        raise LabError(ErrorCode.BAD_SPEC, f"{N} groups do not split into {n_blocks} equal blocks")
    return np.arange(N) // (N // n_blocks)


def _start_periods(t_star: TStar, treated: np.ndarray, units: List[np.ndarray], T: int) -> np.ndarray:
    """Per-group t*. A sequence of length N is read per group; any other sequence is cycled over treated units."""
    N = treated.size
    starts = np.zeros(N, dtype=int)
    if np.isscalar(t_star):
        starts[treated] = int(t_star)
    else:
        values = [int(s) for s in t_star]
        if len(values) == N:
            starts = np.where(treated, values, 0)
        else:
            for k, unit in enumerate(units):
                starts[unit] = values[k % len(values)]
    bad = starts[treated][(starts[treated] < 1) | (starts[treated] > T - 1)]
    if bad.size:
        raise LabError(ErrorCode.BAD_TSTAR, f"t* = {int(bad[0])} outside 1..{T - 1}")
    return starts


def _psd_root(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def _noise(spec: FactorModelSpec, treated: np.ndarray, T: int, rng: np.random.Generator) -> np.ndarray:
    unit = ARSpec(rho=spec.eps_rho, sigma_nu2=1.0 - spec.eps_rho ** 2)
    sd = np.where(treated, np.sqrt(spec.sigma_eps2_treated), np.sqrt(spec.sigma_eps2_control))
    return draw_ar1_paths(unit, T, treated.size, rng) * sd[:, None]


def _assemble(
    spec: FactorModelSpec,
    streams: dict,
    treated: np.ndarray,
    starts: np.ndarray,
    T: int,
    factors: np.ndarray,
    loadings: np.ndarray,
    blocks: Optional[np.ndarray],
) -> SimulationResult:
    N = treated.size
    fe = streams["fixed_effects"]
    theta = spec.fe_group_sd * fe.standard_normal(N)
    gamma = spec.fe_time_sd * fe.standard_normal(T)
    eps = _noise(spec, treated, T, streams["eps"])
    effect = spec.treatment_effect
    alpha = effect.alpha + np.sqrt(effect.sigma_alpha2) * streams["effects"].standard_normal((N, T))

    panel = PanelData(outcomes=np.zeros((N, T)), treated=treated, treat_start=starts)
    d = panel.treatment_matrix()
    outcomes = d * alpha + theta[:, None] + gamma[None, :] + loadings @ factors.T + eps
    return SimulationResult(
        panel=panel.with_outcomes(outcomes),
        factors=factors,
        loadings=loadings,
        theta=theta,
        gamma=gamma,
        eps=eps,
        alpha=alpha,
        blocks=blocks,
    )


def _factor_draws(spec: FactorModelSpec, n_factors: int, T: int, rng: np.random.Generator) -> np.ndarray:
    if not n_factors:
        return np.zeros((T, 0))
    return np.column_stack([draw_ar1_path(spec.process_for(f), T, rng) for f in range(n_factors)])


def draw_factor_paths(spec: FactorModelSpec, T: int, seed: SeedLike) -> np.ndarray:
    """T x F common shocks exactly as ``simulate_panel`` draws them for the same seed."""
    streams = component_streams(seed, _COMPONENTS)
    return _factor_draws(spec, spec.n_factors, T, streams["factors"])


def simulate_panel(
    spec: FactorModelSpec,
    N: int,
    T: int,
    t_star: TStar,
    seed: SeedLike,
    factor_paths: Optional[np.ndarray] = None,
) -> SimulationResult:
    """Draw one panel from ``spec``.

    Every model component uses its own child stream of ``seed``. Passing
    ``factor_paths`` (T x F) holds the common shocks fixed and redraws
    everything else.
    """
    if spec.structure == ModelStructure.PAIRED:
        rule = spec.assignment
        if not isinstance(rule, FixedAssignment) or rule.n_treated is None:
            raise LabError(ErrorCode.BAD_SPEC, "paired structure needs fixed assignment with n_treated")
        return simulate_paired_panel(spec, rule.n_treated, N - rule.n_treated, T, t_star, seed)
    if T < 2:
        raise LabError(ErrorCode.BAD_SPEC, f"a panel needs T >= 2, got {T}")

    streams = component_streams(seed, _COMPONENTS)
    treated, units = _draw_assignment(spec, N, streams["assignment"])
    starts = _start_periods(t_star, treated, units, T)

    blocks = None
    if spec.structure == ModelStructure.GENERIC and spec.n_factors == 0:
        loadings = np.zeros((N, 0))
    elif spec.structure == ModelStructure.GENERIC:
        mean_t, mean_c, cov_t, cov_c = spec.loading_moments()
        z = streams["loadings"].standard_normal((N, spec.n_factors))
        loadings = np.where(
            treated[:, None],
            mean_t + z @ _psd_root(cov_t).T,
            mean_c + z @ _psd_root(cov_c).T,
        )
    elif spec.structure == ModelStructure.ARM_LEVEL:
        loadings = np.column_stack([treated, ~treated]).astype(float)
    else:
        blocks = _block_labels(N, int(spec.n_blocks))
        loadings = np.eye(int(spec.n_blocks))[blocks]

    n_factors = loadings.shape[1]
    if factor_paths is not None:
        factors = np.asarray(factor_paths, dtype=float).reshape(T, n_factors)
    else:
        factors = _factor_draws(spec, n_factors, T, streams["factors"])

    return _assemble(spec, streams, treated, starts, T, factors, loadings, blocks)


def simulate_paired_panel(spec: FactorModelSpec, N1: int, N0: int, T: int, t_star: TStar, seed: SeedLike) -> SimulationResult:
    """Groups in consecutive pairs per arm; both members load 1 on the pair's own shock.

    Treated pairs draw shocks from ``factor_process[0]``, control pairs from the
    last entry. The first N1 groups are treated.
    """
    if N1 % 2 or N0 % 2:
        raise LabError(ErrorCode.ODD_ARM, f"pairs need even arm sizes, got N1={N1}, N0={N0}", {"N1": N1, "N0": N0})
    if N1 < 2 or N0 < 2:
        raise LabError(ErrorCode.BAD_SPEC, "each arm needs at least one pair")
    if not spec.factor_process:
        raise LabError(ErrorCode.BAD_SPEC, "paired structure needs a factor_process")

    N = N1 + N0
    streams = component_streams(seed, _COMPONENTS)
    treated = np.arange(N) < N1
    starts = _start_periods(t_star, treated, [np.array([j]) for j in range(N1)], T)

    pairs = np.arange(N) // 2
    rng = streams["factors"]
    treated_shocks = draw_ar1_paths(spec.factor_process[0], T, N1 // 2, rng)
    control_shocks = draw_ar1_paths(spec.factor_process[-1], T, N0 // 2, rng)
    factors = np.vstack([treated_shocks, control_shocks]).T
    loadings = np.eye(N // 2)[pairs]
    return _assemble(spec, streams, treated, starts, T, factors, loadings, pairs)


def simulate_design_based(pop: FixedPopulation, seed: SeedLike) -> PanelData:
    """One allocation of ``pop.treated_blocks`` blocks to treatment, uniformly without replacement."""
    rng = make_rng(seed)
    chosen = rng.choice(pop.n_blocks, size=pop.treated_blocks, replace=False)
    treated = np.isin(pop.blocks, chosen)
    post = np.arange(1, pop.y0.shape[1] + 1) > pop.t_star
    outcomes = np.where(treated[:, None] & post[None, :], pop.y1, pop.y0)
    return PanelData(outcomes=outcomes, treated=treated, treat_start=pop.t_star)


def draw_fixed_population(
    n_blocks: int,
    block_size: int,
    T: int,
    t_star: int,
    block_factor: ARSpec,
    sigma_eps2: float = 1.0,
    alpha: float = 0.0,
    treated_blocks: Optional[int] = None,
    seed: SeedLike = 0,
) -> FixedPopulation:
    """Realize potential outcomes once from a block-factor super-population and freeze them."""
    streams = component_streams(seed, ("factors", "eps"))
    N = n_blocks * block_size
    blocks = np.arange(N) // block_size
    block_factors = draw_ar1_paths(block_factor, T, n_blocks, streams["factors"]).T
    eps = np.sqrt(sigma_eps2) * streams["eps"].standard_normal((N, T))
    y0 = block_factors[:, blocks].T + eps
    return FixedPopulation(
        y0=y0,
        y1=y0 + alpha,
        blocks=blocks,
        treated_blocks=treated_blocks or n_blocks // 2,
        t_star=t_star,
        block_factors=block_factors,
        eps=eps,
    )


def simulate_nested_micro(spec: NestedMicroSpec, seed: SeedLike) -> MicroPanel:
    """Synthetic survey-like micro data: clusters hold groups, groups hold units.

    y_unit,t = lambda_cluster,t + m_cohort * eta_t + e_group,t + u_unit,t, with
    cluster shocks lambda from ``cluster_factor`` and an optional national
    shock eta whose loading m rises linearly across cohorts.
    """
    streams = component_streams(seed, ("clusters", "national", "groups", "units"))
    K, G, U, T = spec.n_clusters, spec.groups_per_cluster, spec.units_per_group, spec.n_periods

    cluster_shocks = draw_ar1_paths(spec.cluster_factor, T, K, streams["clusters"])  # K x T
    if spec.national_factor is not None and spec.n_cohorts > 1:
        national = draw_ar1_path(spec.national_factor, T, streams["national"])
        position = np.arange(G) / (G - 1) - 0.5
        cohort_shocks = spec.cohort_loading_scale * position[:, None] * national[None, :]  # G x T
    else:
        cohort_shocks = np.zeros((G, T))
    group_shocks = spec.group_sd * streams["groups"].standard_normal((K, G, T))
    unit_shocks = spec.unit_sd * streams["units"].standard_normal((K, G, U, T))

    y = (
        cluster_shocks[:, None, None, :]
        + cohort_shocks[None, :, None, :]
        + group_shocks[:, :, None, :]
        + unit_shocks
    )

    k, g, u, t = np.meshgrid(np.arange(K), np.arange(G), np.arange(U), np.arange(T), indexing="ij")
    group = k * G + g
    frame = pd.DataFrame(
        {
            "unit": (group * U + u).ravel(),
            "group": group.ravel(),
            "time": (t + spec.first_period).ravel(),
            "outcome": y.ravel(),
            "weight": 1.0,
            "cluster": k.ravel(),
        }
    )
    if spec.n_cohorts > 1:
        frame["cohort"] = g.ravel()
    logger.debug("nested_micro_simulated", clusters=K, groups=K * G, units=K * G * U, periods=T)
    return MicroPanel(frame=frame, source="synthetic")
