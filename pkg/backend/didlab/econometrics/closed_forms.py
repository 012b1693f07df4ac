"""Closed-form variances and rejection rates used as oracles for the simulations."""
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from scipy import stats

from ..errors import ErrorCode, LabError
from ..model import (
    ARInit,
    ARSpec,
    BernoulliAssignment,
    DesignVariances,
    FactorModelSpec,
    FixedAssignment,
    FixedPopulation,
    GapInputs,
    ModelStructure,
)
from ..modules.preprocessingLayer import window_weights

logger = structlog.get_logger(__name__)


def _check_rho(rho: float) -> None:
    if not -1.0 < rho < 1.0:
        raise LabError(ErrorCode.BAD_RHO, f"|rho| must be below 1, got {rho}", {"rho": rho})


def nabla_second_moment(rho: float, T: int, sigma_nu2: float) -> float:
    """E[(grad X)^2] for a stationary AR(1) X, grad = mean of periods T/2+1..T minus mean of 1..T/2."""
    _check_rho(rho)
    if T < 2 or T % 2:
        raise LabError(ErrorCode.BAD_T, f"T must be even and at least 2, got {T}", {"T": T})
    if T == 2:
        # E[(X_2 - X_1)^2] = 2 sigma_nu^2 / (1 + rho), exact under the (1 + rho)/2 normalization
        return float(2.0 * sigma_nu2 / (1.0 + rho))
    half = rho ** (T // 2)
    bracket = T - 2.0 * rho / (1.0 - rho ** 2) * (3.0 - half) * (1.0 - half)
    return float(4.0 / (T ** 2 * (1.0 - rho) ** 2) * bracket * sigma_nu2)


def ar1_autocovariance(ar: ARSpec, T: int) -> np.ndarray:
    """T x T covariance matrix of an AR(1) path under its initialisation."""
    lags = np.abs(np.subtract.outer(np.arange(T), np.arange(T)))
    if ar.init == ARInit.STATIONARY:
        return ar.marginal_variance * ar.rho ** lags
    # X_0 = 0: Cov(X_s, X_t) = sigma^2 rho^|t-s| sum_{k<min(s,t)} rho^2k
    first = np.minimum.outer(np.arange(1, T + 1), np.arange(1, T + 1))
    r2 = ar.rho ** 2
    if np.isclose(r2, 1.0):
        accumulated = first.astype(float)
    else:
        accumulated = (1.0 - r2 ** first) / (1.0 - r2)
    return ar.sigma_nu2 * ar.rho ** lags * accumulated


def window_second_moment(ar: ARSpec, T: int, pre_set: Iterable[int], post_set: Iterable[int]) -> float:
    """Exact E[(grad X)^2] for arbitrary pre/post windows (1-based periods)."""
    w = window_weights(T, pre_set, post_set)
    return float(w @ ar1_autocovariance(ar, T) @ w)


def nabla_curve(rho_list: Sequence[float], T_max: int = 50) -> pd.DataFrame:
    """E[(grad X)^2] on even T = 2..T_max, innovations scaled so that the T = 2 value is 1."""
    rows = [
        {"rho": rho, "T": T, "value": nabla_second_moment(rho, T, (1.0 + rho) / 2.0)}
        for rho in rho_list
        for T in range(2, T_max + 1, 2)
    ]
    return pd.DataFrame(rows, columns=["rho", "T", "value"])


def prop1_variance_gap(g: GapInputs) -> float:
    """(mu_1 - mu_0)' E[(grad lambda)'(grad lambda)] (mu_1 - mu_0)."""
    gap = g.gap
    return float(gap @ g.moment_matrix @ gap)


def _covariance(cov: Optional[Sequence[Sequence[float]]], n: int, name: str) -> np.ndarray:
    if cov is None:
        return np.zeros((n, n))
    arr = np.atleast_2d(np.asarray(cov, dtype=float)) if n else np.zeros((0, 0))
    if arr.shape != (n, n):
        raise LabError(ErrorCode.DIM_MISMATCH, f"{name} is {arr.shape}, expected {n}x{n}")
    return arr


def exact_finite_variance(
    g: GapInputs,
    N1: int,
    N0: int,
    loading_cov_treated: Optional[Sequence[Sequence[float]]] = None,
    loading_cov_control: Optional[Sequence[Sequence[float]]] = None,
) -> float:
    """Variance of alpha_hat given N1 treated and N0 control groups.

    The noise entries of ``g`` are the variances of grad(eps_j); the loading
    covariances add the sampling noise of the arm-mean loadings.
    """
    if N1 < 1 or N0 < 1:
        raise LabError(ErrorCode.BAD_SPEC, f"need at least one group per arm, got N1={N1}, N0={N0}")
    n = len(g.mu_gap)
    m = g.moment_matrix
    cov_1 = _covariance(loading_cov_treated, n, "loading_cov_treated")
    cov_0 = _covariance(loading_cov_control, n, "loading_cov_control")
    return float(
        prop1_variance_gap(g)
        + np.trace(cov_1 @ m) / N1
        + np.trace(cov_0 @ m) / N0
        + g.sigma_eps2_treated / N1
        + g.sigma_eps2_control / N0
    )


def _noise_denominator(g: GapInputs) -> float:
    denom = g.sigma_eps2_treated / g.c + g.sigma_eps2_control / (1.0 - g.c)
    if denom <= 0:
        raise LabError(ErrorCode.ZERO_NOISE, "idiosyncratic variances are zero in both arms")
    return denom


def corollary_t_variance(g: GapInputs, omega: Optional[Sequence[Sequence[float]]] = None) -> float:
    """Limit variance 1 + kappa of the CRVE t-statistic under local-to-zero loading gaps.

    ``omega`` defaults to the second moment held in ``g``.
    """
    n = len(g.mu_gap)
    om = g.moment_matrix if omega is None else _covariance(omega, n, "omega")
    gap = g.gap
    return float(1.0 + gap @ om @ gap / _noise_denominator(g))


def propA1_t_variance(
    sigma_lambda2: float,
    sigma_delta2: float,
    sigma_eps2_1: float,
    sigma_eps2_0: float,
    c: float,
) -> float:
    """Limit variance of the CRVE t-statistic when groups share shocks in pairs (always below 2)."""
    if not 0.0 < c < 1.0:
        raise LabError(ErrorCode.BAD_SPEC, f"treated share must lie in (0, 1), got {c}")
    shared = sigma_lambda2 / c + sigma_delta2 / (1.0 - c)
    noise = sigma_eps2_1 / c + sigma_eps2_0 / (1.0 - c)
    if shared + noise <= 0:
        raise LabError(ErrorCode.ZERO_NOISE, "all variance components are zero")
    return float(1.0 + shared / (shared + noise))


def paired_twfe_variance(
    sigma_lambda2: float,
    sigma_delta2: float,
    sigma_eps2_1: float,
    sigma_eps2_0: float,
    N1: int,
    N0: int,
) -> float:
    """Finite-sample variance of TWFE when each pair of groups shares one shock."""
    if N1 < 2 or N0 < 2:
        raise LabError(ErrorCode.BAD_SPEC, f"each arm needs at least one pair, got N1={N1}, N0={N0}")
    return float(2.0 * sigma_lambda2 / N1 + 2.0 * sigma_delta2 / N0 + sigma_eps2_1 / N1 + sigma_eps2_0 / N0)


def rejection_from_inflation(kappa: float, level: float = 0.05) -> float:
    """Rejection rate of a nominal two-sided test when t ~ N(0, 1 + kappa)."""
    if kappa < 0:
        raise LabError(ErrorCode.BAD_SPEC, f"kappa must be non-negative, got {kappa}")
    if not 0.0 < level < 1.0:
        raise LabError(ErrorCode.BAD_SPEC, f"level must lie in (0, 1), got {level}")
    z = stats.norm.isf(level / 2.0)
    return float(2.0 * stats.norm.sf(z / np.sqrt(1.0 + kappa)))


def gap_inputs_from_spec(spec: FactorModelSpec, T: int, t_star: int, n_groups: Optional[int] = None) -> GapInputs:
    """GapInputs for the TWFE windows (1..t*, t*+1..T) of a factor model with independent factors."""
    if spec.structure not in (ModelStructure.GENERIC, ModelStructure.ARM_LEVEL):
        raise LabError(ErrorCode.BAD_SPEC, f"{spec.structure.value} loadings have no arm-level mean gap")
    if not 1 <= t_star < T:
        raise LabError(ErrorCode.BAD_TSTAR, f"t* = {t_star} outside 1..{T - 1}")
    pre, post = range(1, t_star + 1), range(t_star + 1, T + 1)
    mean_t, mean_c, _, _ = spec.loading_moments()
    moment = np.diag([window_second_moment(spec.process_for(f), T, pre, post) for f in range(spec.n_factors)])
    noise = ARSpec(rho=spec.eps_rho, sigma_nu2=1.0 - spec.eps_rho ** 2)
    eps_moment = window_second_moment(noise, T, pre, post)

    rule = spec.assignment
    c = 0.5
    if isinstance(rule, BernoulliAssignment):
        c = rule.c
    elif isinstance(rule, FixedAssignment) and n_groups:
        n_treated = rule.n_treated if rule.n_treated is not None else sum(rule.flags or [])
        c = n_treated / n_groups
    return GapInputs(
        mu_gap=(mean_t - mean_c).tolist(),
        second_moment=moment.tolist(),
        sigma_eps2_treated=spec.sigma_eps2_treated * eps_moment,
        sigma_eps2_control=spec.sigma_eps2_control * eps_moment,
        c=c,
    )


def _randomization_constant(n_units: int, n_treated: int, df_offset: int) -> float:
    # variance of a difference in means under complete randomization, per unit of sum of squares
    return n_units / (n_treated * (n_units - n_treated) * (n_units - df_offset))


def design_variances(pop: FixedPopulation, df_offset: int = 1) -> DesignVariances:
    """Randomization variance of alpha_hat when whole blocks vs single groups are assigned.

    ``v_corr`` assigns ``pop.treated_blocks`` blocks at random; ``v_uncorr``
    assigns the same number of groups one at a time. ``terms`` split their
    difference into block-shock, idiosyncratic, cross and within-block
    covariance parts; they add up to the gap exactly.

    With the default ``df_offset=1`` the constants are the exact randomization
    variances, ``4 / (F (F - 1))`` for a balanced block split. ``df_offset=2``
    gives the ``4 / (F (F - 2))`` form, which divides the sum of squares by ``F - 2``; it scales
    ``v_corr`` by ``(F - 1) / (F - 2)`` and ``v_uncorr`` by ``(N - 1) / (N - 2)``.
    """
    F, N = pop.n_blocks, pop.n_groups
    if F <= 2 or N <= 2:
        raise LabError(ErrorCode.TOO_FEW_BLOCKS, f"need more than two blocks and groups, got F={F}, N={N}", {"F": F, "N": N})
    if pop.block_factors is None or pop.eps is None:
        raise LabError(ErrorCode.BAD_SPEC, "population was built without its latent block shocks and noise")

    T = pop.y0.shape[1]
    w = window_weights(T, range(1, pop.t_star + 1), range(pop.t_star + 1, T + 1))
    grad_lambda = pop.block_factors.T @ w
    grad_eps = pop.eps @ w
    a = grad_lambda - grad_lambda.mean()
    e = grad_eps - grad_eps.mean()
    m = N / F

    e_block = np.bincount(pop.blocks, weights=e, minlength=F) / m
    block_sums_sq = np.bincount(pop.blocks, weights=e, minlength=F) ** 2
    s_off = float(block_sums_sq.sum() - (e ** 2).sum())

    k_f = _randomization_constant(F, pop.treated_blocks, df_offset)
    k_n = _randomization_constant(N, int(round(pop.treated_blocks * m)), df_offset)

    v_corr = k_f * float(((a + e_block) ** 2).sum())
    v_uncorr = k_n * float(((a[pop.blocks] + e) ** 2).sum())
    terms = (
        float((a ** 2).sum() * (k_f - m * k_n)),
        float((e ** 2).sum() * (k_f / m ** 2 - k_n)),
        float(2.0 * (a * e_block).sum() * (k_f - m * k_n)),
        float(k_f * s_off / m ** 2),
    )
    logger.debug("design_variances", blocks=F, groups=N, v_corr=v_corr, v_uncorr=v_uncorr)
    return DesignVariances(v_corr=v_corr, v_uncorr=v_uncorr, four_term_gap=float(sum(terms)), terms=terms)
