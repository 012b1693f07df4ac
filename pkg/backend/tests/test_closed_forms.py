from itertools import combinations

import numpy as np
import pytest

from didlab.econometrics import (
    corollary_t_variance,
    design_variances,
    draw_fixed_population,
    exact_finite_variance,
    gap_inputs_from_spec,
    nabla_curve,
    nabla_second_moment,
    paired_twfe_variance,
    prop1_variance_gap,
    propA1_t_variance,
    rejection_from_inflation,
    simulate_panel,
    twfe,
    window_second_moment,
)
from didlab.econometrics.closed_forms import ar1_autocovariance
from didlab.errors import ErrorCode, LabError
from didlab.model import ARInit, ARSpec, FactorModelSpec, FixedAssignment, GapInputs
from didlab.modules.preprocessingLayer import window_weights


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.9, -0.4])
@pytest.mark.parametrize("T", [2, 4, 10, 30])
def test_half_split_formula_matches_exact_quadratic_form(rho, T):
    ar = ARSpec(rho=rho, sigma_nu2=0.7)
    half = T // 2
    exact = window_second_moment(ar, T, range(1, half + 1), range(half + 1, T + 1))
    assert nabla_second_moment(rho, T, 0.7) == pytest.approx(exact)


def test_normalized_curve_starts_at_one():
    curve = nabla_curve([0.0, 0.5, 0.9], T_max=10)
    assert len(curve) == 15
    np.testing.assert_allclose(curve.loc[curve["T"] == 2, "value"], 1.0)
    iid = curve[curve["rho"] == 0.0]
    np.testing.assert_allclose(iid["value"], 2.0 / iid["T"])


def test_normalized_curve_is_exactly_one_at_two_periods():
    curve = nabla_curve([-0.4, 0.0, 0.3, 0.5, 0.9, 0.99], T_max=2)
    assert curve["value"].tolist() == [1.0] * 6
    assert nabla_second_moment(0.5, 2, 0.75) == 1.0


def test_curve_flattens_with_persistence():
    curve = nabla_curve([0.0, 0.9], T_max=20).set_index(["rho", "T"])["value"]
    assert curve[(0.9, 20)] > curve[(0.0, 20)]


@pytest.mark.parametrize("rho, T, code", [(1.0, 4, ErrorCode.BAD_RHO), (0.5, 3, ErrorCode.BAD_T), (0.5, 0, ErrorCode.BAD_T)])
def test_half_split_formula_domain(rho, T, code):
    with pytest.raises(LabError) as exc:
        nabla_second_moment(rho, T, 1.0)
    assert exc.value.code == code


def test_zero_initialised_autocovariance():
    cov = ar1_autocovariance(ARSpec(rho=0.5, sigma_nu2=2.0, init=ARInit.ZERO), 3)
    assert cov[0, 0] == pytest.approx(2.0)
    assert cov[1, 1] == pytest.approx(2.0 * 1.25)
    assert cov[0, 1] == pytest.approx(2.0 * 0.5)
    assert cov[0, 2] == pytest.approx(2.0 * 0.25)


def test_variance_gap_is_a_quadratic_form():
    g = GapInputs(mu_gap=[1.0, -2.0], second_moment=[[2.0, 0.5], [0.5, 1.0]], sigma_eps2_treated=1.0, sigma_eps2_control=1.0)
    assert prop1_variance_gap(g) == pytest.approx(2.0 - 2.0 + 4.0)


def test_gap_inputs_validate_shapes():
    with pytest.raises(LabError) as exc:
        GapInputs(mu_gap=[1.0, 0.0], second_moment=[[1.0]], sigma_eps2_treated=1.0, sigma_eps2_control=1.0)
    assert exc.value.code == ErrorCode.DIM_MISMATCH
    with pytest.raises(LabError) as exc:
        GapInputs(mu_gap=[1.0], second_moment=[[-1.0]], sigma_eps2_treated=1.0, sigma_eps2_control=1.0)
    assert exc.value.code == ErrorCode.BAD_COV


def test_corollary_inflation():
    g = GapInputs(mu_gap=[1.0], second_moment=[[2.0]], sigma_eps2_treated=1.0, sigma_eps2_control=1.0, c=0.5)
    assert corollary_t_variance(g) == pytest.approx(1.5)
    assert corollary_t_variance(g, omega=[[4.0]]) == pytest.approx(2.0)
    silent = g.model_copy(update={"sigma_eps2_treated": 0.0, "sigma_eps2_control": 0.0})
    with pytest.raises(LabError) as exc:
        corollary_t_variance(silent)
    assert exc.value.code == ErrorCode.ZERO_NOISE


def test_pair_shared_shocks_inflate_below_two():
    assert propA1_t_variance(1.0, 1.0, 1.0, 1.0, 0.5) == pytest.approx(1.5)
    assert propA1_t_variance(10.0, 10.0, 0.1, 0.1, 0.3) < 2.0
    assert paired_twfe_variance(1.0, 1.0, 1.0, 1.0, 4, 4) == pytest.approx(1.5)


def test_rejection_from_inflation():
    assert rejection_from_inflation(0.0) == pytest.approx(0.05)
    assert rejection_from_inflation(1.0) == pytest.approx(0.1658, abs=1e-3)
    with pytest.raises(LabError):
        rejection_from_inflation(-0.1)


def test_exact_variance_matches_simulation():
    spec = FactorModelSpec(
        loading_mean_treated=[1.0],
        loading_mean_control=[0.0],
        loading_cov_treated=[[0.5]],
        loading_cov_control=[[0.5]],
        factor_process=[ARSpec(rho=0.5, sigma_nu2=1.0)],
        assignment=FixedAssignment(n_treated=10),
    )
    g = gap_inputs_from_spec(spec, T=4, t_star=2, n_groups=20)
    assert g.c == pytest.approx(0.5)
    expected = exact_finite_variance(g, 10, 10, [[0.5]], [[0.5]])

    draws = np.array([twfe(simulate_panel(spec, 20, 4, 2, seed=s).panel).alpha_hat for s in range(4000)])
    assert draws.var() == pytest.approx(expected, rel=0.15)
    assert abs(draws.mean()) < 4 * np.sqrt(expected / 4000)


def test_design_variances_are_exact_randomization_variances():
    pop = draw_fixed_population(n_blocks=6, block_size=2, T=4, t_star=2, block_factor=ARSpec(rho=0.5), seed=3)
    grad = pop.y0 @ window_weights(4, [1, 2], [3, 4])

    def spread(labels, n_treated):
        estimates = []
        for chosen in combinations(range(labels.max() + 1), n_treated):
            treated = np.isin(labels, chosen)
            estimates.append(grad[treated].mean() - grad[~treated].mean())
        return np.var(estimates)

    d = design_variances(pop)
    assert d.v_corr == pytest.approx(spread(pop.blocks, 3))
    assert d.v_uncorr == pytest.approx(spread(np.arange(12), 6))
    assert d.four_term_gap == pytest.approx(d.v_corr - d.v_uncorr)
    assert sum(d.terms) == pytest.approx(d.four_term_gap)


def test_design_variances_with_offset_two_use_four_over_f_f_minus_two():
    pop = draw_fixed_population(n_blocks=6, block_size=2, T=4, t_star=2, block_factor=ARSpec(rho=0.5), seed=3)
    exact = design_variances(pop)
    shifted = design_variances(pop, df_offset=2)
    F, N = 6, 12
    assert shifted.v_corr == pytest.approx(exact.v_corr * (F - 1) / (F - 2))
    assert shifted.v_uncorr == pytest.approx(exact.v_uncorr * (N - 1) / (N - 2))
    # balanced assignment: k_F = F / (F/2 * F/2 * (F - 2)) = 4 / (F (F - 2))
    assert shifted.v_corr / exact.v_corr == pytest.approx((4.0 / (F * (F - 2))) / (4.0 / (F * (F - 1))))
    assert sum(shifted.terms) == pytest.approx(shifted.v_corr - shifted.v_uncorr)
    assert shifted.four_term_gap == pytest.approx(shifted.v_corr - shifted.v_uncorr)


def test_design_variances_need_more_than_two_blocks():
    pop = draw_fixed_population(n_blocks=2, block_size=3, T=3, t_star=1, block_factor=ARSpec(), treated_blocks=1, seed=0)
    with pytest.raises(LabError) as exc:
        design_variances(pop)
    assert exc.value.code == ErrorCode.TOO_FEW_BLOCKS


@pytest.mark.parametrize("rho, T", [(0.0, 4), (0.5, 10), (0.9, 30), (-0.4, 6)])
def test_second_moment_is_linear_in_innovation_variance(rho, T):
    base = nabla_second_moment(rho, T, 1.0)
    for k in (0.25, 3.0, 10.0):
        assert nabla_second_moment(rho, T, k) == pytest.approx(k * base, rel=1e-12)
    assert window_second_moment(ARSpec(rho=rho, sigma_nu2=3.0), T, [1], [T]) == pytest.approx(
        3.0 * window_second_moment(ARSpec(rho=rho, sigma_nu2=1.0), T, [1], [T])
    )


def test_persistent_to_transitory_ratio_grows_with_T():
    curve = nabla_curve([0.0, 0.3, 0.5, 0.9], T_max=50).set_index(["rho", "T"])["value"].unstack("T")
    assert (np.diff(curve.loc[0.0].to_numpy()) < 0).all()
    for hi, lo in [(0.3, 0.0), (0.5, 0.0), (0.9, 0.0), (0.9, 0.5)]:
        ratio = (curve.loc[hi] / curve.loc[lo]).to_numpy()
        assert ratio[0] == pytest.approx(1.0)
        assert (np.diff(ratio) > 0).all()


def test_variance_gap_is_rotation_invariant():
    rng = np.random.default_rng(8)
    gap = rng.normal(size=3)
    root = rng.normal(size=(3, 3))
    moment = root @ root.T
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    g = GapInputs(mu_gap=gap.tolist(), second_moment=moment.tolist(), sigma_eps2_treated=1.0, sigma_eps2_control=1.0)
    rotated = GapInputs(
        mu_gap=(q @ gap).tolist(),
        second_moment=(q @ moment @ q.T).tolist(),
        sigma_eps2_treated=1.0,
        sigma_eps2_control=1.0,
    )
    assert prop1_variance_gap(rotated) == pytest.approx(prop1_variance_gap(g), rel=1e-10)


def test_design_gap_decomposition_is_exact_on_random_populations():
    rng = np.random.default_rng(12)
    for seed in range(100):
        pop = draw_fixed_population(
            n_blocks=int(rng.integers(3, 9)),
            block_size=int(rng.integers(1, 5)),
            T=int(rng.integers(2, 7)),
            t_star=1,
            block_factor=ARSpec(rho=float(rng.uniform(-0.8, 0.9))),
            seed=seed,
        )
        d = design_variances(pop)
        assert abs(sum(d.terms) - (d.v_corr - d.v_uncorr)) <= 1e-10
        assert abs(d.four_term_gap - (d.v_corr - d.v_uncorr)) <= 1e-10
