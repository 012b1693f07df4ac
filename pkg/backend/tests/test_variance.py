import numpy as np
import pytest
from scipy import stats

from didlab.econometrics import compute_variance, crve_cluster, crve_group, hc_robust, t_test, twfe, twoway_cgm
from didlab.errors import ErrorCode, LabError
from didlab.model import PanelData, ReferenceDistribution, VarianceEstimate, VarianceMethod


def test_crve_group_by_hand(random_panel):
    p = random_panel()
    Y = p.outcomes
    nabla = Y[:, 3:].mean(axis=1) - Y[:, :3].mean(axis=1)
    w1 = nabla[:5] - nabla[:5].mean()
    w0 = nabla[5:] - nabla[5:].mean()
    raw = (w1 ** 2).sum() / 25 + (w0 ** 2).sum() / 49

    v = crve_group(twfe(p))
    assert v.raw_value == pytest.approx(raw)
    assert v.value == pytest.approx(raw * 12 / 11)
    assert v.dof == 11
    assert crve_group(twfe(p), small_sample=False).value == pytest.approx(raw)


def test_crve_needs_two_groups_per_arm():
    p = PanelData(outcomes=np.arange(8.0).reshape(4, 2), treated=[True, False, False, False], treat_start=1)
    with pytest.raises(LabError) as exc:
        crve_group(twfe(p))
    assert exc.value.code == ErrorCode.TOO_FEW_CLUSTERS
    assert exc.value.exit_code == 3


def test_singleton_clusters_match_group_clustering(random_panel):
    e = twfe(random_panel())
    by_group = crve_group(e)
    by_cluster = crve_cluster(e, list(range(12)))
    assert by_cluster.value == pytest.approx(by_group.value)
    assert by_cluster.dof == by_group.dof


def test_coarser_clusters_sum_contributions_first(random_panel):
    e = twfe(random_panel())
    labels = np.repeat(["a", "b", "c", "d"], 3)
    sums = np.array([e.contributions[i : i + 3].sum() for i in range(0, 12, 3)])
    v = crve_cluster(e, labels)
    assert v.value == pytest.approx((sums ** 2).sum() * 4 / 3)
    assert v.dof == 3


def test_cluster_labels_must_match_groups(random_panel):
    e = twfe(random_panel())
    with pytest.raises(LabError) as exc:
        crve_cluster(e, ["a", "b"])
    assert exc.value.code == ErrorCode.DIM_MISMATCH
    with pytest.raises(LabError) as exc:
        crve_cluster(e, ["a"] * 12)
    assert exc.value.code == ErrorCode.TOO_FEW_CLUSTERS


def test_hc_and_twoway_coincide_with_two_periods(random_panel):
    p = random_panel(n_periods=2, t_star=1)
    hc = hc_robust(p)
    cgm = twoway_cgm(p)
    assert cgm.value == pytest.approx(hc.value)
    assert not cgm.psd_adjusted


def test_twoway_value_is_never_negative(random_panel):
    for seed in range(10):
        v = twoway_cgm(random_panel(seed=seed))
        assert v.value >= 0.0
        assert v.psd_adjusted == (v.raw_value < 0)


def test_regression_variances_need_the_panel(random_panel):
    e = twfe(random_panel())
    with pytest.raises(LabError) as exc:
        compute_variance(VarianceMethod.HC_ROBUST, e)
    assert exc.value.code == ErrorCode.INVALID_CONFIG
    assert compute_variance("crve_group", e).value == pytest.approx(crve_group(e).value)


def test_t_test_student_reference():
    v = VarianceEstimate(method=VarianceMethod.CRVE_GROUP, value=4.0, dof=10)
    result = t_test(5.0, v, level=0.05)
    assert result.t_stat == pytest.approx(2.5)
    assert result.p_value == pytest.approx(2 * stats.t.sf(2.5, 10))
    assert result.reject


def test_t_test_normal_reference_at_the_boundary():
    v = VarianceEstimate(method=VarianceMethod.CRVE_GROUP, value=1.0, dof=3)
    assert t_test(1.9, v, reference=ReferenceDistribution.NORMAL).reject is False
    assert t_test(2.0, v, reference="normal").reject is True
    assert t_test(2.0, v, reference="t").reject is False


def test_zero_variance_rejects_only_nonzero_estimates(two_by_two):
    e = twfe(two_by_two)
    v = crve_group(e)
    assert v.value == 0.0
    result = t_test(e.alpha_hat, v)
    assert result.reject and result.p_value == 0.0 and np.isinf(result.t_stat)
    assert not t_test(0.0, v).reject


def _collapsed_sandwich(p):
    """Coefficient on D and its one-cluster-per-group sandwich variance in the regression of grad(Y) on (1, D)."""
    t = p.t_star
    nabla = p.outcomes[:, t:].mean(axis=1) - p.outcomes[:, :t].mean(axis=1)
    X = np.column_stack([np.ones(p.n_groups), p.treated.astype(float)])
    bread = np.linalg.inv(X.T @ X)
    beta = bread @ X.T @ nabla
    u = nabla - X @ beta
    meat = (X * u[:, None] ** 2).T @ X
    return beta[1], (bread @ meat @ bread)[1, 1]


def test_crve_equals_collapsed_cluster_sandwich(random_panel):
    rng = np.random.default_rng(99)
    for seed in range(200):
        N = int(rng.integers(4, 13))
        T = int(rng.integers(2, 7))
        p = random_panel(n_groups=N, n_periods=T, t_star=int(rng.integers(1, T)), n_treated=int(rng.integers(2, N - 1)), seed=seed)
        e = twfe(p)
        coefficient, sandwich = _collapsed_sandwich(p)
        assert e.alpha_hat == pytest.approx(coefficient, abs=1e-10)
        assert crve_group(e, small_sample=False).value == pytest.approx(sandwich, rel=1e-10, abs=1e-12)
        assert crve_group(e).value == pytest.approx(sandwich * N / (N - 1), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("s", [0.1, 3.0, -2.0])
def test_variances_scale_with_the_square_of_the_outcomes(random_panel, s):
    p = random_panel()
    scaled = p.with_outcomes(s * p.outcomes)
    assert crve_group(twfe(scaled)).value == pytest.approx(s ** 2 * crve_group(twfe(p)).value, rel=1e-12)
    assert hc_robust(scaled).value == pytest.approx(s ** 2 * hc_robust(p).value, rel=1e-10)
    assert twoway_cgm(scaled).raw_value == pytest.approx(s ** 2 * twoway_cgm(p).raw_value, rel=1e-10)


def test_crve_ignores_fixed_effects_and_constant_effects(random_panel):
    p = random_panel(seed=4)
    rng = np.random.default_rng(4)
    effects = rng.normal(scale=5.0, size=(p.n_groups, 1)) + rng.normal(scale=5.0, size=(1, p.n_periods))
    moved = p.with_outcomes(p.outcomes + effects + 1.5 * p.treatment_matrix())
    assert crve_group(twfe(moved)).value == pytest.approx(crve_group(twfe(p)).value, rel=1e-9)
    assert hc_robust(moved).value == pytest.approx(hc_robust(p).value, rel=1e-9)
