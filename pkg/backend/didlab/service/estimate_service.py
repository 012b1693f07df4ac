from typing import Any, Dict, Union

from ..econometrics import compute_variance, estimate, t_test
from ..errors import ErrorCode, LabError
from ..model import EstimatorTag, PanelData, ReferenceDistribution, VarianceMethod


def estimate_and_test(
    p: PanelData,
    estimator: Union[EstimatorTag, str] = EstimatorTag.TWFE,
    variance_method: Union[VarianceMethod, str] = VarianceMethod.CRVE_GROUP,
    level: float = 0.05,
    reference: Union[ReferenceDistribution, str] = ReferenceDistribution.STUDENT_T,
    small_sample: bool = True,
    cluster_level: bool = False,
    **options: Any,
) -> Dict[str, Any]:
    """Point estimate, variance and t-test of one panel as a JSON-ready dict."""
    tag = EstimatorTag(estimator)
    if tag == EstimatorTag.TWFE and not p.is_uniform:
        options.setdefault("regression", True)
    e = estimate(p, tag, **options)
    if cluster_level and p.clusters is None:
        raise LabError(ErrorCode.SCHEMA_ERROR, "cluster-level variance needs a cluster column")
    clusters = p.clusters if cluster_level else None
    v = compute_variance(variance_method, e, p, small_sample=small_sample, clusters=clusters)
    test = t_test(e.alpha_hat, v, level, reference)
    return {
        "estimator": tag.value,
        "alpha_hat": e.alpha_hat,
        "n_treated": e.n_treated,
        "n_control": e.n_control,
        "comparisons": [c.model_dump(mode="json") for c in e.comparisons],
        "variance": v.model_dump(mode="json"),
        "test": test.model_dump(mode="json"),
    }
