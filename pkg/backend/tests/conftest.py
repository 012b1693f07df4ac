import os

os.environ.setdefault("DIDLAB_ENV", "testing")

import numpy as np
import pandas as pd
import pytest

from didlab.config import configure_logging, get_settings
from didlab.model import (
    ARSpec,
    FactorModelSpec,
    FixedAssignment,
    MicroPanel,
    PanelData,
)


@pytest.fixture(autouse=True)
def testing_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("DIDLAB_ENV", "testing")
    monkeypatch.setenv("DIDLAB_RUN_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    settings = get_settings()
    # handler is bound before capsys swaps stderr
    configure_logging(settings, force=True)
    yield settings
    get_settings.cache_clear()


@pytest.fixture
def two_by_two():
    """Two treated and two control groups over two periods; alpha_hat = 3 - 1 = 2."""
    return PanelData(
        outcomes=[[1.0, 4.0], [2.0, 5.0], [0.0, 1.0], [1.0, 2.0]],
        treated=[True, True, False, False],
        treat_start=1,
    )


@pytest.fixture
def random_panel():
    def make(n_groups=12, n_periods=6, t_star=3, n_treated=5, seed=0):
        rng = np.random.default_rng(seed)
        treated = np.arange(n_groups) < n_treated
        return PanelData(outcomes=rng.normal(size=(n_groups, n_periods)), treated=treated, treat_start=t_star)

    return make


@pytest.fixture
def staggered_panel():
    """Eight groups over six periods: cohorts adopting after periods 2 and 4, three never treated."""
    rng = np.random.default_rng(7)
    treated = np.array([True] * 5 + [False] * 3)
    starts = [2, 2, 2, 4, 4, 0, 0, 0]
    return PanelData(outcomes=rng.normal(size=(8, 6)), treated=treated, treat_start=starts)


@pytest.fixture
def no_factor_spec():
    return FactorModelSpec(assignment=FixedAssignment(n_treated=50))


@pytest.fixture
def scalar_factor_spec():
    """One AR(1) factor; treated groups load 1 on it, controls 0."""
    return FactorModelSpec(
        loading_mean_treated=[1.0],
        loading_mean_control=[0.0],
        factor_process=[ARSpec(rho=0.5, sigma_nu2=1.0)],
        assignment=FixedAssignment(n_treated=50),
    )


@pytest.fixture
def micro_panel():
    frame = {
        "unit": [1, 2, 3, 4, 5, 6, 7, 8],
        "group": ["a", "a", "a", "a", "b", "b", "b", "b"],
        "time": [1, 1, 2, 2, 1, 1, 2, 2],
        "outcome": [1.0, 3.0, 2.0, 4.0, 0.0, 10.0, 5.0, 5.0],
        "weight": [1.0, 1.0, 1.0, 3.0, 1.0, 0.0, 2.0, 2.0],
        "cluster": ["x", "x", "x", "x", "y", "y", "y", "y"],
    }
    return MicroPanel(frame=pd.DataFrame(frame))
