from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..errors import ErrorCode, LabError


class GapInputs(BaseModel):
    """Moments behind the variance gap: loading-mean gap, E[(grad lambda)'(grad lambda)] (or Omega), noise."""

    mu_gap: List[float]
    second_moment: List[List[float]]
    sigma_eps2_treated: float = Field(ge=0.0)
    sigma_eps2_control: float = Field(ge=0.0)
    c: float = Field(default=0.5, gt=0.0, lt=1.0)

    @field_validator("second_moment", mode="before")
    @classmethod
    def _matrix(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.size == 0:
            return []
        return np.atleast_2d(arr).tolist()

    @model_validator(mode="after")
    def _shapes(self) -> "GapInputs":
        n = len(self.mu_gap)
        m = self.moment_matrix
        if m.shape != (n, n):
            raise LabError(ErrorCode.DIM_MISMATCH, f"second_moment is {m.shape}, mu_gap has {n} entries")
        if n and np.linalg.eigvalsh((m + m.T) / 2).min() < -1e-10:
            raise LabError(ErrorCode.BAD_COV, "second_moment is not positive semi-definite")
        return self

    @property
    def gap(self) -> np.ndarray:
        return np.asarray(self.mu_gap, dtype=float)

    @property
    def moment_matrix(self) -> np.ndarray:
        n = len(self.mu_gap)
        if not self.second_moment:
            return np.zeros((n, n))
        return np.asarray(self.second_moment, dtype=float)


class DesignVariances(BaseModel):
    v_corr: float
    v_uncorr: float
    four_term_gap: float
    terms: Tuple[float, float, float, float]


class CurvePreset(BaseModel):
    """Grid of the normalized E[(grad X)^2] curve: every rho on even T up to ``T_max``."""

    rho_list: List[float] = Field(default_factory=lambda: [0.0, 0.3, 0.6, 0.9])
    T_max: int = Field(default=50, ge=2)
