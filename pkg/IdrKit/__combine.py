"""Fisher and Stouffer combination of one-sided p-values from two replicates."""

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from . import __dist as _d
from . import __errors as _e

CombineMethod = Literal["Fisher", "Stouffer"]
N_REPLICATES = 2


class CombinedResult(BaseModel):
    statistic: float = Field(..., description="Q for Fisher, S for Stouffer")
    combinedP: float = Field(..., ge=0.0, le=1.0, description="Combined p-value")
    method: CombineMethod = Field(..., description="Combination method")

    class Config:
        extra = "forbid"
        frozen = True


def fisherStatistic(p1, p2) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Q = -2 Σ log p with its χ²₄ survival value."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    for p in (p1, p2):
        if np.any(np.isnan(p)) or np.any(p <= 0.0) or np.any(p > 1.0):
            raise _e.DomainError("Fisher's method requires p-values in (0, 1]")
    q = -2.0 * (np.log(p1) + np.log(p2))
    return q, np.asarray(_d.chisqSurvivalEvenDf(q, 2 * N_REPLICATES))


def stoufferStatistic(p1, p2) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised S = (Φ⁻¹(1-p1) + Φ⁻¹(1-p2))/√2 with 1 - Φ(S)."""
    s = (
        np.asarray(_d.normalUpperQuantile(p1)) + np.asarray(_d.normalUpperQuantile(p2))
    ) / math.sqrt(N_REPLICATES)
    return s, np.asarray(_d.normalSf(s))


def fisherCombine(p1: float, p2: float) -> CombinedResult:
    q, p = fisherStatistic(p1, p2)
    return CombinedResult(statistic=float(q), combinedP=float(p), method="Fisher")


def stoufferCombine(p1: float, p2: float) -> CombinedResult:
    s, p = stoufferStatistic(p1, p2)
    return CombinedResult(statistic=float(s), combinedP=float(p), method="Stouffer")
