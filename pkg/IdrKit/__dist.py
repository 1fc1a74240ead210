"""Probability primitives shared by the fitting, simulation and combination code.

Scalars in, scalars out; arrays in, arrays out.
"""

import math

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import special as _sp
from statsmodels.stats.multitest import multipletests

from . import __errors as _e

T_DF = 5
LOG_2PI = math.log(2.0 * math.pi)


class BivariateGaussianParams(BaseModel):
    """Bivariate normal with a shared mean and variance on both coordinates."""

    mean: float = Field(0.0, description="Mean of both coordinates")
    variance: float = Field(1.0, gt=0.0, description="Variance of both coordinates")
    rho: float = Field(0.0, description="Correlation, strictly inside (-1, 1)")

    class Config:
        extra = "forbid"
        frozen = True

    @model_validator(mode="after")
    def _checkRho(self) -> "BivariateGaussianParams":
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        return self


def _out(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def normalCdf(z):
    arr = np.asarray(z, dtype=float)
    return _out(_sp.ndtr(arr), arr.ndim == 0)


def normalSf(z):
    """1 - Φ(z) without cancellation in the upper tail."""
    arr = np.asarray(z, dtype=float)
    return _out(_sp.ndtr(-arr), arr.ndim == 0)


def normalLogPdf(z):
    arr = np.asarray(z, dtype=float)
    return _out(-0.5 * arr * arr - 0.5 * LOG_2PI, arr.ndim == 0)


def _checkOpenUnit(p: np.ndarray, what: str) -> None:
    if not np.all((p > 0.0) & (p < 1.0)):
        bad = p[~((p > 0.0) & (p < 1.0))].ravel()[0]
        raise _e.DomainError(f"{what} requires probabilities in (0, 1), got {bad}")


def normalQuantile(p):
    arr = np.asarray(p, dtype=float)
    _checkOpenUnit(arr, "normalQuantile")
    return _out(_sp.ndtri(arr), arr.ndim == 0)


def normalUpperQuantile(p):
    """Φ⁻¹(1 - p), exact for tiny p."""
    arr = np.asarray(p, dtype=float)
    _checkOpenUnit(arr, "normalUpperQuantile")
    return _out(-_sp.ndtri(arr), arr.ndim == 0)


def bivariateNormalLogDensity(z1, z2, mean: float, variance: float, rho: float):
    """Log density of the shared-mean, shared-variance bivariate normal.

    The quadratic form is written symmetrically in (z1, z2) so swapping the
    coordinates gives bit-identical values.
    """
    a = np.asarray(z1, dtype=float) - mean
    b = np.asarray(z2, dtype=float) - mean
    oneMinusRhoSq = 1.0 - rho * rho
    quad = ((a * a + b * b) - 2.0 * rho * (a * b)) / (variance * oneMinusRhoSq)
    logNorm = LOG_2PI + math.log(variance) + 0.5 * math.log(oneMinusRhoSq)
    out = -logNorm - 0.5 * quad
    return _out(out, out.ndim == 0)


def bivariateNormalDensity(z1, z2, params: BivariateGaussianParams):
    out = np.exp(
        np.asarray(
            bivariateNormalLogDensity(z1, z2, params.mean, params.variance, params.rho)
        )
    )
    return _out(out, out.ndim == 0)


def chisqSurvivalEvenDf(x, df: int):
    """P(χ²_df > x) = e^{-x/2} Σ_{k<df/2} (x/2)^k / k!  for even df."""
    if int(df) != df or df <= 0 or int(df) % 2 != 0:
        raise _e.DomainError(f"df must be an even positive integer, got {df}")
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise _e.DomainError("chi-square survival requires x >= 0")
    half = arr / 2.0
    term = np.ones_like(half)
    total = np.ones_like(half)
    for k in range(1, int(df) // 2):
        term = term * half / k
        total = total + term
    out = np.exp(-half) * total
    return _out(out, arr.ndim == 0)


def t5Cdf(x):
    arr = np.asarray(x, dtype=float)
    return _out(_sp.stdtr(T_DF, arr), arr.ndim == 0)


def t5Quantile(p):
    arr = np.asarray(p, dtype=float)
    _checkOpenUnit(arr, "t5Quantile")
    return _out(_sp.stdtrit(T_DF, arr), arr.ndim == 0)


def bhAdjust(pvalues) -> np.ndarray:
    """Benjamini–Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(pvalues, dtype=float).ravel()
    if p.size == 0:
        return p
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise _e.DomainError("bhAdjust requires p-values in [0, 1]")
    return np.clip(multipletests(p, method="fdr_bh")[1], 0.0, 1.0)
