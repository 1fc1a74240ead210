"""One- versus two-component likelihood-ratio test with a parametric bootstrap.

Both models are compared through their copula log-likelihoods, so the single
Gaussian copula is the boundary case π1 → 1, μ1 = 0, σ1² = 1 of the mixture.
"""

import math

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.optimize import minimize_scalar

from . import __copula as _cm
from . import __dist as _d
from . import __errors as _e
from . import __log as _l
from . import __parallel as _p
from . import __utils as _u
from .__rank import RankedPairSet, ScoredPairSet, rankScores

MIN_SIGNALS = 50
RHO_BOUNDS = (-0.999, 0.999)
RHO_XATOL = 1e-8
MAX_RETRIES = 3
NEGATIVE_STAT_TOLERANCE = -0.1
DEFAULT_BOOTSTRAP = 100
_REDRAW_ERRORS = (_e.DegenerateComponent, _e.NumericalUnderflow, _e.EmptyInput)


class LrtResult(BaseModel):
    rhoNull: float = Field(..., description="Correlation of the one-component Gaussian copula")
    loglikNull: float = Field(..., description="Copula log-likelihood of the null fit")
    loglikAlt: float = Field(..., description="Copula log-likelihood of the mixture fit")
    twoLogLambda: float = Field(..., description="2 (loglikAlt - loglikNull)")
    thetaAlt: _cm.Theta = Field(..., description="Mixture estimate on the observed data")
    bootstrapStats: list[float] = Field(..., description="2logλ of each null draw; +inf when every retry failed")
    pValue: float = Field(..., gt=0.0, le=1.0, description="(#{stat_b >= observed} + 1) / (B + 1)")
    nBootstrap: int = Field(..., ge=1, description="Number of bootstrap draws B")
    nFailedDraws: int = Field(0, ge=0, description="Draws counted as +inf after exhausting retries")

    class Config:
        extra = "forbid"
        frozen = True

    @model_validator(mode="after")
    def _checkPValue(self) -> "LrtResult":
        if len(self.bootstrapStats) != self.nBootstrap:
            raise ValueError("one bootstrap statistic per draw expected")
        if not math.isclose(self.pValue, bootstrapPValue(self.twoLogLambda, self.bootstrapStats)):
            raise ValueError("p-value does not match the bootstrap statistics")
        return self


def bootstrapPValue(observed: float, stats: list[float]) -> float:
    exceed = sum(s >= observed for s in stats)
    return (exceed + 1) / (len(stats) + 1)


def gaussianCopulaLogLikelihood(z1: np.ndarray, z2: np.ndarray, rho: float) -> float:
    """Σ log h_ρ(z1, z2) - Σ log φ(z1) - Σ log φ(z2)."""
    joint = _d.bivariateNormalLogDensity(z1, z2, 0.0, 1.0, rho)
    return float(np.sum(joint) - np.sum(_d.normalLogPdf(z1)) - np.sum(_d.normalLogPdf(z2)))


def fitOneComponent(ranked: RankedPairSet) -> tuple[float, float]:
    """(ρ̂, copula log-likelihood) of the single Gaussian copula on z = Φ⁻¹(u)."""
    if ranked.n < MIN_SIGNALS:
        raise _e.DomainError(f"the one-component fit needs at least {MIN_SIGNALS} signals, got {ranked.n}")
    z1 = np.asarray(_d.normalQuantile(ranked.u1))
    z2 = np.asarray(_d.normalQuantile(ranked.u2))
    res = minimize_scalar(
        lambda rho: -gaussianCopulaLogLikelihood(z1, z2, rho),
        bounds=RHO_BOUNDS,
        method="bounded",
        options={"xatol": RHO_XATOL},
    )
    rho = float(res.x)
    return rho, gaussianCopulaLogLikelihood(z1, z2, rho)


def fitTwoComponent(
    ranked: RankedPairSet, fitConfig: _cm.FitConfig, threads: int = 1
) -> tuple[_cm.Theta, float]:
    result = _cm.fit(ranked, fitConfig, threads)
    return result.theta, result.loglik


def drawNullSample(rng: np.random.Generator, n: int, rho: float) -> ScoredPairSet:
    z1 = rng.standard_normal(n)
    z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    return ScoredPairSet.fromScores(z1, z2)


def bootstrapStatistic(
    n: int, rho: float, seed: int, draw: int, fitConfig: _cm.FitConfig
) -> float:
    """2logλ on one null draw; a failing fit is redrawn under the next sub-seed."""
    for attempt in range(MAX_RETRIES + 1):
        ranked = rankScores(drawNullSample(_u.childRng(seed, draw, attempt), n, rho))
        try:
            _, loglikNull = fitOneComponent(ranked)
            _, loglikAlt = fitTwoComponent(ranked, fitConfig)
        except _REDRAW_ERRORS as e:
            _l.warning(f"bootstrap draw {draw} attempt {attempt} failed: {e}")
            continue
        return 2.0 * (loglikAlt - loglikNull)
    _l.warning(f"bootstrap draw {draw} failed {MAX_RETRIES + 1} times; counted as +inf")
    return math.inf


def bootstrapLrt(
    ranked: RankedPairSet,
    nBootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    fitConfig: _cm.FitConfig | None = None,
    threads: int = 1,
) -> LrtResult:
    if nBootstrap < 1:
        raise _e.DomainError(f"need at least one bootstrap draw, got {nBootstrap}")
    fitConfig = fitConfig or _cm.FitConfig()
    rhoNull, loglikNull = fitOneComponent(ranked)
    thetaAlt, loglikAlt = fitTwoComponent(ranked, fitConfig, threads)
    observed = 2.0 * (loglikAlt - loglikNull)
    if observed < NEGATIVE_STAT_TOLERANCE:
        _l.warning(f"2logλ = {observed:.4g} is negative; the mixture fit fell short of the null")
    _l.info(f"observed 2logλ = {observed:.6g} (rho_null = {rhoNull:.4f}); drawing {nBootstrap} null samples")
    stats = _p.mapOrdered(
        lambda b: bootstrapStatistic(ranked.n, rhoNull, seed, b, fitConfig),
        range(nBootstrap),
        threads,
    )
    return LrtResult(
        rhoNull=rhoNull,
        loglikNull=loglikNull,
        loglikAlt=loglikAlt,
        twoLogLambda=observed,
        thetaAlt=thetaAlt,
        bootstrapStats=stats,
        pValue=bootstrapPValue(observed, stats),
        nBootstrap=nBootstrap,
        nFailedDraws=sum(math.isinf(s) for s in stats),
    )
