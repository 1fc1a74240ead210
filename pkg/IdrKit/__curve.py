"""Correspondence curves: the empirical survival-copula diagonal Ψₙ(t) and
its smoothed derivative Ψₙ′(t).

Ψₙ(t) is the fraction of signals ranked in the upper t-fraction of both
replicates. Perfect rank agreement gives Ψₙ(t) = t (Ψₙ′ = 1), independence
gives t² (Ψₙ′ = 2t); a drop of Ψₙ′ followed by a linear climb marks where
consistency breaks down.
"""

import math

import numpy as np
from pydantic import BaseModel, Field
from scipy.interpolate import BSpline, make_smoothing_spline
from scipy.linalg import eigvalsh, solveh_banded

from . import __errors as _e
from . import __log as _l
from .__rank import RankedPairSet

DEFAULT_GRID_SIZE = 100
DEFAULT_SPLINE_DF = 6.4
MIN_GRID_SIZE = 10
DF_TOLERANCE = 0.05
# ⌈(1-t)n⌉ is taken on (1-t)n minus this slack so representation error in t
# never bumps an exact integer up by one.
CEIL_SLACK = 1e-9
LOG_LAM_BOUNDS = (-10.0, 2.0)
LOG_LAM_EXPANSIONS = 5
MAX_BISECTIONS = 80


class CorrespondenceCurve(BaseModel):
    tGrid: np.ndarray = Field(..., description="Evaluation points in (0, 1]")
    psi: np.ndarray = Field(..., description="Ψₙ at tGrid")
    psiPrime: np.ndarray = Field(..., description="Derivative of the smoothing spline")
    splineDf: float = Field(..., description="Requested equivalent degrees of freedom")
    achievedDf: float = Field(..., description="Trace of the smoother at the chosen penalty")
    lam: float = Field(..., description="Smoothing penalty")
    n: int = Field(..., description="Number of signals")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True


def _checkFraction(x: float, name: str) -> None:
    if not (0.0 < x <= 1.0) or math.isnan(x):
        raise _e.DomainError(f"{name} must lie in (0, 1], got {x}")


def _upperThreshold(sortedRanks: np.ndarray, frac: float) -> int:
    """Rank value of the order statistic x_(⌈(1-frac)n⌉); 0 means -∞."""
    n = sortedRanks.shape[0]
    k = max(0, math.ceil((1.0 - frac) * n - CEIL_SLACK))
    return 0 if k == 0 else int(sortedRanks[k - 1])


def psiN(ranked: RankedPairSet, t: float, v: float | None = None) -> float:
    """Empirical survival copula Ψₙ(t, v); v defaults to t (the diagonal)."""
    v = t if v is None else v
    _checkFraction(t, "t")
    _checkFraction(v, "v")
    th1 = _upperThreshold(np.sort(ranked.ranks1), t)
    th2 = _upperThreshold(np.sort(ranked.ranks2), v)
    both = (ranked.ranks1 > th1) & (ranked.ranks2 > th2)
    return float(np.count_nonzero(both)) / ranked.n


def psiDiagonal(ranked: RankedPairSet, tGrid: np.ndarray) -> np.ndarray:
    sorted1 = np.sort(ranked.ranks1)
    sorted2 = np.sort(ranked.ranks2)
    out = np.empty(len(tGrid), dtype=float)
    for i, t in enumerate(tGrid):
        _checkFraction(float(t), "t")
        both = (ranked.ranks1 > _upperThreshold(sorted1, t)) & (
            ranked.ranks2 > _upperThreshold(sorted2, t)
        )
        out[i] = np.count_nonzero(both) / ranked.n
    return out


def penaltyEigenvalues(x: np.ndarray) -> np.ndarray:
    """Eigenvalues of K = Q R⁻¹ Qᵀ, the roughness matrix of natural cubic splines knotted at `x`.

    The smoother at penalty λ is (I + λK)⁻¹. K has exactly two zero
    eigenvalues (the straight lines); eigvalsh returns them first, and they
    are pinned to zero.
    """
    n = x.shape[0]
    h = np.diff(x)
    j = np.arange(n - 2)
    q = np.zeros((n, n - 2))
    q[j, j] = 1.0 / h[:-1]
    q[j + 1, j] = -1.0 / h[:-1] - 1.0 / h[1:]
    q[j + 2, j] = 1.0 / h[1:]
    banded = np.zeros((2, n - 2))
    banded[0, 1:] = h[1:-1] / 6.0
    banded[1] = (h[:-1] + h[1:]) / 3.0
    k = q @ solveh_banded(banded, q.T)
    nu = eigvalsh(0.5 * (k + k.T))
    nu[:2] = 0.0
    return np.clip(nu, 0.0, None)


def smootherTrace(x: np.ndarray, lam: float, eigenvalues: np.ndarray | None = None) -> float:
    """Equivalent degrees of freedom: tr (I + λK)⁻¹ = Σ 1/(1 + λν)."""
    nu = penaltyEigenvalues(x) if eigenvalues is None else eigenvalues
    return float(np.sum(1.0 / (1.0 + lam * nu)))


def fitSmoothingSpline(x: np.ndarray, y: np.ndarray, df: float) -> tuple[BSpline, float, float]:
    """Cubic smoothing spline whose equivalent df is within 0.05 of `df`.

    Bisection runs on log10(λ); the trace decreases monotonically in λ.
    Returns (spline, λ, achieved df).
    """
    nu = penaltyEigenvalues(x)
    lo, hi = LOG_LAM_BOUNDS
    for _ in range(LOG_LAM_EXPANSIONS):
        if smootherTrace(x, 10.0**lo, nu) >= df:
            break
        lo -= 2.0
    for _ in range(LOG_LAM_EXPANSIONS):
        if smootherTrace(x, 10.0**hi, nu) <= df:
            break
        hi += 2.0
    mid = 0.5 * (lo + hi)
    edf = smootherTrace(x, 10.0**mid, nu)
    for _ in range(MAX_BISECTIONS):
        if abs(edf - df) <= DF_TOLERANCE:
            break
        if edf > df:
            lo = mid
        else:
            hi = mid
        mid = 0.5 * (lo + hi)
        edf = smootherTrace(x, 10.0**mid, nu)
    else:
        _l.warning(f"smoothing spline df {edf:.3f} missed the target {df} by more than {DF_TOLERANCE}")
    lam = 10.0**mid
    _l.debug(f"smoothing spline: lambda={lam:.3e}, df={edf:.3f} (target {df})")
    return make_smoothing_spline(x, y, lam=lam), lam, edf


def correspondenceCurve(
    ranked: RankedPairSet,
    gridSize: int = DEFAULT_GRID_SIZE,
    splineDf: float = DEFAULT_SPLINE_DF,
) -> CorrespondenceCurve:
    if gridSize < MIN_GRID_SIZE:
        raise _e.DomainError(f"grid size must be at least {MIN_GRID_SIZE}, got {gridSize}")
    if not (2.0 <= splineDf <= gridSize / 2.0):
        raise _e.DomainError(
            f"spline df must lie in [2, {gridSize / 2.0}] for grid size {gridSize}, got {splineDf}"
        )
    tGrid = np.arange(1, gridSize + 1, dtype=float) / gridSize
    psi = psiDiagonal(ranked, tGrid)
    spline, lam, edf = fitSmoothingSpline(tGrid, psi, splineDf)
    psiPrime = spline.derivative()(tGrid)
    return CorrespondenceCurve(
        tGrid=tGrid,
        psi=psi,
        psiPrime=np.asarray(psiPrime, dtype=float),
        splineDf=float(splineDf),
        achievedDf=float(edf),
        lam=float(lam),
        n=ranked.n,
    )


def referencePsi(t, t0: float):
    """Population Ψ(t) when ranks agree on the top t0 and are independent below."""
    t = np.asarray(t, dtype=float)
    if t0 >= 1.0:
        return t.copy()
    tail = (t * t - 2.0 * t * t0 + t0) / (1.0 - t0)
    return np.where(t <= t0, t, tail)


def referencePsiPrime(t, t0: float):
    t = np.asarray(t, dtype=float)
    if t0 >= 1.0:
        return np.ones_like(t)
    return np.where(t <= t0, 1.0, 2.0 * (t - t0) / (1.0 - t0))


def transitionPoint(curve: CorrespondenceCurve, minDrop: float = 0.25) -> float | None:
    """Grid t where Ψₙ′ bottoms out after a plateau, or None.

    The minimum counts as a breakdown of consistency only when the mean of
    Ψₙ′ over the preceding grid points exceeds it by at least `minDrop`.
    """
    i = int(np.argmin(curve.psiPrime))
    if i == 0:
        return None
    plateau = float(np.mean(curve.psiPrime[:i]))
    if plateau - float(curve.psiPrime[i]) < minDrop:
        return None
    return float(curve.tGrid[i])
