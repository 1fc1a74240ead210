import numpy as np
from pydantic import BaseModel, Field, model_validator

from . import __copula as _cm
from . import __errors as _e
from .__rank import RankedPairSet

DEFAULT_IDR_THRESHOLD = 0.05


class IdrTable(BaseModel):
    """Signals in ascending local-idr order (ties by original index)."""

    index: np.ndarray = Field(..., description="Original signal index")
    score1: np.ndarray = Field(..., description="Replicate 1 score")
    score2: np.ndarray = Field(..., description="Replicate 2 score")
    localIdr: np.ndarray = Field(..., description="Posterior probability of irreproducibility")
    rankByIdr: np.ndarray = Field(..., description="1-based position in idr order")
    cumulativeIdr: np.ndarray = Field(..., description="Running mean of localIdr: the IDR of each prefix")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def _checkAligned(self) -> "IdrTable":
        sizes = {a.shape[0] for a in (self.index, self.score1, self.score2, self.localIdr, self.rankByIdr, self.cumulativeIdr)}
        if len(sizes) != 1:
            raise ValueError("idr table columns differ in length")
        return self

    @property
    def n(self) -> int:
        return int(self.index.shape[0])


def localIdr(ranked: RankedPairSet, theta: _cm.Theta) -> np.ndarray:
    """π0·h0 / (π0·h0 + π1·h1) at the pseudo-data for theta."""
    return _cm.eStep(_cm.computePseudoData(ranked, theta), theta).localIdr


def likelihoodRatio(ranked: RankedPairSet, theta: _cm.Theta) -> np.ndarray:
    """π0·h0 / (π1·h1); orders signals exactly as localIdr does."""
    a0, a1 = _cm.weightedLogDensities(_cm.computePseudoData(ranked, theta), theta)
    return np.exp(a0 - a1)


def idrTableFromLocalIdr(idr, scores1, scores2) -> IdrTable:
    idr = np.asarray(idr, dtype=float)
    if idr.ndim != 1 or idr.size == 0:
        raise _e.EmptyInput("idr table needs at least one signal")
    if np.any(np.isnan(idr)) or np.any(idr < 0.0) or np.any(idr > 1.0):
        raise _e.DomainError("local idr values must lie in [0, 1]")
    order = np.argsort(idr, kind="stable")
    sortedIdr = idr[order]
    running = np.cumsum(sortedIdr) / np.arange(1, idr.size + 1)
    # a running mean of ascending values never decreases; remove rounding dips
    running = np.maximum.accumulate(running)
    return IdrTable(
        index=order,
        score1=np.asarray(scores1, dtype=float)[order],
        score2=np.asarray(scores2, dtype=float)[order],
        localIdr=sortedIdr,
        rankByIdr=np.arange(1, idr.size + 1),
        cumulativeIdr=running,
    )


def idrTable(ranked: RankedPairSet, theta: _cm.Theta) -> IdrTable:
    return idrTableFromLocalIdr(
        localIdr(ranked, theta), ranked.scores[:, 0], ranked.scores[:, 1]
    )


def selectAtIdr(table: IdrTable, alpha: float = DEFAULT_IDR_THRESHOLD) -> int:
    """l = max{i : (1/i) Σ_{j<=i} idr_(j) <= alpha}, or 0."""
    if not 0.0 < alpha < 1.0:
        raise _e.DomainError(f"IDR threshold must lie in (0, 1), got {alpha}")
    return int(np.searchsorted(table.cumulativeIdr, alpha, side="right"))


def idrCurve(table: IdrTable) -> tuple[np.ndarray, np.ndarray]:
    """(number of signals selected, IDR of that selection) for every prefix."""
    return table.rankByIdr.copy(), table.cumulativeIdr.copy()
