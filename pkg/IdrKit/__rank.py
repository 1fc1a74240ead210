import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.stats import rankdata

from . import __errors as _e
from . import __log as _l

MIN_SIGNALS = 2


def _frozenArray(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


class ScoredPairSet(BaseModel):
    """n signals scored on two replicates; higher score = stronger evidence."""

    scores: np.ndarray = Field(..., description="(n, 2) array of finite scores")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def _checkScores(self) -> "ScoredPairSet":
        s = self.scores
        if s.ndim != 2 or s.shape[1] != 2:
            raise ValueError(f"scores must have shape (n, 2), got {s.shape}")
        if s.shape[0] < MIN_SIGNALS:
            raise ValueError(f"need at least {MIN_SIGNALS} signals, got {s.shape[0]}")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        return self

    @classmethod
    def fromScores(cls, scores1, scores2) -> "ScoredPairSet":
        s1 = np.asarray(scores1, dtype=float).ravel()
        s2 = np.asarray(scores2, dtype=float).ravel()
        if s1.shape != s2.shape:
            raise _e.DomainError(
                f"replicate score vectors differ in length: {s1.size} vs {s2.size}"
            )
        if s1.size < MIN_SIGNALS:
            raise _e.EmptyInput(f"need at least {MIN_SIGNALS} signals, got {s1.size}")
        stacked = np.column_stack([s1, s2])
        if not np.all(np.isfinite(stacked)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(stacked), axis=1))[0])
            raise _e.DomainError(f"signal {bad} has a non-finite score")
        return cls(scores=_frozenArray(stacked, float))

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    @property
    def scores1(self) -> np.ndarray:
        return self.scores[:, 0]

    @property
    def scores2(self) -> np.ndarray:
        return self.scores[:, 1]

    def swapped(self) -> "ScoredPairSet":
        return ScoredPairSet.fromScores(self.scores2, self.scores1)


class RankedPairSet(BaseModel):
    """Per-coordinate maximum ranks and rescaled empirical CDF values."""

    scores: np.ndarray = Field(..., description="(n, 2) source scores")
    ranks1: np.ndarray = Field(..., description="Ranks in 1..n, n = largest score")
    ranks2: np.ndarray = Field(..., description="Ranks in 1..n, n = largest score")
    u1: np.ndarray = Field(..., description="n/(n+1) · ECDF, coordinate 1")
    u2: np.ndarray = Field(..., description="n/(n+1) · ECDF, coordinate 2")
    tieFlags: np.ndarray = Field(..., description="Signal tied in either coordinate")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True

    @property
    def n(self) -> int:
        return int(self.ranks1.shape[0])

    @property
    def tieCount(self) -> int:
        return int(np.count_nonzero(self.tieFlags))


def _tied(values: np.ndarray) -> np.ndarray:
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    return counts[inverse] > 1


def rankScores(pairs: ScoredPairSet) -> RankedPairSet:
    """Rank each coordinate and rescale its ECDF by n/(n+1).

    F̂(x) = #{k: x_k <= x}/n, so tied scores share their maximum rank and
    one ECDF value; u = rank/(n+1) lies in (0, n/(n+1)].
    """
    n = pairs.n
    if n < MIN_SIGNALS:
        raise _e.EmptyInput(f"need at least {MIN_SIGNALS} signals, got {n}")
    ranks1 = rankdata(pairs.scores1, method="max").astype(np.int64)
    ranks2 = rankdata(pairs.scores2, method="max").astype(np.int64)
    tieFlags = _tied(pairs.scores1) | _tied(pairs.scores2)
    if tieFlags.any():
        _l.warning(
            f"{int(tieFlags.sum())} of {n} signals have tied scores; "
            "tied values share their maximum rank"
        )
    return RankedPairSet(
        scores=pairs.scores,
        ranks1=_frozenArray(ranks1, np.int64),
        ranks2=_frozenArray(ranks2, np.int64),
        u1=_frozenArray(ranks1 / (n + 1.0), float),
        u2=_frozenArray(ranks2 / (n + 1.0), float),
        tieFlags=_frozenArray(tieFlags, bool),
    )
