"""narrowPeak / BED ingestion, summit-centred width truncation and
cross-replicate pairing of overlapping peaks.

Coordinates are half-open [start, end); two peaks overlap when
min(end) - max(start) >= 1.
"""

import bisect
import math
import os
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from . import __errors as _e
from . import __log as _l
from . import __parallel as _p
from . import __utils as _u
from .__rank import ScoredPairSet

PeakFormat = Literal["narrowPeak", "bed-score"]
ScoreColumn = Literal["score", "signalValue", "pValue", "qValue"]
ScoreDirection = Literal["high-is-better", "low-is-better"]

DEFAULT_WIDTH = 40
DEFAULT_SCORE_COLUMN: ScoreColumn = "signalValue"
NARROWPEAK_COLUMNS = 10
BED_SCORE_COLUMNS = 4
# 0-based field positions
NARROWPEAK_SCORE_FIELDS: dict[str, int] = {"score": 4, "signalValue": 6, "pValue": 7, "qValue": 8}
NARROWPEAK_SUMMIT_FIELD = 9
BED_SCORE_FIELD = 3
MISSING_SUMMIT = -1
SKIPPED_PREFIXES = ("#", "track", "browser")


class Peak(BaseModel):
    chrom: str = Field(..., min_length=1, description="Chromosome name")
    start: int = Field(..., ge=0, description="0-based inclusive start")
    end: int = Field(..., description="Exclusive end")
    summitOffset: int | None = Field(None, description="Summit position relative to start")
    score: float = Field(..., description="Significance score")
    sourceLine: int = Field(0, ge=0, description="1-based line in the source file, 0 if synthetic")

    class Config:
        extra = "forbid"
        frozen = True

    @model_validator(mode="after")
    def _checkInterval(self) -> "Peak":
        if self.start >= self.end:
            raise ValueError(f"start {self.start} must be smaller than end {self.end}")
        if self.summitOffset is not None and not 0 <= self.summitOffset < self.width:
            raise ValueError(f"summit offset {self.summitOffset} outside [0, {self.width})")
        return self

    @property
    def width(self) -> int:
        return self.end - self.start

    @property
    def center(self) -> int:
        if self.summitOffset is not None:
            return self.start + self.summitOffset
        return (self.start + self.end) // 2


class PeakMatch(BaseModel):
    index1: int = Field(..., description="Position of the peak in replicate 1's list")
    index2: int = Field(..., description="Position of the peak in replicate 2's list")
    chrom: str = Field(..., description="Shared chromosome")
    start1: int = Field(..., description="Replicate 1 start")
    end1: int = Field(..., description="Replicate 1 end")
    start2: int = Field(..., description="Replicate 2 start")
    end2: int = Field(..., description="Replicate 2 end")
    score1: float = Field(..., description="Replicate 1 score")
    score2: float = Field(..., description="Replicate 2 score")

    class Config:
        extra = "forbid"
        frozen = True


class PairedPeaks(BaseModel):
    matches: list[PeakMatch] = Field(default_factory=list, description="One-to-one matches, by chrom then start")
    unmatched1: int = Field(0, ge=0, description="Replicate 1 peaks left unpaired")
    unmatched2: int = Field(0, ge=0, description="Replicate 2 peaks left unpaired")

    class Config:
        extra = "forbid"
        frozen = True

    @model_validator(mode="after")
    def _checkOneToOne(self) -> "PairedPeaks":
        if len({m.index1 for m in self.matches}) != len(self.matches) or len(
            {m.index2 for m in self.matches}
        ) != len(self.matches):
            raise ValueError("a peak appears in more than one match")
        return self

    def scoreColumns(self, direction: ScoreDirection = "high-is-better") -> tuple[np.ndarray, np.ndarray]:
        """Matched scores oriented so that higher means stronger evidence."""
        sign = -1.0 if direction == "low-is-better" else 1.0
        scores = np.array([(m.score1, m.score2) for m in self.matches], dtype=float).reshape(-1, 2)
        return sign * scores[:, 0], sign * scores[:, 1]

    def scoredPairs(self, direction: ScoreDirection = "high-is-better") -> ScoredPairSet:
        return ScoredPairSet.fromScores(*self.scoreColumns(direction))


def overlapLength(a: Peak, b: Peak) -> int:
    if a.chrom != b.chrom:
        return 0
    return max(0, min(a.end, b.end) - max(a.start, b.start))


def _dataLines(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineNo, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(SKIPPED_PREFIXES):
            continue
        yield lineNo, line.rstrip("\r\n").split("\t")


def _parseInt(fields: list[str], index: int, lineNo: int, path: str) -> int:
    try:
        return int(fields[index])
    except ValueError:
        raise _e.ParseError(lineNo, index + 1, f"expected an integer, got {fields[index]!r}", path) from None


def _parseScore(fields: list[str], index: int, lineNo: int, path: str) -> float:
    try:
        value = float(fields[index])
    except ValueError:
        raise _e.ParseError(lineNo, index + 1, f"expected a number, got {fields[index]!r}", path) from None
    if not math.isfinite(value):
        raise _e.ParseError(lineNo, index + 1, f"score must be finite, got {fields[index]!r}", path)
    return value


def parsePeakText(
    text: str,
    fmt: PeakFormat = "narrowPeak",
    scoreColumn: ScoreColumn = DEFAULT_SCORE_COLUMN,
    path: str = "",
) -> list[Peak]:
    if fmt == "narrowPeak":
        minColumns, scoreField = NARROWPEAK_COLUMNS, NARROWPEAK_SCORE_FIELDS[scoreColumn]
    else:
        minColumns, scoreField = BED_SCORE_COLUMNS, BED_SCORE_FIELD
    peaks: list[Peak] = []
    for lineNo, fields in _dataLines(text):
        if len(fields) < minColumns:
            raise _e.ParseError(lineNo, None, f"expected {minColumns} tab-separated columns, got {len(fields)}", path)
        start = _parseInt(fields, 1, lineNo, path)
        end = _parseInt(fields, 2, lineNo, path)
        if start < 0:
            raise _e.ParseError(lineNo, 2, f"start must be non-negative, got {start}", path)
        if start >= end:
            raise _e.ParseError(lineNo, 3, f"start {start} must be smaller than end {end}", path)
        summit = None
        if fmt == "narrowPeak":
            summit = _parseInt(fields, NARROWPEAK_SUMMIT_FIELD, lineNo, path)
            if summit == MISSING_SUMMIT:
                summit = None
            elif not 0 <= summit < end - start:
                raise _e.ParseError(
                    lineNo, NARROWPEAK_SUMMIT_FIELD + 1, f"summit {summit} outside [0, {end - start})", path
                )
        peaks.append(
            Peak(
                chrom=fields[0],
                start=start,
                end=end,
                summitOffset=summit,
                score=_parseScore(fields, scoreField, lineNo, path),
                sourceLine=lineNo,
            )
        )
    if not peaks:
        raise _e.EmptyFile(f"no peaks in {path or 'input'}")
    return peaks


def parsePeakFile(
    path: str | os.PathLike,
    fmt: PeakFormat = "narrowPeak",
    scoreColumn: ScoreColumn = DEFAULT_SCORE_COLUMN,
) -> list[Peak]:
    """Plain or gzipped narrowPeak / 4-column BED; `#`, track and browser lines are skipped."""
    peaks = parsePeakText(_u.readText(path), fmt, scoreColumn, str(path))
    _l.info(f"loaded {len(peaks)} peaks from {path}")
    return peaks


def truncateToWidth(peaks: list[Peak], width: int = DEFAULT_WIDTH) -> list[Peak]:
    """Re-centre peaks wider than `width` on their summit (or midpoint)."""
    if width <= 0:
        raise _e.DomainError(f"width must be positive, got {width}")
    out = []
    for peak in peaks:
        if peak.width <= width:
            out.append(peak)
            continue
        c = peak.center
        start = max(0, c - width // 2)
        end = c + width - width // 2
        out.append(
            peak.model_copy(
                update={
                    "start": start,
                    "end": end,
                    "summitOffset": None if peak.summitOffset is None else c - start,
                }
            )
        )
    return out


def _candidateEdges(
    rep1: list[tuple[int, Peak]], rep2: list[tuple[int, Peak]]
) -> list[tuple[int, int, int]]:
    """(overlap, i1, i2) for every overlapping pair on one chromosome."""
    ordered = sorted(rep2, key=lambda item: (item[1].start, item[0]))
    starts = [p.start for _, p in ordered]
    maxWidth = max(p.width for _, p in ordered)
    edges = []
    for i1, a in rep1:
        lo = bisect.bisect_right(starts, a.start - maxWidth)
        hi = bisect.bisect_left(starts, a.end)
        for i2, b in ordered[lo:hi]:
            ov = overlapLength(a, b)
            if ov >= 1:
                edges.append((ov, i1, i2))
    return edges


def _augment(root: int, adjacency: dict[int, list[int]], match1: dict[int, int], match2: dict[int, int]) -> bool:
    """Extend the matching along one alternating path from a free `root`."""
    parent: dict[int, int] = {}
    seen: set[int] = set()
    stack = [(root, iter(adjacency[root]))]
    while stack:
        u, neighbours = stack[-1]
        for v in neighbours:
            if v in seen:
                continue
            seen.add(v)
            parent[v] = u
            if v not in match2:
                while True:
                    u = parent[v]
                    previous = match1.get(u)
                    match1[u] = v
                    match2[v] = u
                    if previous is None:
                        return True
                    v = previous
            stack.append((match2[v], iter(adjacency[match2[v]])))
            break
        else:
            stack.pop()
    return False


def _pairChromosome(
    rep1: list[tuple[int, Peak]], rep2: list[tuple[int, Peak]]
) -> list[tuple[int, int]]:
    edges = _candidateEdges(rep1, rep2)
    if not edges:
        return []
    peak1 = dict(rep1)
    peak2 = dict(rep2)
    edges.sort(key=lambda e: (-e[0], peak1[e[1]].start, peak2[e[2]].start, e[1], e[2]))
    match1: dict[int, int] = {}
    match2: dict[int, int] = {}
    adjacency: dict[int, list[int]] = {}
    for _, i1, i2 in edges:
        adjacency.setdefault(i1, []).append(i2)
        if i1 not in match1 and i2 not in match2:
            match1[i1] = i2
            match2[i2] = i1
    # greedy picks stay matched; alternating paths only add pairs
    for i1 in sorted(adjacency, key=lambda i: (peak1[i].start, i)):
        if i1 not in match1:
            _augment(i1, adjacency, match1, match2)
    return list(match1.items())


def pairPeaks(rep1: list[Peak], rep2: list[Peak], threads: int = 1) -> PairedPeaks:
    """One-to-one matching of overlapping peaks across replicates.

    Greedy by descending overlap (ties by rep1 start, then rep2 start), then
    completed to maximum cardinality with augmenting paths.
    """
    byChrom1: dict[str, list[tuple[int, Peak]]] = {}
    byChrom2: dict[str, list[tuple[int, Peak]]] = {}
    for i, p in enumerate(rep1):
        byChrom1.setdefault(p.chrom, []).append((i, p))
    for i, p in enumerate(rep2):
        byChrom2.setdefault(p.chrom, []).append((i, p))
    chroms = sorted(set(byChrom1) & set(byChrom2))
    perChrom = _p.mapOrdered(lambda c: _pairChromosome(byChrom1[c], byChrom2[c]), chroms, threads)
    matches = [
        PeakMatch(
            index1=i1,
            index2=i2,
            chrom=rep1[i1].chrom,
            start1=rep1[i1].start,
            end1=rep1[i1].end,
            start2=rep2[i2].start,
            end2=rep2[i2].end,
            score1=rep1[i1].score,
            score2=rep2[i2].score,
        )
        for pairs in perChrom
        for i1, i2 in pairs
    ]
    matches.sort(key=lambda m: (m.chrom, m.start1, m.start2, m.index1))
    if rep1 and rep2:
        _l.info(
            f"paired {len(matches)} peaks: {len(matches) / len(rep1):.1%} of replicate 1, "
            f"{len(matches) / len(rep2):.1%} of replicate 2"
        )
    return PairedPeaks(
        matches=matches,
        unmatched1=len(rep1) - len(matches),
        unmatched2=len(rep2) - len(matches),
    )
