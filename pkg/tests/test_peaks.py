import functools
import gzip

import numpy as np
import pytest
from pydantic import ValidationError

from IdrKit import Peak, pairPeaks, parsePeakFile, parsePeakText, truncateToWidth
from IdrKit.__errors import DomainError, EmptyFile, ParseError

EXAMPLE = "chr1\t1000\t2000\tp1\t0\t.\t5.5\t3.2\t2.1\t400\n"


def _peak(start, end, chrom="chr1", score=1.0, summit=None):
    return Peak(chrom=chrom, start=start, end=end, score=score, summitOffset=summit)


def _bruteForceMaximum(rep1, rep2):
    """Size of the largest one-to-one overlap matching, by exhaustion."""
    adjacency = [
        [j for j, b in enumerate(rep2) if a.chrom == b.chrom and min(a.end, b.end) - max(a.start, b.start) >= 1]
        for a in rep1
    ]

    @functools.lru_cache(maxsize=None)
    def best(i, used):
        if i == len(rep1):
            return 0
        size = best(i + 1, used)
        for j in adjacency[i]:
            if not used & (1 << j):
                size = max(size, 1 + best(i + 1, used | (1 << j)))
        return size

    return best(0, 0)


class TestParse:
    def test_narrowpeak_example(self):
        (peak,) = parsePeakText(EXAMPLE)
        assert (peak.chrom, peak.start, peak.end, peak.summitOffset, peak.score) == ("chr1", 1000, 2000, 400, 5.5)
        assert peak.sourceLine == 1

    @pytest.mark.parametrize("column,expected", [("score", 0.0), ("pValue", 3.2), ("qValue", 2.1)])
    def test_score_column(self, column, expected):
        assert parsePeakText(EXAMPLE, scoreColumn=column)[0].score == expected

    def test_missing_summit(self):
        (peak,) = parsePeakText(EXAMPLE.replace("\t400", "\t-1"))
        assert peak.summitOffset is None

    def test_start_not_before_end(self):
        with pytest.raises(ParseError) as info:
            parsePeakText("chr1\t10\t10\tp\t0\t.\t1\t1\t1\t-1\n")
        assert info.value.line == 1
        assert info.value.column == 3

    def test_bad_integer_reports_line_and_column(self):
        text = "# comment\ntrack name=x\nchr1\t1x0\t200\tp\t0\t.\t1\t1\t1\t-1\n"
        with pytest.raises(ParseError) as info:
            parsePeakText(text)
        assert (info.value.line, info.value.column) == (3, 2)
        assert "line 3" in str(info.value)

    def test_too_few_columns(self):
        with pytest.raises(ParseError) as info:
            parsePeakText("chr1\t1\t2\n")
        assert info.value.column is None

    def test_summit_outside_peak(self):
        with pytest.raises(ParseError):
            parsePeakText(EXAMPLE.replace("\t400", "\t1000"))

    def test_non_finite_score(self):
        with pytest.raises(ParseError):
            parsePeakText(EXAMPLE.replace("5.5", "nan"))

    def test_empty(self):
        with pytest.raises(EmptyFile):
            parsePeakText("# nothing\nbrowser position chr1\n\n")

    def test_bed_score(self):
        (peak,) = parsePeakText("chr2\t5\t50\t7.25\n", fmt="bed-score")
        assert (peak.chrom, peak.start, peak.end, peak.score, peak.summitOffset) == ("chr2", 5, 50, 7.25, None)

    def test_gzip_file(self, tmp_path):
        path = tmp_path / "rep1.narrowPeak.gz"
        path.write_bytes(gzip.compress((EXAMPLE * 3).encode()))
        peaks = parsePeakFile(path)
        assert len(peaks) == 3
        assert [p.sourceLine for p in peaks] == [1, 2, 3]

    def test_peak_invariants(self):
        with pytest.raises(ValidationError):
            _peak(10, 5)
        with pytest.raises(ValidationError):
            _peak(10, 20, summit=10)


class TestTruncate:
    def test_summit_centred(self):
        (peak,) = truncateToWidth([_peak(1000, 2000, summit=400)], 40)
        assert (peak.start, peak.end, peak.summitOffset) == (1380, 1420, 20)

    def test_narrow_unchanged(self):
        original = _peak(100, 130)
        assert truncateToWidth([original], 40) == [original]

    def test_midpoint_without_summit(self):
        (peak,) = truncateToWidth([_peak(1000, 2000)], 40)
        assert (peak.start, peak.end, peak.summitOffset) == (1480, 1520, None)

    def test_clipped_at_zero(self):
        (peak,) = truncateToWidth([_peak(0, 100, summit=5)], 40)
        assert (peak.start, peak.end, peak.summitOffset) == (0, 25, 5)

    def test_odd_width(self):
        (peak,) = truncateToWidth([_peak(0, 100, summit=50)], 5)
        assert peak.width == 5
        assert peak.start <= 50 < peak.end

    def test_width_domain(self):
        with pytest.raises(DomainError):
            truncateToWidth([_peak(0, 10)], 0)


class TestPairPeaks:
    def test_one_base_overlap(self):
        paired = pairPeaks([_peak(100, 140)], [_peak(139, 179)])
        assert len(paired.matches) == 1

    def test_half_open_boundary(self):
        paired = pairPeaks([_peak(100, 140)], [_peak(140, 180)])
        assert paired.matches == []
        assert (paired.unmatched1, paired.unmatched2) == (1, 1)

    def test_prefers_larger_overlap(self):
        paired = pairPeaks([_peak(100, 140)], [_peak(130, 170), _peak(110, 150)])
        (match,) = paired.matches
        assert match.index2 == 1
        assert paired.unmatched2 == 1

    def test_chromosomes_kept_apart(self):
        paired = pairPeaks([_peak(100, 140, chrom="chr1")], [_peak(100, 140, chrom="chr2")])
        assert paired.matches == []

    def test_augmenting_completes_greedy(self):
        rep1 = [_peak(0, 40), _peak(50, 90)]
        rep2 = [_peak(10, 60), _peak(30, 45)]
        paired = pairPeaks(rep1, rep2)
        assert {(m.index1, m.index2) for m in paired.matches} == {(0, 1), (1, 0)}

    def test_scores_and_order(self):
        rep1 = [_peak(500, 540, chrom="chr2", score=2.0), _peak(100, 140, score=3.0), _peak(10, 50, score=4.0)]
        rep2 = [_peak(105, 145, score=30.0), _peak(15, 55, score=40.0), _peak(505, 545, chrom="chr2", score=20.0)]
        paired = pairPeaks(rep1, rep2)
        assert [(m.chrom, m.start1) for m in paired.matches] == [("chr1", 10), ("chr1", 100), ("chr2", 500)]
        assert [(m.score1, m.score2) for m in paired.matches] == [(4.0, 40.0), (3.0, 30.0), (2.0, 20.0)]
        pairs = paired.scoredPairs("low-is-better")
        np.testing.assert_array_equal(pairs.scores1, [-4.0, -3.0, -2.0])
        score1, score2 = paired.scoreColumns("low-is-better")
        np.testing.assert_array_equal(score1, pairs.scores1)
        np.testing.assert_array_equal(score2, pairs.scores2)

    def test_score_columns_without_matches(self):
        score1, score2 = pairPeaks([_peak(0, 40)], [_peak(100, 140)]).scoreColumns()
        assert score1.shape == score2.shape == (0,)

    def test_symmetric_on_tie_free_data(self):
        rep1 = [_peak(0, 40), _peak(100, 140), _peak(200, 240)]
        rep2 = [_peak(25, 65), _peak(90, 130), _peak(300, 340)]
        forward = {(m.index1, m.index2) for m in pairPeaks(rep1, rep2).matches}
        backward = {(m.index2, m.index1) for m in pairPeaks(rep2, rep1).matches}
        assert forward == backward == {(0, 0), (1, 1)}

    def test_matches_exhaustive_search(self, rng):
        for _ in range(150):
            k1, k2 = rng.integers(1, 7, size=2)
            rep1 = [_peak(int(s), int(s + w)) for s, w in zip(rng.integers(0, 200, k1), rng.integers(5, 60, k1))]
            rep2 = [_peak(int(s), int(s + w)) for s, w in zip(rng.integers(0, 200, k2), rng.integers(5, 60, k2))]
            paired = pairPeaks(rep1, rep2)
            assert len(paired.matches) == _bruteForceMaximum(rep1, rep2)
            assert len({m.index1 for m in paired.matches}) == len(paired.matches)
            assert len({m.index2 for m in paired.matches}) == len(paired.matches)
            assert len(paired.matches) + paired.unmatched1 == len(rep1)
            assert len(paired.matches) + paired.unmatched2 == len(rep2)
            for m in paired.matches:
                assert min(m.end1, m.end2) - max(m.start1, m.start2) >= 1

    def test_thread_independent(self, rng):
        rep1 = [_peak(int(s), int(s) + 40, chrom=f"chr{c}") for s, c in zip(rng.integers(0, 5000, 200), rng.integers(1, 5, 200))]
        rep2 = [_peak(int(s), int(s) + 40, chrom=f"chr{c}") for s, c in zip(rng.integers(0, 5000, 200), rng.integers(1, 5, 200))]
        assert pairPeaks(rep1, rep2) == pairPeaks(rep1, rep2, threads=4)
