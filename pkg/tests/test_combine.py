import math

import numpy as np
import pytest
from scipy import stats

from IdrKit import fisherCombine, fisherStatistic, stoufferCombine, stoufferStatistic
from IdrKit.__errors import DomainError


class TestFisher:
    def test_hand_computed(self):
        res = fisherCombine(0.05, 0.05)
        q = -4.0 * math.log(0.05)
        assert res.method == "Fisher"
        assert res.statistic == pytest.approx(q)
        assert res.combinedP == pytest.approx(math.exp(-q / 2.0) * (1.0 + q / 2.0))

    def test_ones(self):
        res = fisherCombine(1.0, 1.0)
        assert res.statistic == 0.0
        assert res.combinedP == 1.0

    def test_against_scipy(self, rng):
        p = rng.uniform(1e-6, 1.0, size=(50, 2))
        _, combined = fisherStatistic(p[:, 0], p[:, 1])
        expected = [stats.combine_pvalues(row, method="fisher")[1] for row in p]
        np.testing.assert_allclose(combined, expected, rtol=1e-9)

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5, math.nan])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            fisherCombine(p, 0.5)


class TestStouffer:
    def test_null_median(self):
        res = stoufferCombine(0.5, 0.5)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.combinedP == pytest.approx(0.5)

    def test_hand_computed(self):
        res = stoufferCombine(0.05, 0.05)
        assert res.statistic == pytest.approx(2.0 * 1.6448536269514722 / math.sqrt(2.0))
        assert res.combinedP == pytest.approx(0.01, rel=2e-3)

    def test_against_scipy(self, rng):
        p = rng.uniform(1e-6, 1.0 - 1e-6, size=(50, 2))
        _, combined = stoufferStatistic(p[:, 0], p[:, 1])
        expected = [stats.combine_pvalues(row, method="stouffer")[1] for row in p]
        np.testing.assert_allclose(combined, expected, rtol=1e-9)

    @pytest.mark.parametrize("p", [0.0, 1.0])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            stoufferCombine(p, 0.5)


class TestSymmetryAndMonotonicity:
    @pytest.mark.parametrize("combine", [fisherCombine, stoufferCombine])
    def test_symmetric(self, combine, rng):
        for p1, p2 in rng.uniform(1e-6, 1.0 - 1e-6, size=(25, 2)):
            assert combine(p1, p2).combinedP == pytest.approx(combine(p2, p1).combinedP, rel=1e-12)

    @pytest.mark.parametrize("statistic", [fisherStatistic, stoufferStatistic])
    def test_monotone_in_each_p(self, statistic):
        grid = np.linspace(0.01, 0.99, 99)
        for other in (0.001, 0.3, 0.9):
            _, alongFirst = statistic(grid, np.full_like(grid, other))
            _, alongSecond = statistic(np.full_like(grid, other), grid)
            assert np.all(np.diff(alongFirst) > 0.0)
            assert np.all(np.diff(alongSecond) > 0.0)


class TestNullDistribution:
    def test_fisher_statistic_is_chi2_4(self):
        p = np.random.default_rng(11).uniform(size=(5000, 2))
        q, _ = fisherStatistic(p[:, 0], p[:, 1])
        assert stats.kstest(q, stats.chi2(4).cdf).pvalue > 0.01

    def test_stouffer_statistic_is_standard_normal(self):
        p = np.random.default_rng(12).uniform(size=(5000, 2))
        z, _ = stoufferStatistic(p[:, 0], p[:, 1])
        assert stats.kstest(z, stats.norm.cdf).pvalue > 0.01
