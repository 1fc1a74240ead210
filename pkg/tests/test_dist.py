import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from IdrKit import (
    BivariateGaussianParams,
    bhAdjust,
    bivariateNormalDensity,
    chisqSurvivalEvenDf,
    normalCdf,
    normalQuantile,
    normalSf,
    t5Cdf,
    t5Quantile,
)
from IdrKit import __dist as dist
from IdrKit.__errors import DomainError


class TestNormal:
    def test_known_values(self):
        assert normalCdf(0.0) == pytest.approx(0.5)
        assert normalQuantile(0.975) == pytest.approx(1.959963984540054, rel=1e-12)
        assert normalSf(10.0) == pytest.approx(7.619853024160527e-24, rel=1e-9)

    def test_scalar_in_scalar_out(self):
        assert isinstance(normalCdf(1.0), float)
        assert isinstance(normalCdf(np.array([1.0, 2.0])), np.ndarray)

    def test_upper_quantile_tiny_p(self):
        assert dist.normalUpperQuantile(1e-20) == pytest.approx(stats.norm.isf(1e-20), rel=1e-10)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, np.nan])
    def test_quantile_domain(self, p):
        with pytest.raises(DomainError):
            normalQuantile(p)

    def test_log_pdf(self):
        assert dist.normalLogPdf(0.0) == pytest.approx(-0.5 * math.log(2.0 * math.pi))


class TestBivariateNormal:
    def test_origin_independent(self):
        assert bivariateNormalDensity(0.0, 0.0, BivariateGaussianParams()) == pytest.approx(1.0 / (2.0 * math.pi))

    def test_against_scipy(self):
        params = BivariateGaussianParams(mean=1.0, variance=2.0, rho=0.5)
        cov = 2.0 * np.array([[1.0, 0.5], [0.5, 1.0]])
        ref = stats.multivariate_normal(mean=[1.0, 1.0], cov=cov)
        pts = np.array([[0.0, 0.0], [1.5, 2.0], [-1.0, 3.0]])
        got = bivariateNormalDensity(pts[:, 0], pts[:, 1], params)
        np.testing.assert_allclose(got, ref.pdf(pts), rtol=1e-12)

    def test_symmetric_in_coordinates(self, rng):
        z1, z2 = rng.normal(size=(2, 100))
        a = dist.bivariateNormalLogDensity(z1, z2, 0.3, 1.2, 0.7)
        b = dist.bivariateNormalLogDensity(z2, z1, 0.3, 1.2, 0.7)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("rho", [1.0, -1.0, 1.5])
    def test_rho_must_be_inside(self, rho):
        with pytest.raises(ValidationError):
            BivariateGaussianParams(rho=rho)


class TestChiSquare:
    def test_df2_is_exponential(self):
        assert chisqSurvivalEvenDf(3.0, 2) == pytest.approx(math.exp(-1.5))

    def test_df4_closed_form(self):
        assert chisqSurvivalEvenDf(4.0, 4) == pytest.approx(3.0 * math.exp(-2.0))

    def test_against_scipy(self):
        x = np.linspace(0.0, 40.0, 81)
        np.testing.assert_allclose(chisqSurvivalEvenDf(x, 4), stats.chi2.sf(x, 4), rtol=1e-10, atol=1e-300)

    def test_zero_is_one(self):
        assert chisqSurvivalEvenDf(0.0, 4) == 1.0

    @pytest.mark.parametrize("df", [3, 0, -2, 2.5])
    def test_df_domain(self, df):
        with pytest.raises(DomainError):
            chisqSurvivalEvenDf(1.0, df)

    def test_negative_x(self):
        with pytest.raises(DomainError):
            chisqSurvivalEvenDf(-1.0, 2)


class TestStudentT5:
    def test_median(self):
        assert t5Cdf(0.0) == pytest.approx(0.5)

    def test_round_trip(self):
        p = np.linspace(0.001, 0.999, 999)
        np.testing.assert_allclose(t5Cdf(t5Quantile(p)), p, atol=1e-12)

    def test_against_scipy(self):
        assert t5Quantile(0.95) == pytest.approx(stats.t.ppf(0.95, 5), rel=1e-10)


class TestBenjaminiHochberg:
    def test_hand_computed(self):
        np.testing.assert_allclose(
            bhAdjust([0.01, 0.04, 0.03, 0.2]), [0.04, 0.04 * 4 / 3, 0.04 * 4 / 3, 0.2]
        )

    def test_monotone_in_p(self, rng):
        p = rng.uniform(size=500)
        q = bhAdjust(p)
        order = np.argsort(p)
        assert np.all(np.diff(q[order]) >= 0.0)
        assert np.all(q >= p)

    def test_empty(self):
        assert bhAdjust([]).size == 0

    def test_domain(self):
        with pytest.raises(DomainError):
            bhAdjust([0.5, 1.5])
