import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from IdrKit import (
    FitConfig,
    SimComponent,
    SimScenario,
    calibrationExperiment,
    parameterSummary,
    prototypeScores,
    rankScores,
    runReplicates,
    scenarioPreset,
    simulateDataset,
)
from IdrKit import __simulate as sim
from IdrKit.__errors import ConfigError, DomainError, UsageError

BUDGETS = (50, 100, 200, 500)
BASELINES = ("SingleReplicate", "Fisher", "Stouffer")


class TestScenarios:
    def test_s1(self):
        c = scenarioPreset("S1").reproducible()
        assert (c.pi, c.mu, c.rho, c.sigmaSq) == (0.65, 2.5, 0.84, 1.0)

    def test_s2_s3(self):
        s2 = scenarioPreset("S2").reproducible()
        assert (s2.pi, s2.rho, s2.mu) == (0.30, 0.40, 2.5)
        assert scenarioPreset("S3").reproducible().pi == 0.05

    def test_s4_reproducible_noise(self):
        s4 = scenarioPreset("S4")
        assert len(s4.components) == 3
        assert s4.components[0].pi == pytest.approx(0.28)
        assert (s4.components[1].pi, s4.components[1].mu) == (0.65, 3.0)
        assert (s4.components[2].pi, s4.components[2].rho, s4.components[2].mu) == (0.07, 0.64, 0.0)

    def test_unknown_preset(self):
        with pytest.raises(UsageError):
            scenarioPreset("S9")

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            SimScenario(components=[SimComponent(pi=0.5, mu=0.0, rho=0.0), SimComponent(pi=0.6, mu=2.0, rho=0.5)])

    def test_first_component_is_noise(self):
        with pytest.raises(ValidationError):
            SimScenario(components=[SimComponent(pi=0.5, mu=1.0, rho=0.0), SimComponent(pi=0.5, mu=2.0, rho=0.5)])

    def test_rho_range(self):
        with pytest.raises(ValidationError):
            SimComponent(pi=0.5, mu=2.0, rho=1.0)

    def test_load_scenario(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(scenarioPreset("S2", n=500).model_dump_json(), encoding="utf-8")
        assert sim.loadScenario(path) == scenarioPreset("S2", n=500)
        path.write_text('{"components": []}', encoding="utf-8")
        with pytest.raises(ConfigError):
            sim.loadScenario(path)


class TestSimulateDataset:
    @pytest.fixture(scope="class")
    def s1(self):
        return simulateDataset(scenarioPreset("S1", n=10_000, seed=1))

    def test_deterministic(self):
        scenario = scenarioPreset("S2", n=300, seed=4)
        a, b = simulateDataset(scenario), simulateDataset(scenario)
        for field in ("pvalues1", "pvalues2", "truth", "z1", "z2"):
            np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
        assert not np.array_equal(simulateDataset(scenario, 1).z1, a.z1)

    def test_ranges(self, s1):
        for p in (s1.pvalues1, s1.pvalues2):
            assert np.all(p > 0.0) and np.all(p < 1.0)
        assert set(np.unique(s1.truth)) <= {0, 1}

    def test_reproducible_correlation(self, s1):
        keep = s1.truth == 1
        assert np.corrcoef(s1.z1[keep], s1.z2[keep])[0, 1] == pytest.approx(0.84, abs=0.02)

    def test_noise_uncorrelated(self, s1):
        keep = s1.truth == 0
        assert abs(np.corrcoef(s1.z1[keep], s1.z2[keep])[0, 1]) < 3.0 / math.sqrt(keep.sum())

    def test_marginal_transform_uniform(self, s1):
        g = scenarioPreset("S1").marginal().cdf(s1.z1)
        assert stats.kstest(g, "uniform").statistic < 0.02

    def test_pvalues_rank_faithful(self, s1):
        assert stats.spearmanr(-s1.pvalues1, s1.z1).statistic > 0.9999

    def test_component_moments(self):
        data = simulateDataset(scenarioPreset("S1", n=100_000, seed=2))
        keep = data.truth == 1
        z = np.stack([data.z1[keep], data.z2[keep]])
        assert z.mean(axis=1) == pytest.approx([2.5, 2.5], abs=0.02)
        np.testing.assert_allclose(np.cov(z), [[1.0, 0.84], [0.84, 1.0]], atol=0.03)
        assert np.corrcoef(z)[0, 1] == pytest.approx(0.84, abs=0.01)

    def test_s4_labels(self):
        data = simulateDataset(scenarioPreset("S4", n=5000, seed=3))
        assert set(np.unique(data.truth)) == {0, 1, 2}
        assert np.mean(data.truth == 2) == pytest.approx(0.07, abs=0.015)


class TestPrototypeScores:
    def test_perfect_agreement(self):
        ranked = rankScores(prototypeScores(200, 1.0))
        np.testing.assert_array_equal(ranked.ranks1, ranked.ranks2)

    def test_top_fraction_agrees(self):
        ranked = rankScores(prototypeScores(1000, 0.3, seed=5))
        top = ranked.ranks1 > 700
        np.testing.assert_array_equal(ranked.ranks1[top], ranked.ranks2[top])
        assert np.all(ranked.ranks2[~top] <= 700)

    def test_domain(self):
        with pytest.raises(DomainError):
            prototypeScores(100, 1.5)


class TestTradeoff:
    def test_ties_enter_together(self):
        incorrect, correct = sim.tradeoffCurve(
            np.array([0.1, 0.1, 0.2, 0.3]), np.array([True, False, True, False])
        )
        np.testing.assert_array_equal(incorrect, [1, 1, 2])
        np.testing.assert_array_equal(correct, [1, 2, 2])

    def test_budget_lookup(self):
        incorrect, correct = np.array([1, 1, 2]), np.array([1, 2, 2])
        assert sim.correctAtIncorrect(incorrect, correct, 0) == (0, 0)
        assert sim.correctAtIncorrect(incorrect, correct, 1) == (1, 2)
        assert sim.correctAtIncorrect(incorrect, correct, 50) == (2, 2)

    def test_full_selection_row(self, s1Dataset):
        qvalues = sim.methodQValues(s1Dataset.pvalues1, s1Dataset.pvalues2)
        rows = sim.tradeoffRows(0, np.linspace(0.0, 1.0, s1Dataset.n), qvalues, s1Dataset.isReproducible)
        full = [r for r in rows if r.budget == s1Dataset.n]
        assert len(full) == len(sim.METHODS)
        for r in full:
            assert r.correct == int(s1Dataset.isReproducible.sum())
            assert r.incorrect == s1Dataset.n - r.correct


class TestCalibration:
    def test_zero_level_selects_nothing(self, s1Dataset):
        qvalues = sim.methodQValues(s1Dataset.pvalues1, s1Dataset.pvalues2)
        masks = sim.selectionMasks(np.full(s1Dataset.n, 0.01), qvalues, 0.0)
        assert set(masks) == set(sim.METHODS)
        for mask in masks.values():
            assert not mask.any()
            assert sim.empiricalFdr(mask, s1Dataset.isReproducible) == 0.0

    def test_empirical_fdr(self):
        selected = np.array([True, True, True, False])
        correct = np.array([True, False, True, True])
        assert sim.empiricalFdr(selected, correct) == pytest.approx(1 / 3)

    def test_table_layout(self):
        scenario = scenarioPreset("S1", n=600, seed=9)
        table = calibrationExperiment(scenario, 2, FitConfig(nInits=2), levels=(0.0, 0.05, 0.1))
        frame = table.toFrame()
        assert len(frame) == len(sim.METHODS) * 3
        assert list(frame.columns) == ["method", "nominal", "empiricalFdr", "sdFdr", "meanSelected"]
        assert table.lookup("IDR", 0.0).empiricalFdr == 0.0
        assert table.lookup("Fisher", 0.05).meanSelected > 0


class TestParameterSummary:
    def test_rows(self):
        scenario = scenarioPreset("S1", n=800, seed=10)
        outcomes = runReplicates(scenario, 2, FitConfig(nInits=3), threads=2)
        rows = parameterSummary(outcomes, scenario)
        assert [r.parameter for r in rows] == ["pi1", "rho1", "mu1", "sigma1_sq"]
        assert rows[0].true == 0.65
        assert rows[0].mean == pytest.approx(0.65, abs=0.08)
        assert [o.replicate for o in outcomes] == [0, 1]


@pytest.mark.slow
class TestScenarioRecovery:
    @pytest.fixture(scope="class")
    def s1Outcomes(self):
        return runReplicates(scenarioPreset("S1", seed=1), 10, FitConfig(), threads=4)

    def test_s1_parameters(self, s1Outcomes):
        rows = {r.parameter: r for r in parameterSummary(s1Outcomes, scenarioPreset("S1", seed=1))}
        assert 0.63 <= rows["pi1"].mean <= 0.67
        assert 0.82 <= rows["rho1"].mean <= 0.86
        assert 2.40 <= rows["mu1"].mean <= 2.65
        assert 0.93 <= rows["sigma1_sq"].mean <= 1.08

    def test_s1_calibration(self, s1Outcomes):
        table = sim.calibrationFromOutcomes(s1Outcomes, "S1")
        for level in (0.01, 0.05, 0.1, 0.2):
            assert abs(table.lookup("IDR", level).empiricalFdr - level) <= 0.05

    def test_s1_dominance(self, s1Outcomes):
        table = sim.tradeoffFromOutcomes(s1Outcomes, "S1", BUDGETS)
        for budget in BUDGETS:
            for baseline in BASELINES:
                assert table.dominanceCount(budget, baseline) >= 8, (budget, baseline)

    def test_s2_s3_parameters(self):
        s2 = scenarioPreset("S2", seed=2)
        rows = {r.parameter: r for r in parameterSummary(runReplicates(s2, 10, threads=4), s2)}
        assert 0.35 <= rows["rho1"].mean <= 0.45
        assert 0.28 <= rows["pi1"].mean <= 0.32
        s3 = scenarioPreset("S3", seed=3)
        outcomes = runReplicates(s3, 10, threads=4)
        rows = {r.parameter: r for r in parameterSummary(outcomes, s3)}
        assert 0.035 <= rows["pi1"].mean <= 0.06
        assert rows["sigma1_sq"].mean < 1.0
        table = sim.tradeoffFromOutcomes(outcomes, "S3", BUDGETS)
        for budget in BUDGETS:
            for baseline in BASELINES:
                assert table.dominanceCount(budget, baseline) >= 8, (budget, baseline)

    def test_s4_anti_conservative(self):
        s4 = scenarioPreset("S4", seed=4)
        table = calibrationExperiment(s4, 10, threads=4, levels=(0.05,))
        assert table.lookup("IDR", 0.05).empiricalFdr > 0.05
