import numpy as np
import pandas as pd
import pytest

from IdrKit import rankScores, scenarioPreset, simulateDataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def s1Dataset():
    return simulateDataset(scenarioPreset("S1", n=1000, seed=3))


@pytest.fixture(scope="session")
def s1Ranked(s1Dataset):
    return rankScores(s1Dataset.scoredPairs())


@pytest.fixture(autouse=True)
def _isolatedEnvironment(monkeypatch):
    monkeypatch.delenv("IDRKIT_SEED", raising=False)
    monkeypatch.delenv("IDRKIT_CONFIG", raising=False)


@pytest.fixture
def writePairs(tmp_path):
    """Write score pairs as the TSV the CLI reads; returns the path."""

    def write(scores1, scores2, name="pairs.tsv", **extra):
        path = tmp_path / name
        frame = pd.DataFrame({"score1": scores1, "score2": scores2, **extra})
        frame.to_csv(path, sep="\t", index=False, float_format="%.17g")
        return path

    return write
