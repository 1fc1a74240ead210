"""Synthetic replicate experiments and the comparison against p-value combination.

A signal draws its component k, a latent value Z ~ N(μ_k, ρ_k σ_k²) and one
noisy copy per replicate Z_j = Z + ε_j with ε_j ~ N(0, (1 - ρ_k) σ_k²), so
corr(Z_1, Z_2 | k) = ρ_k and Z_j | k ~ N(μ_k, σ_k²). Each Z_j is pushed
through the scenario's marginal mixture CDF, then the t₅ quantile, and scored
with a one-sided z-test p-value: rank-faithful but deliberately miscalibrated.
"""

import math
import os
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, model_validator

from . import __combine as _c
from . import __copula as _cm
from . import __dist as _d
from . import __errors as _e
from . import __idr as _i
from . import __log as _l
from . import __parallel as _p
from . import __utils as _u
from .__rank import ScoredPairSet, rankScores

PresetName = Literal["S1", "S2", "S3", "S4"]
PRESET_NAMES: tuple[PresetName, ...] = ("S1", "S2", "S3", "S4")
REPRODUCIBLE_LABEL = 1
DEFAULT_N = 10000
DEFAULT_REPS = 10
DEFAULT_LEVELS = tuple(round(0.005 * k, 3) for k in range(1, 41))
DEFAULT_BUDGETS = (0, 5, 10, 20, 50, 100, 200, 300, 500, 750, 1000, 1500, 2000, 3000, 5000)
METHODS = ("IDR", "SingleReplicate", "Fisher", "Stouffer")
WEIGHT_SUM_TOLERANCE = 1e-9
P_FLOOR = np.finfo(float).tiny
P_CEIL = 1.0 - np.finfo(float).epsneg
G_EPS = 1e-15


class SimComponent(BaseModel):
    pi: float = Field(..., gt=0.0, lt=1.0, description="Mixing proportion")
    mu: float = Field(..., description="Latent mean")
    rho: float = Field(..., ge=0.0, lt=1.0, description="Correlation between replicates")
    sigmaSq: float = Field(1.0, gt=0.0, description="Latent variance")

    class Config:
        extra = "forbid"
        frozen = True


class SimScenario(BaseModel):
    """Component 0 is the irreproducible noise N(0, 1) with ρ = 0."""

    components: list[SimComponent] = Field(..., min_length=2, description="Mixture components")
    n: int = Field(DEFAULT_N, ge=2, description="Signals per dataset")
    seed: int = Field(0, ge=0, description="Base seed; replicate r uses (seed, r)")
    label: str = Field("custom", description="Scenario name")

    class Config:
        extra = "forbid"
        frozen = True

    @model_validator(mode="after")
    def _checkComponents(self) -> "SimScenario":
        total = sum(c.pi for c in self.components)
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"component proportions sum to {total}, not 1")
        null = self.components[0]
        if null.mu != 0.0 or null.rho != 0.0 or null.sigmaSq != 1.0:
            raise ValueError("component 0 must be the N(0, 1), rho = 0 noise component")
        return self

    def marginal(self) -> _cm.MixtureMarginal:
        return _cm.MixtureMarginal(
            weights=tuple(c.pi for c in self.components),
            means=tuple(c.mu for c in self.components),
            sds=tuple(math.sqrt(c.sigmaSq) for c in self.components),
        )

    def reproducible(self) -> SimComponent:
        return self.components[REPRODUCIBLE_LABEL]


class SimDataset(BaseModel):
    pvalues1: np.ndarray = Field(..., description="Replicate 1 one-sided p-values")
    pvalues2: np.ndarray = Field(..., description="Replicate 2 one-sided p-values")
    truth: np.ndarray = Field(..., description="Component label of every signal")
    z1: np.ndarray = Field(..., description="Latent replicate 1 values")
    z2: np.ndarray = Field(..., description="Latent replicate 2 values")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True

    @property
    def n(self) -> int:
        return int(self.truth.shape[0])

    @property
    def isReproducible(self) -> np.ndarray:
        return self.truth == REPRODUCIBLE_LABEL

    def scoredPairs(self) -> ScoredPairSet:
        """Scores for the fitting engine: -p, so higher means stronger."""
        return ScoredPairSet.fromScores(-self.pvalues1, -self.pvalues2)


def scenarioPreset(name: PresetName, n: int = DEFAULT_N, seed: int = 0) -> SimScenario:
    if name == "S1":
        comps = [(0.35, 0.0, 0.0), (0.65, 2.5, 0.84)]
    elif name == "S2":
        comps = [(0.70, 0.0, 0.0), (0.30, 2.5, 0.40)]
    elif name == "S3":
        comps = [(0.95, 0.0, 0.0), (0.05, 2.5, 0.84)]
    elif name == "S4":
        comps = [(0.28, 0.0, 0.0), (0.65, 3.0, 0.84), (0.07, 0.0, 0.64)]
    else:
        raise _e.UsageError(f"unknown scenario {name!r}; expected one of {', '.join(PRESET_NAMES)}")
    return SimScenario(
        components=[SimComponent(pi=pi, mu=mu, rho=rho, sigmaSq=1.0) for pi, mu, rho in comps],
        n=n,
        seed=seed,
        label=name,
    )


def loadScenario(path: str | os.PathLike) -> SimScenario:
    try:
        return SimScenario.model_validate_json(_u.readText(path))
    except ValidationError as e:
        raise _e.ConfigError(f"invalid scenario file {path}: {e}") from e


def simulateDataset(scenario: SimScenario, replicate: int = 0) -> SimDataset:
    rng = _u.childRng(scenario.seed, replicate)
    n = scenario.n
    weights = np.array([c.pi for c in scenario.components])
    means = np.array([c.mu for c in scenario.components])
    rhos = np.array([c.rho for c in scenario.components])
    variances = np.array([c.sigmaSq for c in scenario.components])
    truth = rng.choice(len(weights), size=n, p=weights / weights.sum())
    tau = np.sqrt(rhos * variances)[truth]
    omega = np.sqrt((1.0 - rhos) * variances)[truth]
    latent = means[truth] + tau * rng.standard_normal(n)
    z1 = latent + omega * rng.standard_normal(n)
    z2 = latent + omega * rng.standard_normal(n)
    marginal = scenario.marginal()

    def toPValue(z: np.ndarray) -> np.ndarray:
        g = np.clip(marginal.cdf(z), G_EPS, 1.0 - G_EPS)
        return np.clip(_d.normalSf(_d.t5Quantile(g)), P_FLOOR, P_CEIL)

    return SimDataset(pvalues1=toPValue(z1), pvalues2=toPValue(z2), truth=truth, z1=z1, z2=z2)


def prototypeScores(n: int, t0: float, seed: int = 0) -> ScoredPairSet:
    """Ranks identical on the top round(t0·n) signals, independent below.

    t0 = 1 is perfect agreement, t0 = 0 full independence.
    """
    if not 0.0 <= t0 <= 1.0:
        raise _e.DomainError(f"t0 must lie in [0, 1], got {t0}")
    rng = _u.childRng(seed)
    top = int(round(t0 * n))
    rest = n - top
    head = np.arange(n, rest, -1, dtype=float)
    s1 = np.concatenate([head, rng.permutation(rest) + 1.0])
    s2 = np.concatenate([head, rng.permutation(rest) + 1.0])
    return ScoredPairSet.fromScores(s1, s2)


class ReplicateOutcome(BaseModel):
    replicate: int = Field(..., description="Replicate index")
    dataset: SimDataset = Field(..., description="Simulated data")
    fit: _cm.FitResult = Field(..., description="Copula mixture fit on -p scores")
    localIdr: np.ndarray = Field(..., description="Local idr per signal")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True


def runReplicate(scenario: SimScenario, replicate: int, fitConfig: _cm.FitConfig) -> ReplicateOutcome:
    dataset = simulateDataset(scenario, replicate)
    ranked = rankScores(dataset.scoredPairs())
    result = _cm.fit(ranked, fitConfig)
    _l.info(f"{scenario.label} replicate {replicate}: theta={result.theta}, converged={result.converged}")
    return ReplicateOutcome(
        replicate=replicate,
        dataset=dataset,
        fit=result,
        localIdr=_i.localIdr(ranked, result.theta),
    )


def runReplicates(
    scenario: SimScenario,
    nReps: int = DEFAULT_REPS,
    fitConfig: _cm.FitConfig | None = None,
    threads: int = 1,
) -> list[ReplicateOutcome]:
    if nReps < 1:
        raise _e.DomainError(f"need at least one replicate, got {nReps}")
    fitConfig = fitConfig or _cm.FitConfig()
    return _p.mapOrdered(lambda r: runReplicate(scenario, r, fitConfig), range(nReps), threads)


def methodQValues(p1: np.ndarray, p2: np.ndarray) -> dict[str, np.ndarray]:
    """BH-adjusted significance of the three baselines; smaller is stronger."""
    return {
        "SingleReplicate": _d.bhAdjust(p1),
        "Fisher": _d.bhAdjust(_c.fisherStatistic(p1, p2)[1]),
        "Stouffer": _d.bhAdjust(_c.stoufferStatistic(p1, p2)[1]),
    }


def selectionMasks(localIdr: np.ndarray, qvalues: dict[str, np.ndarray], level: float) -> dict[str, np.ndarray]:
    """Signals each method calls at nominal `level` (IDR or BH level)."""
    n = localIdr.shape[0]
    masks: dict[str, np.ndarray] = {}
    idrMask = np.zeros(n, dtype=bool)
    if level > 0.0:
        table = _i.idrTableFromLocalIdr(localIdr, np.zeros(n), np.zeros(n))
        idrMask[table.index[: _i.selectAtIdr(table, level)]] = True
    masks["IDR"] = idrMask
    for method, q in qvalues.items():
        masks[method] = q <= level if level > 0.0 else np.zeros(n, dtype=bool)
    return masks


def empiricalFdr(selected: np.ndarray, isCorrect: np.ndarray) -> float:
    count = int(np.count_nonzero(selected))
    if count == 0:
        return 0.0
    return float(np.count_nonzero(selected & ~isCorrect)) / count


class CalibrationRow(BaseModel):
    method: str = Field(..., description="Method name")
    nominal: float = Field(..., description="Nominal IDR (IDR) or BH level (baselines)")
    empiricalFdr: float = Field(..., description="Mean false fraction among selections")
    sdFdr: float = Field(..., description="Standard deviation across replicates")
    meanSelected: float = Field(..., description="Mean number of selections")

    class Config:
        extra = "forbid"


class CalibrationTable(BaseModel):
    label: str = Field(..., description="Scenario name")
    nReps: int = Field(..., description="Replicates averaged")
    rows: list[CalibrationRow] = Field(default_factory=list, description="One row per (method, level)")

    class Config:
        extra = "forbid"

    def toFrame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows])

    def lookup(self, method: str, nominal: float) -> CalibrationRow:
        for r in self.rows:
            if r.method == method and math.isclose(r.nominal, nominal):
                return r
        raise KeyError((method, nominal))


def calibrationFromOutcomes(
    outcomes: list[ReplicateOutcome], label: str, levels=DEFAULT_LEVELS
) -> CalibrationTable:
    fdr: dict[tuple[str, float], list[float]] = {}
    selected: dict[tuple[str, float], list[int]] = {}
    for o in outcomes:
        qvalues = methodQValues(o.dataset.pvalues1, o.dataset.pvalues2)
        isCorrect = o.dataset.isReproducible
        for level in levels:
            for method, mask in selectionMasks(o.localIdr, qvalues, float(level)).items():
                fdr.setdefault((method, float(level)), []).append(empiricalFdr(mask, isCorrect))
                selected.setdefault((method, float(level)), []).append(int(mask.sum()))
    rows = [
        CalibrationRow(
            method=method,
            nominal=level,
            empiricalFdr=float(np.mean(fdr[(method, level)])),
            sdFdr=float(np.std(fdr[(method, level)])),
            meanSelected=float(np.mean(selected[(method, level)])),
        )
        for method in METHODS
        for level in map(float, levels)
    ]
    return CalibrationTable(label=label, nReps=len(outcomes), rows=rows)


def calibrationExperiment(
    scenario: SimScenario,
    nReps: int = DEFAULT_REPS,
    fitConfig: _cm.FitConfig | None = None,
    levels=DEFAULT_LEVELS,
    threads: int = 1,
) -> CalibrationTable:
    outcomes = runReplicates(scenario, nReps, fitConfig, threads)
    return calibrationFromOutcomes(outcomes, scenario.label, levels)


def tradeoffCurve(score: np.ndarray, isCorrect: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(incorrect, correct) calls at every threshold `score <= c`, c over distinct scores.

    Tied scores enter together, as a threshold cannot split them.
    """
    order = np.argsort(score, kind="stable")
    sortedScore = score[order]
    correct = np.cumsum(isCorrect[order])
    incorrect = np.arange(1, score.shape[0] + 1) - correct
    ends = np.flatnonzero(np.append(sortedScore[1:] != sortedScore[:-1], True))
    return incorrect[ends], correct[ends]


def correctAtIncorrect(incorrect: np.ndarray, correct: np.ndarray, budget: int) -> tuple[int, int]:
    """Largest threshold whose incorrect calls stay within `budget`."""
    i = int(np.searchsorted(incorrect, budget, side="right")) - 1
    if i < 0:
        return 0, 0
    return int(incorrect[i]), int(correct[i])


class TradeoffRow(BaseModel):
    replicate: int = Field(..., description="Replicate index")
    method: str = Field(..., description="Method name")
    budget: int = Field(..., description="Allowed incorrect calls")
    incorrect: int = Field(..., description="Incorrect calls at the chosen threshold")
    correct: int = Field(..., description="Correct calls at the chosen threshold")

    class Config:
        extra = "forbid"


class TradeoffTable(BaseModel):
    label: str = Field(..., description="Scenario name")
    rows: list[TradeoffRow] = Field(default_factory=list, description="One row per (replicate, method, budget)")

    class Config:
        extra = "forbid"

    def toFrame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows])

    def correct(self, replicate: int, method: str, budget: int) -> int:
        for r in self.rows:
            if r.replicate == replicate and r.method == method and r.budget == budget:
                return r.correct
        raise KeyError((replicate, method, budget))

    def dominanceCount(self, budget: int, baseline: str, method: str = "IDR") -> int:
        """Replicates where `method` makes at least as many correct calls as `baseline`."""
        reps = sorted({r.replicate for r in self.rows})
        return sum(self.correct(r, method, budget) >= self.correct(r, baseline, budget) for r in reps)


def tradeoffRows(
    replicate: int,
    localIdr: np.ndarray,
    qvalues: dict[str, np.ndarray],
    isCorrect: np.ndarray,
    budgets=DEFAULT_BUDGETS,
) -> list[TradeoffRow]:
    n = isCorrect.shape[0]
    grid = sorted({int(b) for b in budgets} | {n})
    rows = []
    for method, score in {"IDR": localIdr, **qvalues}.items():
        incorrect, correct = tradeoffCurve(score, isCorrect)
        for budget in grid:
            inc, cor = correctAtIncorrect(incorrect, correct, budget)
            rows.append(TradeoffRow(replicate=replicate, method=method, budget=budget, incorrect=inc, correct=cor))
    return rows


def tradeoffFromOutcomes(
    outcomes: list[ReplicateOutcome], label: str, budgets=DEFAULT_BUDGETS
) -> TradeoffTable:
    rows: list[TradeoffRow] = []
    for o in outcomes:
        qvalues = methodQValues(o.dataset.pvalues1, o.dataset.pvalues2)
        rows.extend(tradeoffRows(o.replicate, o.localIdr, qvalues, o.dataset.isReproducible, budgets))
    return TradeoffTable(label=label, rows=rows)


def discriminationExperiment(
    scenario: SimScenario,
    nReps: int = DEFAULT_REPS,
    fitConfig: _cm.FitConfig | None = None,
    budgets=DEFAULT_BUDGETS,
    threads: int = 1,
) -> TradeoffTable:
    outcomes = runReplicates(scenario, nReps, fitConfig, threads)
    return tradeoffFromOutcomes(outcomes, scenario.label, budgets)


class ParameterRow(BaseModel):
    parameter: str = Field(..., description="pi1, rho1, mu1 or sigma1_sq")
    true: float = Field(..., description="Simulation value")
    mean: float = Field(..., description="Mean estimate across replicates")
    sd: float = Field(..., description="Standard deviation across replicates")

    class Config:
        extra = "forbid"


def parameterSummary(outcomes: list[ReplicateOutcome], scenario: SimScenario) -> list[ParameterRow]:
    truth = scenario.reproducible()
    columns = {
        "pi1": (truth.pi, [o.fit.theta.pi1 for o in outcomes]),
        "rho1": (truth.rho, [o.fit.theta.rho1 for o in outcomes]),
        "mu1": (truth.mu, [o.fit.theta.mu1 for o in outcomes]),
        "sigma1_sq": (truth.sigmaSq, [o.fit.theta.sigma1Sq for o in outcomes]),
    }
    return [
        ParameterRow(parameter=name, true=true, mean=float(np.mean(values)), sd=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0)
        for name, (true, values) in columns.items()
    ]
