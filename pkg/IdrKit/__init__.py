from . import __errors as errors
from . import __utils as _u
from .__cli import run
from .__combine import CombinedResult, fisherCombine, fisherStatistic, stoufferCombine, stoufferStatistic
from .__config import Settings
from .__config import load as loadSettings
from .__config import save as saveSettings
from .__copula import (
    FitConfig,
    FitResult,
    InitRanges,
    MixtureMarginal,
    PseudoData,
    Theta,
    computePseudoData,
    copulaLogLikelihood,
    eStep,
    emInner,
    fit,
    fitFromStart,
    logLikelihood,
    marginalMixtureCdf,
    marginalMixtureQuantile,
    maximizeCopulaLikelihood,
    mStep,
)
from .__curve import (
    CorrespondenceCurve,
    correspondenceCurve,
    psiN,
    referencePsi,
    referencePsiPrime,
    transitionPoint,
)
from .__dist import (
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
from .__idr import IdrTable, idrCurve, idrTable, likelihoodRatio, localIdr, selectAtIdr
from .__lrt import LrtResult, bootstrapLrt, fitOneComponent
from .__manifest import RunManifest
from .__peaks import Peak, PairedPeaks, PeakMatch, pairPeaks, parsePeakFile, parsePeakText, truncateToWidth
from .__rank import RankedPairSet, ScoredPairSet, rankScores
from .__simulate import (
    CalibrationTable,
    SimComponent,
    SimDataset,
    SimScenario,
    TradeoffTable,
    calibrationExperiment,
    discriminationExperiment,
    parameterSummary,
    prototypeScores,
    runReplicates,
    scenarioPreset,
    simulateDataset,
)

__version__ = _u.VERSION
