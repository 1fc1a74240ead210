"""Two-component Gaussian copula mixture and its pseudo-data EM fit.

Latent pairs (z1, z2) come from π0·h0 + π1·h1 where h0 is the standard
bivariate normal (irreproducible) and h1 has shared mean μ1, variance σ1²
and correlation ρ1 (reproducible). Observed scores only enter through their
ranks: u = rank/(n+1) is mapped back to the latent scale with the marginal
mixture quantile G⁻¹(u; θ), and θ is refit on those pseudo-data.

The pseudo-data EM fixed point is not a maximizer of the copula likelihood,
so each start is scored on the copula log-likelihood: the outer loop stops
once it no longer rises, the best θ along the path is kept, and the winning
start is refined by maximizing the copula log-likelihood directly.
"""

import math
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import Bounds, minimize

from . import __dist as _d
from . import __errors as _e
from . import __log as _l
from . import __parallel as _p
from . import __utils as _u
from .__rank import RankedPairSet

PI1_BOUNDS = (1e-4, 1.0 - 1e-4)
RHO1_BOUNDS = (1e-4, 0.999)
MU1_FLOOR = 1e-4
SIGMA1_SQ_FLOOR = 1e-4
MIN_COMPONENT_WEIGHT = 10.0
RECOMMENDED_MIN_SIGNALS = 50

QUANTILE_HALF_WIDTH = 10.0
QUANTILE_EXPANSIONS = 60
QUANTILE_BISECTIONS = 48
QUANTILE_NEWTON_STEPS = 3

REFINE_XATOL = 1e-5
REFINE_FATOL = 1e-4


class Theta(BaseModel):
    """Parameters of the reproducible component; the null is N(0, I) with π0 = 1 - π1."""

    pi1: float = Field(..., gt=0.0, lt=1.0, description="Mixing proportion of reproducible signals")
    mu1: float = Field(..., gt=0.0, description="Latent mean of reproducible signals")
    sigma1Sq: float = Field(..., gt=0.0, description="Latent variance of reproducible signals")
    rho1: float = Field(..., gt=0.0, le=1.0, description="Correlation between replicates")

    class Config:
        extra = "forbid"
        frozen = True

    @property
    def pi0(self) -> float:
        return 1.0 - self.pi1

    @property
    def sigma1(self) -> float:
        return math.sqrt(self.sigma1Sq)

    def clamped(self) -> "Theta":
        return Theta(
            pi1=min(max(self.pi1, PI1_BOUNDS[0]), PI1_BOUNDS[1]),
            mu1=max(self.mu1, MU1_FLOOR),
            sigma1Sq=max(self.sigma1Sq, SIGMA1_SQ_FLOOR),
            rho1=min(max(self.rho1, RHO1_BOUNDS[0]), RHO1_BOUNDS[1]),
        )

    def marginal(self) -> "MixtureMarginal":
        return MixtureMarginal(
            weights=(self.pi0, self.pi1), means=(0.0, self.mu1), sds=(1.0, self.sigma1)
        )


class InitRanges(BaseModel):
    """Uniform ranges random starts are drawn from."""

    pi1: tuple[float, float] = Field((0.05, 0.95), description="Range of π1 starts")
    mu1: tuple[float, float] = Field((1.0, 4.0), description="Range of μ1 starts")
    sigma1Sq: tuple[float, float] = Field((0.5, 2.0), description="Range of σ1² starts")
    rho1: tuple[float, float] = Field((0.1, 0.9), description="Range of ρ1 starts")

    class Config:
        extra = "forbid"


class FitConfig(BaseModel):
    nInits: int = Field(10, ge=1, description="Number of random starts")
    innerTol: float = Field(1e-4, gt=0.0, description="Inner EM log-likelihood increment tolerance")
    innerMaxIters: int = Field(30, ge=1, description="Inner EM iteration cap")
    outerTol: float = Field(0.01, gt=0.0, description="Outer copula log-likelihood increment tolerance")
    outerMaxIters: int = Field(100, ge=1, description="Outer iteration cap")
    refine: bool = Field(True, description="Maximize the copula log-likelihood directly from the best start")
    refineMaxIters: int = Field(2000, ge=1, description="Nelder-Mead iteration cap of the refinement")
    rngSeed: int = Field(0, ge=0, description="Seed for random starts")
    initRanges: InitRanges = Field(default_factory=InitRanges, description="Start ranges")

    class Config:
        extra = "forbid"


class PseudoData(BaseModel):
    z1: np.ndarray = Field(..., description="Latent-scale pseudo-observations, replicate 1")
    z2: np.ndarray = Field(..., description="Latent-scale pseudo-observations, replicate 2")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True

    @property
    def n(self) -> int:
        return int(self.z1.shape[0])


class FitResult(BaseModel):
    theta: Theta = Field(..., description="Estimate from the best start")
    loglik: float = Field(..., description="Copula log-likelihood at theta")
    loglikTrace: list[float] = Field(..., description="Inner EM log-likelihoods of the best start")
    outerTrace: list[float] = Field(default_factory=list, description="Copula log-likelihood after each outer iteration")
    refined: bool = Field(False, description="theta came from the direct refinement")
    posterior: np.ndarray = Field(..., description="Per-signal P(K=1 | data)")
    nOuterIters: int = Field(..., description="Outer iterations of the best start")
    converged: bool = Field(..., description="Best start met the outer tolerance")
    initIndex: int = Field(..., description="Index of the best start")
    nConverged: int = Field(0, description="Starts that met the outer tolerance")
    nDiscarded: int = Field(0, description="Starts dropped for a starving component")

    class Config:
        extra = "forbid"
        frozen = True
        arbitrary_types_allowed = True


class EStep(NamedTuple):
    posterior: np.ndarray
    localIdr: np.ndarray
    loglik: float


class MixtureMarginal(BaseModel):
    """Finite normal mixture on one latent coordinate: G(z) = Σ w_k Φ((z - m_k)/s_k)."""

    weights: tuple[float, ...] = Field(..., description="Component weights, summing to 1")
    means: tuple[float, ...] = Field(..., description="Component means")
    sds: tuple[float, ...] = Field(..., description="Component standard deviations")

    class Config:
        extra = "forbid"
        frozen = True

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for w, m, s in zip(self.weights, self.means, self.sds):
            out = out + w * _d.normalCdf((z - m) / s)
        return out

    def logPdf(self, z):
        z = np.asarray(z, dtype=float)
        parts = [
            math.log(w) + np.asarray(_d.normalLogPdf((z - m) / s)) - math.log(s)
            for w, m, s in zip(self.weights, self.means, self.sds)
            if w > 0.0
        ]
        return np.logaddexp.reduce(np.stack(parts), axis=0)

    def quantile(self, u):
        """G⁻¹ by bracketing bisection refined with guarded Newton steps.

        Works on the distinct values of `u` only; |G(z) - u| < 1e-12.
        """
        u = np.asarray(u, dtype=float)
        if not np.all((u > 0.0) & (u < 1.0)):
            raise _e.DomainError("mixture quantile requires u in (0, 1)")
        flat = u.ravel()
        if flat.size == 0:
            return u.copy()
        target, inverse = np.unique(flat, return_inverse=True)
        means = np.asarray(self.means)
        sds = np.asarray(self.sds)
        lower = float(np.min(means - QUANTILE_HALF_WIDTH * sds))
        upper = float(np.max(means + QUANTILE_HALF_WIDTH * sds))
        for _ in range(QUANTILE_EXPANSIONS):
            if self.cdf(lower) <= target[0]:
                break
            lower -= upper - lower
        for _ in range(QUANTILE_EXPANSIONS):
            if self.cdf(upper) >= target[-1]:
                break
            upper += upper - lower
        lo = np.full(target.shape, lower)
        hi = np.full(target.shape, upper)
        for _ in range(QUANTILE_BISECTIONS):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        z = 0.5 * (lo + hi)
        for _ in range(QUANTILE_NEWTON_STEPS):
            resid = self.cdf(z) - target
            dens = np.exp(self.logPdf(z))
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dens > 0.0, z - resid / dens, z)
            better = (step >= lo) & (step <= hi) & (
                np.abs(self.cdf(step) - target) <= np.abs(resid)
            )
            z = np.where(better, step, z)
        return z[inverse].reshape(u.shape)


def marginalMixtureCdf(z, theta: Theta):
    out = theta.marginal().cdf(z)
    return float(out) if np.ndim(out) == 0 else out


def marginalMixtureQuantile(u, theta: Theta):
    out = theta.marginal().quantile(u)
    return float(out) if np.ndim(out) == 0 else out


def computePseudoData(ranked: RankedPairSet, theta: Theta) -> PseudoData:
    n = ranked.n
    z = theta.marginal().quantile(np.concatenate([ranked.u1, ranked.u2]))
    return PseudoData(z1=z[:n], z2=z[n:])


def weightedLogDensities(pseudo: PseudoData, theta: Theta) -> tuple[np.ndarray, np.ndarray]:
    a0 = math.log(theta.pi0) + _d.bivariateNormalLogDensity(pseudo.z1, pseudo.z2, 0.0, 1.0, 0.0)
    a1 = math.log(theta.pi1) + _d.bivariateNormalLogDensity(
        pseudo.z1, pseudo.z2, theta.mu1, theta.sigma1Sq, theta.rho1
    )
    return np.asarray(a0), np.asarray(a1)


def eStep(pseudo: PseudoData, theta: Theta) -> EStep:
    a0, a1 = weightedLogDensities(pseudo, theta)
    lse = np.logaddexp(a0, a1)
    if not np.all(np.isfinite(lse)):
        raise _e.NumericalUnderflow("mixture density vanished at machine precision")
    return EStep(
        posterior=np.exp(a1 - lse), localIdr=np.exp(a0 - lse), loglik=float(np.sum(lse))
    )


def logLikelihood(pseudo: PseudoData, theta: Theta) -> float:
    """Σ log[π0 h0(z1, z2) + π1 h1(z1, z2)] over the pseudo-data."""
    return eStep(pseudo, theta).loglik


def copulaLogLikelihood(pseudo: PseudoData, theta: Theta) -> float:
    """Copula log-density: the mixture term less log g of both margins."""
    marginal = theta.marginal()
    margins = float(np.sum(marginal.logPdf(pseudo.z1))) + float(np.sum(marginal.logPdf(pseudo.z2)))
    return logLikelihood(pseudo, theta) - margins


def mStep(pseudo: PseudoData, posterior: np.ndarray) -> Theta:
    weight = float(np.sum(posterior))
    if weight < MIN_COMPONENT_WEIGHT:
        raise _e.DegenerateComponent(
            f"reproducible component starved: total weight {weight:.3g} < {MIN_COMPONENT_WEIGHT}"
        )
    z1, z2 = pseudo.z1, pseudo.z2
    mu1 = float(np.sum(posterior * (z1 + z2))) / (2.0 * weight)
    d1 = z1 - mu1
    d2 = z2 - mu1
    sigma1Sq = float(np.sum(posterior * (d1 * d1 + d2 * d2))) / (2.0 * weight)
    sigma1Sq = max(sigma1Sq, SIGMA1_SQ_FLOOR)
    rho1 = float(np.sum(posterior * (d1 * d2))) / (sigma1Sq * weight)
    return Theta(
        pi1=min(max(weight / pseudo.n, PI1_BOUNDS[0]), PI1_BOUNDS[1]),
        mu1=max(mu1, MU1_FLOOR),
        sigma1Sq=sigma1Sq,
        rho1=min(max(rho1, RHO1_BOUNDS[0]), RHO1_BOUNDS[1]),
    )


def emInner(
    pseudo: PseudoData, theta0: Theta, tol: float = 1e-4, maxIters: int = 30
) -> tuple[Theta, np.ndarray, list[float]]:
    """EM on fixed pseudo-data.

    Stops once the log-likelihood gains less than `tol` or after `maxIters`
    M-steps. Returns the last evaluated θ with its posteriors and the
    log-likelihood of every θ visited.
    """
    theta = theta0.clamped()
    trace: list[float] = []
    steps = 0
    while True:
        posterior, _, loglik = eStep(pseudo, theta)
        trace.append(loglik)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            break
        if steps >= maxIters:
            break
        theta = mStep(pseudo, posterior)
        steps += 1
    return theta, posterior, trace


def drawStart(rng: np.random.Generator, ranges: InitRanges) -> Theta:
    return Theta(
        pi1=float(rng.uniform(*ranges.pi1)),
        mu1=float(rng.uniform(*ranges.mu1)),
        sigma1Sq=float(rng.uniform(*ranges.sigma1Sq)),
        rho1=float(rng.uniform(*ranges.rho1)),
    ).clamped()


def fitFromStart(ranked: RankedPairSet, theta0: Theta, config: FitConfig, initIndex: int = 0) -> FitResult:
    """Alternate inner EM and pseudo-data refreshes from one starting point.

    Each refresh is scored on the copula log-likelihood; the loop stops once
    it rises by less than `config.outerTol` and the best θ seen is returned.
    """
    theta = theta0.clamped()
    pseudo = computePseudoData(ranked, theta)
    outerTrace = [copulaLogLikelihood(pseudo, theta)]
    best, bestLoglik = theta, outerTrace[0]
    trace: list[float] = []
    converged = False
    outer = 0
    for outer in range(1, config.outerMaxIters + 1):
        theta, _, inner = emInner(pseudo, theta, config.innerTol, config.innerMaxIters)
        trace.extend(inner)
        pseudo = computePseudoData(ranked, theta)
        outerTrace.append(copulaLogLikelihood(pseudo, theta))
        if outerTrace[-1] > bestLoglik:
            best, bestLoglik = theta, outerTrace[-1]
        if outerTrace[-1] - outerTrace[-2] < config.outerTol:
            converged = True
            break
    posterior = eStep(computePseudoData(ranked, best), best).posterior
    _l.debug(
        f"start {initIndex}: {outer} outer iterations, copula loglik {bestLoglik:.6f}, "
        f"converged={converged}, theta={best}"
    )
    return FitResult(
        theta=best,
        loglik=bestLoglik,
        loglikTrace=trace,
        outerTrace=outerTrace,
        posterior=posterior,
        nOuterIters=outer,
        converged=converged,
        initIndex=initIndex,
        nConverged=int(converged),
    )


def maximizeCopulaLikelihood(
    ranked: RankedPairSet, theta0: Theta, maxIters: int = 2000
) -> tuple[Theta, float]:
    """Nelder-Mead on the copula log-likelihood, pseudo-data recomputed for every θ."""

    def objective(x: np.ndarray) -> float:
        theta = Theta(pi1=x[0], mu1=x[1], sigma1Sq=x[2], rho1=x[3])
        try:
            return -copulaLogLikelihood(computePseudoData(ranked, theta), theta)
        except _e.NumericalUnderflow:
            return math.inf

    theta0 = theta0.clamped()
    start = np.array([theta0.pi1, theta0.mu1, theta0.sigma1Sq, theta0.rho1])
    bounds = Bounds(
        [PI1_BOUNDS[0], MU1_FLOOR, SIGMA1_SQ_FLOOR, RHO1_BOUNDS[0]],
        [PI1_BOUNDS[1], np.inf, np.inf, RHO1_BOUNDS[1]],
    )
    res = minimize(
        objective,
        start,
        method="Nelder-Mead",
        bounds=bounds,
        options={"xatol": REFINE_XATOL, "fatol": REFINE_FATOL, "maxiter": maxIters},
    )
    if not res.success:
        _l.warning(f"copula likelihood refinement stopped early: {res.message}")
    x = res.x
    theta = Theta(pi1=x[0], mu1=x[1], sigma1Sq=x[2], rho1=x[3]).clamped()
    return theta, -float(res.fun)


def fit(ranked: RankedPairSet, config: FitConfig | None = None, threads: int = 1) -> FitResult:
    """Best of `config.nInits` random starts by copula log-likelihood.

    Starts whose reproducible component starves are discarded; ties go to the
    lowest start index, so the result does not depend on `threads`. With
    `config.refine` the winner is then maximized directly and kept when that
    does not lower its log-likelihood.
    """
    config = config or FitConfig()
    if ranked.n < RECOMMENDED_MIN_SIGNALS:
        _l.warning(f"fitting only {ranked.n} signals; at least {RECOMMENDED_MIN_SIGNALS} are recommended")

    def runStart(index: int) -> FitResult | None:
        theta0 = drawStart(_u.childRng(config.rngSeed, index), config.initRanges)
        try:
            return fitFromStart(ranked, theta0, config, index)
        except _e.DegenerateComponent as e:
            _l.warning(f"start {index} discarded: {e}")
            return None

    outcomes = _p.mapOrdered(runStart, range(config.nInits), threads)
    usable = [o for o in outcomes if o is not None]
    if not usable:
        raise _e.DegenerateComponent(f"all {config.nInits} starts degenerated")
    best = min(usable, key=lambda o: (-o.loglik, o.initIndex))
    nConverged = sum(o.converged for o in usable)
    if nConverged == 0:
        _l.warning(f"none of {len(usable)} starts met the outer tolerance {config.outerTol}")
    update = {"nConverged": nConverged, "nDiscarded": len(outcomes) - len(usable)}
    if config.refine:
        theta, loglik = maximizeCopulaLikelihood(ranked, best.theta, config.refineMaxIters)
        _l.debug(f"refined start {best.initIndex}: copula loglik {best.loglik:.6f} -> {loglik:.6f}, theta={theta}")
        if loglik >= best.loglik:
            pseudo = computePseudoData(ranked, theta)
            update.update(
                theta=theta,
                loglik=copulaLogLikelihood(pseudo, theta),
                posterior=eStep(pseudo, theta).posterior,
                refined=True,
            )
    return best.model_copy(update=update)
