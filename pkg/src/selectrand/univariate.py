"""File-drawer pivots, selective intervals, and the simulation kernel.

Selection reports the sample mean only when ``sqrt(n) * xbar + omega``
clears a threshold (2 in all the stock experiments), with omega drawn
from a :class:`~selectrand.noise.NoiseDistribution`. Degenerate noise
recovers the hard threshold rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtr
from scipy.integrate import quad

from .errors import (
    BracketError,
    InvalidInputError,
    InvariantViolationError,
    SelectionViolatedError,
)
from .noise import NoiseDistribution, degenerate
from .quadrature import SelectiveTail

DEFAULT_THRESHOLD = 2.0

_SKEWED_SD = np.sqrt(1.25)  # sd of Z + 0.5*E, Z ~ N(0,1), E ~ Exp(1)


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Population:
    """A sampling law for individual observations with known mean ``mu``.

    kinds: ``gaussian`` (sd 1), ``shifted_bernoulli`` (base values -1.5/0.5
    each w.p. 1/2, translated so the mean is ``mu``), ``skewed``
    (N(0,1) + 0.5 Exp(1), standardized to mean ``mu`` and variance 1), and
    ``custom`` (user sampler).
    """

    kind: str
    mu: float
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.mu + rng.standard_normal(size)
        if self.kind == "shifted_bernoulli":
            base = np.where(rng.random(size) < 0.5, -1.5, 0.5)
            return base + (self.mu + 0.5)
        if self.kind == "skewed":
            raw = rng.standard_normal(size) + 0.5 * (rng.exponential(size=size) - 1.0)
            return self.mu + raw / _SKEWED_SD
        if self.kind == "custom":
            return np.asarray(self.sampler(rng, size), dtype=float)
        raise InvalidInputError(f"unknown population kind {self.kind!r}")


def population_gaussian(mu: float) -> Population:
    return Population("gaussian", mu)


def population_shifted_bernoulli(mu: float = -0.5) -> Population:
    return Population("shifted_bernoulli", mu)


def population_skewed(mu: float = 0.0) -> Population:
    return Population("skewed", mu)


def population_custom(sampler, mu: float) -> Population:
    return Population("custom", mu, sampler)


def selection_rate(n: int, mu: float, noise: NoiseDistribution,
                   threshold: float = DEFAULT_THRESHOLD) -> float:
    """Marginal probability of selection for a gaussian population,
    computed by quadrature (works even deep in the rejection region)."""
    law = selective_law(n, mu, noise, threshold)
    return float(np.exp(law.log_total - np.log(law.scale * np.sqrt(2 * np.pi))))


def sample_reported_means(n: int, mu: float, noise: NoiseDistribution,
                          count: int, seed,
                          threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Draws of the reported mean given selection, for a gaussian
    population, by grid inversion of the quadrature law."""
    law = selective_law(n, mu, noise, threshold)
    return law.sample(count, np.random.default_rng(seed))


def population_skewed_median(median: float = 0.0) -> Population:
    """Skewed population recentered so its median (not mean) is ``median``."""
    shift = (skewed_median_offset() - 0.5) / _SKEWED_SD
    base = population_skewed(0.0)

    def sampler(rng, size):
        return base.sample(rng, size) - shift + median

    return Population("custom", median - shift, sampler)


@lru_cache(maxsize=1)
def skewed_median_offset() -> float:
    """Median of Z + 0.5*E (Z ~ N(0,1), E ~ Exp(1)), found from its CDF."""

    def cdf(t):
        val, _ = quad(lambda e: ndtr(t - 0.5 * e) * np.exp(-e), 0.0, 40.0,
                      epsabs=1e-12, epsrel=1e-12, limit=200)
        return val

    return brentq(lambda t: cdf(t) - 0.5, -1.0, 2.0, xtol=1e-12)


# ---------------------------------------------------------------------------
# domain records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FileDrawerConfig:
    n: int
    noise: NoiseDistribution
    population: Population
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInputError("sample size n must be >= 2")
        if not np.isfinite(self.threshold):
            raise InvalidInputError("threshold must be finite")


@dataclass(frozen=True)
class ReportedMean:
    xbar: float
    n: int
    omega: float
    selected: bool


@dataclass
class SimulationResult:
    records: list = field(default_factory=list)
    attempts: int = 0

    @property
    def selected(self) -> list:
        return [r for r in self.records if r.selected]

    @property
    def acceptance_rate(self) -> float:
        return len(self.selected) / self.attempts if self.attempts else 0.0

    def selected_means(self) -> np.ndarray:
        return np.array([r.xbar for r in self.selected])


# ---------------------------------------------------------------------------
# pivots
# ---------------------------------------------------------------------------

def nonrandomized_pivot(xbar: float, n: int, mu0: float,
                        threshold: float = DEFAULT_THRESHOLD) -> float:
    """Truncated-normal survival pivot for the hard-threshold rule."""
    for v in (xbar, mu0, threshold):
        if not np.isfinite(v):
            raise InvalidInputError("pivot arguments must be finite")
    rn = np.sqrt(n)
    if rn * xbar <= threshold:
        raise SelectionViolatedError(
            f"sqrt(n)*xbar = {rn * xbar:.6g} did not clear threshold {threshold}")
    # log-space normal survival keeps the ratio finite out to +/-40 sigma
    log_num = log_ndtr(-(rn * (xbar - mu0)))
    log_den = log_ndtr(-(threshold - rn * mu0))
    return float(np.clip(np.exp(log_num - log_den), 0.0, 1.0))


def selective_law(n: int, mu0: float, noise: NoiseDistribution,
                  threshold: float = DEFAULT_THRESHOLD) -> SelectiveTail:
    """The selective law of the sample mean for a given hypothesized mean.

    Density proportional to ``survival_G(threshold - sqrt(n) t) *
    exp(-n (t - mu0)^2 / 2)`` in t = xbar units; supports batch survival
    evaluation (the pivot is its survival function).
    """
    rn = np.sqrt(n)

    def logq(t):
        return noise.log_survival(threshold - rn * np.asarray(t))

    slope = 0.0
    if noise.kind in ("logistic", "laplace"):
        slope = noise.scale * rn  # hazard of both families is bounded by kappa
    breakpoints = (threshold / rn,) if noise.is_degenerate else ()
    return SelectiveTail(
        logq, center=mu0, scale=1.0 / rn, slope_bound=slope,
        anchors=(threshold / rn,), breakpoints=breakpoints)


def randomized_pivot(xbar: float, n: int, mu0: float, noise: NoiseDistribution,
                     threshold: float = DEFAULT_THRESHOLD) -> float:
    """Survival pivot of the randomized file-drawer rule at ``mu0``."""
    if noise.is_degenerate:
        return nonrandomized_pivot(xbar, n, mu0, threshold)
    if np.isnan(xbar) or not np.isfinite(mu0):
        raise InvalidInputError("xbar must not be NaN and mu0 must be finite")
    if xbar == -np.inf:
        return 1.0
    if xbar == np.inf:
        return 0.0
    return float(selective_law(n, mu0, noise, threshold).survival(xbar))


def invert_selective_ci(xbar: float, n: int, noise: NoiseDistribution,
                        threshold: float = DEFAULT_THRESHOLD,
                        level: float = 0.9) -> tuple[float, float]:
    """Selective confidence interval by inverting the randomized pivot.

    ``level`` is the confidence level; endpoints solve
    ``pivot(xbar; mu) = alpha/2`` and ``1 - alpha/2`` with alpha = 1 - level,
    using the monotonicity of the pivot in mu.
    """
    if not 0.0 < level < 1.0:
        raise InvalidInputError("level must be in (0, 1)")
    alpha = 1.0 - level
    rn = np.sqrt(n)

    def pivot(mu):
        return randomized_pivot(xbar, n, mu, noise, threshold)

    lo, hi = xbar - 20.0 / rn, xbar + 20.0 / rn
    for _ in range(12):
        p_lo, p_hi = pivot(lo), pivot(hi)
        if p_lo < alpha / 2 and p_hi > 1.0 - alpha / 2:
            break
        lo, hi = xbar - 2.0 * (xbar - lo), xbar + 2.0 * (hi - xbar)
    else:
        raise BracketError("could not bracket both interval endpoints")
    if p_lo > p_hi + 1e-9:
        raise InvariantViolationError("pivot is not increasing in mu on bracket")
    lower = brentq(lambda m: pivot(m) - alpha / 2, lo, hi, xtol=1e-8)
    upper = brentq(lambda m: pivot(m) - (1.0 - alpha / 2), lo, hi, xtol=1e-8)
    return (lower, upper)


# ---------------------------------------------------------------------------
# simulation kernel
# ---------------------------------------------------------------------------

def simulate_file_drawer(config: FileDrawerConfig, reps: int,
                         seed: int) -> SimulationResult:
    """Replicate the (randomized) file-drawer experiment.

    Each replication uses a generator derived from ``(seed, rep)``, so
    results are deterministic however replications are scheduled.
    """
    if reps < 1:
        raise InvalidInputError("reps must be >= 1")
    rn = np.sqrt(config.n)
    result = SimulationResult(attempts=reps)
    for rep in range(reps):
        rng = np.random.default_rng((seed, rep))
        data = config.population.sample(rng, config.n)
        xbar = float(data.mean())
        omega = float(config.noise.sample_with(rng, 1)[0])
        selected = rn * xbar + omega > config.threshold
        result.records.append(ReportedMean(xbar, config.n, omega, bool(selected)))
    return result


def sample_selected_means(n: int, mu: float, noise: NoiseDistribution,
                          count: int, seed: int,
                          threshold: float = DEFAULT_THRESHOLD,
                          max_attempts: int = 10 ** 8) -> np.ndarray:
    """Draw ``count`` accepted sample means for a *gaussian* population.

    Vectorized rejection sampler on (xbar, omega) directly; used by the
    coverage and uniformity studies where full datasets are unnecessary.
    """
    rng = np.random.default_rng(seed)
    rn = np.sqrt(n)
    out = []
    got = 0
    attempts = 0
    batch = max(10000, count)
    while got < count:
        if attempts > max_attempts:
            raise BracketError("acceptance rate too low for rejection sampling")
        xbar = mu + rng.standard_normal(batch) / rn
        omega = noise.sample_with(rng, batch)
        keep = rn * xbar + omega > threshold
        sel = xbar[keep]
        out.append(sel)
        got += sel.size
        attempts += batch
    return np.concatenate(out)[:count]
