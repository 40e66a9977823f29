"""Contrast decomposition, the general selective pivot, median machinery,
and bootstrap plug-in covariance.

The central object is the survival-function pivot of a Gaussian statistic
conditioned on a randomized selection event: given the selection
probability t -> Q(t) of the event as a function of the contrast value
(everything else held fixed), the pivot is the normalized upper tail of
Q(t) * N(eta' mu, sigma_eta^2 / n) evaluated at the observed contrast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateContrastError,
    DegenerateDensityError,
    InvalidInputError,
)
from .noise import NoiseDistribution
from .quadrature import SelectiveTail


@dataclass
class LinearizableStatistic:
    """A statistic that is an i.i.d. average of influence terms plus a
    negligible remainder; ``cov`` is the asymptotic covariance of
    sqrt(n) * (T - mean)."""

    value: np.ndarray
    cov: np.ndarray
    n: int
    mean: Optional[np.ndarray] = None
    influence: Optional[np.ndarray] = None

    def __post_init__(self):
        self.value = np.atleast_1d(np.asarray(self.value, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        p = self.value.size
        if self.cov.shape != (p, p):
            raise InvalidInputError("cov must be p x p")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise InvalidInputError("cov must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -1e-10:
            raise InvalidInputError("cov must be positive semi-definite")


@dataclass
class ContrastDecomposition:
    """Split of T along a contrast eta: T = (Sigma eta / sigma_eta^2) eta'T + V."""

    eta: np.ndarray
    eta_T: float
    V_eta: np.ndarray
    sigma_eta_sq: float
    direction: np.ndarray  # Sigma eta / sigma_eta^2

    def reconstruct(self) -> np.ndarray:
        return self.direction * self.eta_T + self.V_eta


def decompose(stat: LinearizableStatistic, eta) -> ContrastDecomposition:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    sig = stat.cov @ eta
    s2 = float(eta @ sig)
    if s2 <= 1e-12:
        raise DegenerateContrastError("contrast variance eta' Sigma eta ~ 0")
    direction = sig / s2
    eta_T = float(eta @ stat.value)
    V = stat.value - direction * eta_T
    return ContrastDecomposition(eta, eta_T, V, s2, direction)


class SelectionProbability:
    """Wraps a selection-probability callable t -> Q(t) in [0, 1].

    ``breakpoints`` mark known kinks (indicator thresholds) so the
    quadrature aligns panel edges to them; ``slope_bound`` bounds
    |d log Q / dt| and widens the quadrature window accordingly.
    """

    def __init__(self, fn: Callable, breakpoints=(), slope_bound=0.0,
                 log_fn: Optional[Callable] = None):
        self.fn = fn
        self.breakpoints = tuple(breakpoints)
        self.slope_bound = float(slope_bound)
        self.log_fn = log_fn

    def logq(self, t):
        if self.log_fn is not None:
            return np.asarray(self.log_fn(t), dtype=float)
        vals = np.asarray(self.fn(t), dtype=float)
        if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-9):
            raise InvalidInputError("selection probability left [0, 1]")
        with np.errstate(divide="ignore"):
            return np.log(np.clip(vals, 0.0, 1.0))


def _as_selection_probability(q) -> SelectionProbability:
    if isinstance(q, SelectionProbability):
        return q
    return SelectionProbability(q)


def selective_contrast_law(decomp: ContrastDecomposition, q, mu_eta: float,
                           n: int) -> SelectiveTail:
    """The 1-D selective law of eta'T given V_eta and the selection event."""
    sp = _as_selection_probability(q)
    scale = np.sqrt(decomp.sigma_eta_sq / n)
    anchors = tuple(sp.breakpoints) + (decomp.eta_T,)
    return SelectiveTail(sp.logq, center=mu_eta, scale=scale,
                         slope_bound=sp.slope_bound, anchors=anchors,
                         breakpoints=sp.breakpoints)


def exact_pivot(decomp: ContrastDecomposition, q, mu_eta: float, n: int) -> float:
    """Survival pivot of eta'T under the selective law; Unif(0,1) at truth."""
    law = selective_contrast_law(decomp, q, mu_eta, n)
    return float(law.survival(decomp.eta_T))


# ---------------------------------------------------------------------------
# median machinery
# ---------------------------------------------------------------------------

def density_at_median(sample: np.ndarray) -> float:
    """Quantile-spacing estimate of the density at the median: the
    1/2 -/+ 1/sqrt(n) empirical quantiles a, b give f(m) ~ 2/(sqrt(n)(b-a))."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    rn = np.sqrt(n)
    a = np.quantile(x, 0.5 - 1.0 / rn)
    b = np.quantile(x, 0.5 + 1.0 / rn)
    if b <= a:
        raise DegenerateDensityError("quantile spacing collapsed (ties)")
    return 2.0 / (rn * (b - a))


def median_linearize(sample) -> LinearizableStatistic:
    """Sample median as a linearizable statistic with plug-in variance."""
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 25:
        raise InvalidInputError("need at least 25 observations")
    m = float(np.median(x))
    f_hat = density_at_median(x)
    cov = np.array([[1.0 / (4.0 * f_hat ** 2)]])
    influence = ((x > m).astype(float) - 0.5) / f_hat
    return LinearizableStatistic(value=np.array([m]), cov=cov, n=n,
                                 influence=influence[:, None])


def best_median_pivot(group1, group2, noise: NoiseDistribution, mu0: float,
                      omega: float) -> float:
    """Pivot for the median of the winning group after randomized selection.

    Selection reported group 1 because T1 > T2 + omega / sqrt(n); the pivot
    integrates the selection probability CDF_G(sqrt(n)(t - T2)) against the
    Gaussian approximation of T1 with the quantile-spacing variance plug-in.
    """
    from .errors import SelectionViolatedError

    g1 = np.asarray(group1, dtype=float)
    g2 = np.asarray(group2, dtype=float)
    n = g1.size
    rn = np.sqrt(n)
    t1 = float(np.median(g1))
    t2 = float(np.median(g2))
    if not t1 > t2 + omega / rn:
        raise SelectionViolatedError("group 1 was not selected as the best")
    if noise.kind != "logistic":
        raise InvalidInputError("best-median selection uses logistic noise")
    f1 = density_at_median(g1)
    sigma1 = 1.0 / (2.0 * f1)

    def logq(t):
        # CDF of Logistic(kappa) at sqrt(n)(t - T2)
        from scipy.special import log_expit
        return log_expit(noise.scale * rn * (np.asarray(t) - t2))

    law = SelectiveTail(logq, center=mu0, scale=sigma1 / rn,
                        slope_bound=noise.scale * rn, anchors=(t2, t1))
    return float(law.survival(t1))


# ---------------------------------------------------------------------------
# bootstrap covariance
# ---------------------------------------------------------------------------

def bootstrap_cov(data, statistic: Callable, B: int, seed: int) -> np.ndarray:
    """n-out-of-n pairs-bootstrap covariance of sqrt(n) * statistic."""
    if B < 100:
        raise InvalidInputError("need at least 100 bootstrap resamples")
    arr = np.asarray(data, dtype=float)
    n = arr.shape[0]
    stats = []
    for b in range(B):
        rng = np.random.default_rng((seed, b))
        idx = rng.integers(0, n, size=n)
        try:
            stats.append(np.atleast_1d(np.asarray(statistic(arr[idx]), dtype=float)))
        except Exception as exc:  # noqa: BLE001 - propagate with context
            raise RuntimeError(f"statistic failed on resample {b}") from exc
    stats = np.vstack(stats) * np.sqrt(n)
    centered = stats - stats.mean(axis=0)
    cov = centered.T @ centered / (B - 1)
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    return (vecs * np.maximum(vals, 0.0)) @ vecs.T
