"""Randomization distributions used in selection.

A :class:`NoiseDistribution` is the law G of the additive randomization
variable omega. Logistic and Laplace are parametrized by a *rate* kappa
(the logistic CDF is ``exp(kappa*w) / (1 + exp(kappa*w))``), the Gaussian
by its standard deviation gamma, and the degenerate kind is a point mass
at zero, which recovers non-randomized selection on the same code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, log_ndtr, ndtr

from .errors import InvalidInputError, UnsupportedOperationError

KINDS = ("gaussian", "laplace", "logistic", "degenerate")

_LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class NoiseDistribution:
    """A randomization law G with its scale parameter.

    ``scale`` is the rate kappa for logistic/laplace kinds, the standard
    deviation gamma for the gaussian kind, and is ignored for the
    degenerate kind (point mass at 0).
    """

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if self.kind != "degenerate" and not (
            np.isfinite(self.scale) and self.scale > 0
        ):
            raise InvalidInputError("scale must be a positive finite real")

    @property
    def is_degenerate(self) -> bool:
        return self.kind == "degenerate"

    @property
    def std(self) -> float:
        """Standard deviation of G."""
        if self.kind == "gaussian":
            return self.scale
        if self.kind == "logistic":
            return math.pi / (self.scale * math.sqrt(3.0))
        if self.kind == "laplace":
            return math.sqrt(2.0) / self.scale
        return 0.0

    # -- survival -----------------------------------------------------------

    def survival(self, t):
        """P(omega > t); vectorized, stable deep into both tails."""
        return np.exp(self.log_survival(t))

    def log_survival(self, t):
        """log P(omega > t) computed without underflow for |scale*t| large."""
        t = _check_real(t)
        if self.kind == "logistic":
            return log_expit(-self.scale * t)
        if self.kind == "gaussian":
            return log_ndtr(-t / self.scale)
        if self.kind == "laplace":
            kt = self.scale * t
            with np.errstate(over="ignore"):
                out = np.where(
                    kt >= 0, _LOG_HALF - kt, np.log1p(-0.5 * np.exp(np.minimum(kt, 0)))
                )
            return out
        # point mass at 0: survival is 1 strictly left of 0, else 0
        with np.errstate(divide="ignore"):
            return np.where(t < 0, 0.0, -np.inf)

    def cdf(self, t):
        """P(omega <= t)."""
        t = _check_real(t)
        if self.kind == "logistic":
            return expit(self.scale * t)
        if self.kind == "gaussian":
            return ndtr(t / self.scale)
        if self.kind == "laplace":
            return 1.0 - self.survival(t)
        return np.where(t >= 0, 1.0, 0.0)

    # -- density and its derivatives ----------------------------------------

    def density_derivative(self, w, k: int = 0):
        """k-th derivative of the density of G at w, k in 0..3.

        The Laplace density has a kink at 0; there the right limit is
        returned for k >= 1.
        """
        if k not in (0, 1, 2, 3):
            raise InvalidInputError("derivative order k must be in 0..3")
        if self.is_degenerate:
            raise UnsupportedOperationError("point mass at 0 has no density")
        w = _check_real(w)
        kap = self.scale
        if self.kind == "logistic":
            s = expit(kap * w)
            # P_{k+1}(s) = s(1-s) P_k'(s), starting from P_0 = s(1-s)
            base = s * (1.0 - s)
            if k == 0:
                poly = base
            elif k == 1:
                poly = base * (1.0 - 2.0 * s)
            elif k == 2:
                poly = base * (1.0 - 6.0 * s + 6.0 * s * s)
            else:
                poly = base * (1.0 - 14.0 * s + 36.0 * s * s - 24.0 * s ** 3)
            return kap ** (k + 1) * poly
        if self.kind == "gaussian":
            x = w / kap
            phi = np.exp(-0.5 * x * x) / (kap * math.sqrt(2.0 * math.pi))
            if k == 0:
                herm = np.ones_like(x)
            elif k == 1:
                herm = -x
            elif k == 2:
                herm = x * x - 1.0
            else:
                herm = -(x ** 3 - 3.0 * x)
            return phi * herm / kap ** k
        # laplace
        sgn = np.where(w < 0, -1.0, 1.0)
        return 0.5 * kap * (-kap * sgn) ** k * np.exp(-kap * np.abs(w))

    def log_density(self, w):
        """log density of G at w (non-degenerate kinds only)."""
        if self.is_degenerate:
            raise UnsupportedOperationError("point mass at 0 has no density")
        w = _check_real(w)
        kap = self.scale
        if self.kind == "logistic":
            # kappa * e^{-kappa|w|} / (1 + e^{-kappa|w|})^2
            a = -kap * np.abs(w)
            return math.log(kap) + a - 2.0 * np.log1p(np.exp(a))
        if self.kind == "gaussian":
            return (
                -0.5 * (w / kap) ** 2
                - math.log(kap)
                - 0.5 * math.log(2.0 * math.pi)
            )
        return math.log(0.5 * kap) - kap * np.abs(w)

    # -- sampling ------------------------------------------------------------

    def sample(self, seed, count: int) -> np.ndarray:
        """Draw ``count`` i.i.d. variates; deterministic given ``seed``."""
        if count < 0:
            raise InvalidInputError("count must be non-negative")
        if self.is_degenerate:
            return np.zeros(count)
        rng = np.random.default_rng(seed)
        return self.sample_with(rng, count)

    def sample_with(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw from an existing generator (for callers managing seeds)."""
        if self.is_degenerate:
            return np.zeros(count)
        if self.kind == "logistic":
            return rng.logistic(scale=1.0 / self.scale, size=count)
        if self.kind == "gaussian":
            return rng.normal(scale=self.scale, size=count)
        return rng.laplace(scale=1.0 / self.scale, size=count)


def _check_real(t):
    """Reject NaN; +/-inf are allowed (survival limits are defined there)."""
    arr = np.asarray(t, dtype=float)
    if np.isnan(arr).any():
        raise InvalidInputError("argument must not be NaN")
    return arr


def gaussian(scale: float) -> NoiseDistribution:
    return NoiseDistribution("gaussian", scale)


def laplace(scale: float) -> NoiseDistribution:
    return NoiseDistribution("laplace", scale)


def logistic(scale: float) -> NoiseDistribution:
    return NoiseDistribution("logistic", scale)


def degenerate() -> NoiseDistribution:
    return NoiseDistribution("degenerate", 1.0)
