"""Monte-Carlo engine for conditional selective laws.

Hit-and-run over the joint state (T, omega) restricted to an affine
selection event. T moves along random directions of its free subspace
(the chord target is an exactly sampled truncated normal); each omega
coordinate is resampled from its truncated noise law, in closed form for
gaussian/logistic noise and by grid inversion for laplace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import log_expit, log_ndtr, ndtri_exp

from .errors import (
    BracketError,
    InfeasibleStartError,
    InsufficientSamplesError,
    InvalidInputError,
)
from .gaussian_core import ContrastDecomposition
from .noise import NoiseDistribution
from .selectors import AffineSelectionEvent

_GRID = 512


@dataclass
class ChainConfig:
    burn_in: int = 2000
    thin: int = 5
    draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1 or self.burn_in < 0 or self.thin < 0:
            raise InvalidInputError("bad chain configuration")


@dataclass
class ConstrainedLaw:
    mean: np.ndarray
    cov: np.ndarray
    noise: NoiseDistribution
    event: Optional[AffineSelectionEvent] = None
    conditioning: Optional[ContrastDecomposition] = None
    init: Optional[tuple] = None  # (T0, omega0)

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        p = self.mean.size
        if self.cov.shape != (p, p):
            raise InvalidInputError("cov shape mismatch")
        self.precision = np.linalg.inv(self.cov)

    def joint_constraints(self, q: int):
        """(M_T, M_w, c) with event M_T T + M_w w <= c; rows may be empty."""
        if self.event is None:
            p = self.mean.size
            return (np.zeros((0, p)), np.zeros((0, q)), np.zeros(0))
        A, b = self.event.A, self.event.b
        if self.event.B is not None:
            return (A, self.event.B, b)
        # raw form: constraint acts on y + omega
        Mw = A if q else np.zeros((A.shape[0], 0))
        return (A, Mw, b)


@dataclass
class ChainResult:
    T: np.ndarray
    omega: np.ndarray
    rejected: int = 0

    def contrasts(self, eta) -> np.ndarray:
        return self.T @ np.asarray(eta, dtype=float)


def _log1mexp(logp):
    # log(1 - e^{logp}) for logp <= 0
    if logp > -0.6931471805599453:
        return np.log(-np.expm1(logp))
    return np.log1p(-np.exp(logp))


def _trunc_interp(u, log_flo, log_fhi):
    """log of F(lo) + u * (F(hi) - F(lo)) computed in log space."""
    if log_flo == -np.inf or log_fhi - log_flo > 33.0:
        # F(lo) is negligible next to F(hi)
        return np.log(u) + log_fhi if u > 0 else -np.inf
    return log_flo + np.log1p(u * np.expm1(log_fhi - log_flo))


def truncated_normal(rng, mean, sd, lo, hi):
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    if a > 0:  # reflect so the lower bound sits in the stable tail
        return 2 * mean - truncated_normal(rng, mean, sd, 2 * mean - hi,
                                           2 * mean - lo)
    la, lb = log_ndtr(a), log_ndtr(b)
    if lb - la < 1e-15:
        return mean + sd * 0.5 * (a + b) if np.isfinite(a + b) else lo
    logu = _trunc_interp(rng.random(), la, lb)
    return mean + sd * ndtri_exp(logu)


def _truncated_logistic(rng, rate, lo, hi):
    if lo > 0:
        return -_truncated_logistic(rng, rate, -hi, -lo)
    la, lb = log_expit(rate * lo), log_expit(rate * hi)
    if lb - la < 1e-15:
        return 0.5 * (lo + hi) if np.isfinite(lo + hi) else lo
    logu = _trunc_interp(rng.random(), la, lb)
    return (logu - _log1mexp(logu)) / rate


def _truncated_grid(rng, noise, lo, hi):
    span = 60.0 * noise.scale if noise.kind == "laplace" else 60.0 * noise.std
    lo_f = max(lo, -span)
    hi_f = min(hi, span)
    if hi_f <= lo_f:
        lo_f, hi_f = lo, min(hi, lo + 1.0)
    grid = np.linspace(lo_f, hi_f, _GRID)
    logd = noise.log_density(grid)
    logd -= logd.max()
    w = np.exp(logd)
    cdf = np.concatenate([[0.0], np.cumsum((w[1:] + w[:-1]) * np.diff(grid) / 2)])
    cdf /= cdf[-1]
    return float(np.interp(rng.random(), cdf, grid))


def _draw_omega(rng, noise, lo, hi):
    if noise.kind == "gaussian":
        return truncated_normal(rng, 0.0, noise.scale, lo, hi)
    if noise.kind == "logistic":
        return _truncated_logistic(rng, noise.scale, lo, hi)
    return _truncated_grid(rng, noise, lo, hi)


def _chord(coefs, slack):
    """Feasible s interval of x + s*u given constraint slacks b - Mx >= 0."""
    lo, hi = -np.inf, np.inf
    pos = coefs > 1e-13
    neg = coefs < -1e-13
    if np.any(pos):
        hi = np.min(slack[pos] / coefs[pos])
    if np.any(neg):
        lo = np.max(slack[neg] / coefs[neg])
    return lo, hi


def hit_and_run(law: ConstrainedLaw, init=None, config: ChainConfig = None) -> ChainResult:
    config = config or ChainConfig()
    if init is None:
        init = law.init
    if init is None:
        raise InfeasibleStartError("no initial point provided")
    T = np.atleast_1d(np.asarray(init[0], dtype=float)).copy()
    p = T.size
    degenerate = law.noise.is_degenerate
    if degenerate:
        omega = np.zeros(0)
    else:
        omega = np.atleast_1d(np.asarray(init[1], dtype=float)).copy()
    q = omega.size
    MT, Mw, c = law.joint_constraints(q)
    nrows = MT.shape[0]

    def slack():
        v = c.copy()
        if nrows:
            v = v - MT @ T
            if q:
                v = v - Mw @ omega
        return v

    s0 = slack()
    if nrows and np.any(s0 <= 1e-9):
        raise InfeasibleStartError(
            f"initial point violates the event (min slack {s0.min():.3e})")

    if law.conditioning is not None:
        basis = law.conditioning.direction[:, None]  # only eta'T moves
    else:
        basis = np.eye(p)
    kfree = basis.shape[1]

    rng = np.random.default_rng(config.seed)
    total = config.burn_in + config.draws * max(config.thin, 1)
    out_T = np.empty((config.draws, p))
    out_w = np.empty((config.draws, q))
    rejected = 0
    kept = 0
    cur_slack = s0
    for step in range(total):
        # T move along a random free direction
        coef = rng.standard_normal(kfree)
        u = basis @ (coef / np.linalg.norm(coef))
        Pu = law.precision @ u
        var_s = 1.0 / float(u @ Pu)
        mean_s = -float(Pu @ (T - law.mean)) * var_s
        row = MT @ u if nrows else np.zeros(0)
        lo, hi = _chord(row, cur_slack) if nrows else (-np.inf, np.inf)
        if lo >= hi:
            rejected += 1
        else:
            s = truncated_normal(rng, mean_s, np.sqrt(var_s), lo, hi)
            T = T + s * u
            if nrows:
                cur_slack = cur_slack - s * row
        # omega coordinate scan
        if q:
            for j in rng.permutation(q):
                col = Mw[:, j]
                base = cur_slack + col * omega[j]
                lo, hi = _chord(col, base)
                if lo >= hi:
                    rejected += 1
                    continue
                wj = _draw_omega(rng, law.noise, lo, hi)
                omega[j] = wj
                cur_slack = base - col * wj
        if step >= config.burn_in and (step - config.burn_in) % max(config.thin, 1) == 0:
            if kept < config.draws:
                out_T[kept] = T
                out_w[kept] = omega
                kept += 1
    return ChainResult(T=out_T[:kept], omega=out_w[:kept], rejected=rejected)


def mc_pvalue(samples, observed: float, alternative: str = "greater") -> float:
    s = np.asarray(samples, dtype=float).ravel()
    if s.size < 100:
        raise InsufficientSamplesError(f"only {s.size} draws")
    m = s.size
    greater = (1.0 + np.sum(s >= observed)) / (1.0 + m)
    if alternative == "greater":
        return float(greater)
    less = (1.0 + np.sum(s <= observed)) / (1.0 + m)
    if alternative == "less":
        return float(less)
    if alternative == "two_sided":
        return float(min(1.0, 2.0 * min(greater, less)))
    raise InvalidInputError(f"unknown alternative {alternative!r}")


def mc_interval(law_family: Callable, observed: float, level: float,
                config: ChainConfig, eta=None, scale_hint: float = None) -> tuple:
    """Invert mc_pvalue over a family mu0 -> ConstrainedLaw by bisection.

    Common random numbers: every evaluation reuses config.seed, so the
    p-value is a (noisy but fixed) monotone function of mu0.
    """
    alpha = 1.0 - level
    law0 = law_family(observed)
    if eta is None:
        if law0.conditioning is None:
            raise InvalidInputError("need a contrast for the interval")
        eta = law0.conditioning.eta
    sd = scale_hint
    if sd is None:
        sd = float(np.sqrt(eta @ law0.cov @ eta))

    def pgreater(mu0):
        law = law_family(mu0)
        res = hit_and_run(law, config=config)
        return mc_pvalue(res.contrasts(eta), observed, "greater")

    def solve(target):
        lo, hi = observed - 4 * sd, observed + 4 * sd
        plo, phi = pgreater(lo), pgreater(hi)
        width = 4 * sd
        tries = 0
        while plo > target and tries < 12:
            width *= 2
            lo -= width
            plo = pgreater(lo)
            tries += 1
        tries = 0
        while phi < target and tries < 12:
            width *= 2
            hi += width
            phi = pgreater(hi)
            tries += 1
        if plo > target or phi < target:
            raise BracketError("could not bracket the interval endpoint")
        while hi - lo > 0.01 * sd:
            mid = 0.5 * (lo + hi)
            if pgreater(mid) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return (solve(alpha / 2.0), solve(1.0 - alpha / 2.0))
