"""Log-space Gauss-Legendre quadrature for selective tail ratios.

The pivots in this package are ratios

    integral_x^inf q(t) exp(-(t - center)^2 / (2 scale^2)) dt
    -----------------------------------------------------------
    integral_R     q(t) exp(-(t - center)^2 / (2 scale^2)) dt

where q maps into [0, 1] (a selection probability). Both integrals can
underflow catastrophically when the selection event is rare, so all
accumulation happens on log values. Composite Gauss-Legendre panels keep
the integrand smooth per panel; known kinks of q (indicator thresholds)
are passed as breakpoints and aligned with panel edges.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .errors import SelectionProbabilityUnderflowError

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}

# effective support margin in units of `scale`; exp(-18^2/2) ~ 1e-71
TAIL_MARGIN = 18.0


def _gl(order: int):
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (x, w)
    return _GL_CACHE[order]


def _panel_edges(a, b, panels_per_unit, unit, breakpoints=()):
    width = b - a
    n_panels = max(8, int(np.ceil(panels_per_unit * width / unit)))
    edges = np.linspace(a, b, n_panels + 1)
    pts = [p for p in np.atleast_1d(np.asarray(breakpoints, dtype=float)) if a < p < b]
    if pts:
        edges = np.unique(np.concatenate([edges, np.asarray(pts)]))
    return edges


def log_integral(logf, a, b, *, panels_per_unit=24.0, unit=None, order=10,
                 breakpoints=()):
    """log of integral_a^b exp(logf(t)) dt by composite Gauss-Legendre.

    ``logf`` must be vectorized and may return -inf. ``unit`` sets the
    length scale used to choose the panel count (defaults to b - a).
    """
    if b <= a:
        return -np.inf
    if unit is None:
        unit = b - a
    edges = _panel_edges(a, b, panels_per_unit, unit, breakpoints)
    x, w = _gl(order)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    half = 0.5 * (hi - lo)
    nodes = 0.5 * (hi + lo) + half * x[None, :]
    vals = logf(nodes.ravel()).reshape(nodes.shape)
    logw = np.log(half * w[None, :])
    return float(logsumexp(vals + logw))


class SelectiveTail:
    """Normalized Gaussian-weighted tail functional of a selection probability.

    Represents the 1-D law with density proportional to

        q(t) * exp(-(t - center)^2 / (2 scale^2)),

    precomputing panel integrals over the effective support so that
    survival probabilities (pivots) can be evaluated at many points.
    """

    def __init__(self, logq, center, scale, *, slope_bound=0.0, anchors=(),
                 breakpoints=(), order=10, panels_per_scale=24.0):
        self.logq = logq
        self.center = float(center)
        self.scale = float(scale)
        pad = TAIL_MARGIN * scale + abs(slope_bound) * scale * scale
        lo = center - pad
        hi = center + pad
        for a in anchors:
            lo = min(lo, a - TAIL_MARGIN * scale)
            hi = max(hi, a + TAIL_MARGIN * scale)
        self.lo, self.hi = lo, hi
        self._order = order
        self._edges = _panel_edges(lo, hi, panels_per_scale, scale, breakpoints)
        x, w = _gl(order)
        elo = self._edges[:-1][:, None]
        ehi = self._edges[1:][:, None]
        half = 0.5 * (ehi - elo)
        nodes = 0.5 * (ehi + elo) + half * x[None, :]
        vals = self._logf(nodes.ravel()).reshape(nodes.shape)
        terms = vals + np.log(half * w[None, :])
        # per-panel log integrals, then suffix log-sums from the right edge
        panel = logsumexp(terms, axis=1)
        self._panel = panel
        suffix = np.full(panel.size + 1, -np.inf)
        suffix[:-1] = np.logaddexp.accumulate(panel[::-1])[::-1]
        self._log_suffix = suffix
        self.log_total = float(suffix[0])
        if not np.isfinite(self.log_total):
            raise SelectionProbabilityUnderflowError(
                "selection probability underflowed: the selective law has no "
                "mass on the quadrature window"
            )

    def _logf(self, t):
        z = (t - self.center) / self.scale
        return np.asarray(self.logq(t), dtype=float) - 0.5 * z * z

    def _partial(self, a, b):
        """log integral over [a, b] within one panel; a, b arrays."""
        x, w = _gl(self._order)
        a = np.atleast_1d(a)
        b = np.atleast_1d(b)
        half = 0.5 * (b - a)[:, None]
        nodes = 0.5 * (a + b)[:, None] + half * x[None, :]
        vals = self._logf(nodes.ravel()).reshape(nodes.shape)
        with np.errstate(divide="ignore"):
            logw = np.where(half > 0, np.log(np.maximum(half, 0) * w[None, :]), -np.inf)
        return logsumexp(vals + logw, axis=1)

    def log_tail(self, x):
        """log integral_x^inf of the unnormalized density, vectorized."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full(x.shape, -np.inf)
        below = x <= self.lo
        out[below] = self.log_total
        inside = (~below) & (x < self.hi)
        if inside.any():
            xi = x[inside]
            k = np.searchsorted(self._edges, xi, side="right") - 1
            k = np.clip(k, 0, self._edges.size - 2)
            part = self._partial(xi, self._edges[k + 1])
            out[inside] = np.logaddexp(part, self._log_suffix[k + 1])
        beyond = x >= self.hi
        if beyond.any():
            # extend past the precomputed window (relative mass is tiny)
            for i in np.flatnonzero(beyond):
                out[i] = log_integral(
                    self._logf, x[i], x[i] + (self.hi - self.lo),
                    panels_per_unit=8.0, unit=self.scale, order=self._order)
        return out

    def survival(self, x):
        """P(T > x) under the normalized selective law; vectorized, in [0,1]."""
        x = np.asarray(x, dtype=float)
        val = np.exp(self.log_tail(x) - self.log_total).reshape(x.shape)
        out = np.clip(val, 0.0, 1.0)
        return out if out.shape else float(out)

    def sample(self, count, rng, grid_points=4096):
        """Exact-to-grid draws by inverting the CDF on a dense grid that
        keeps every panel edge (so indicator kinks stay sharp)."""
        t = np.unique(np.concatenate([
            self._edges, np.linspace(self.lo, self.hi, grid_points)]))
        cdf = 1.0 - np.asarray(self.survival(t))
        cdf = np.maximum.accumulate(cdf)
        u = rng.random(count)
        return np.interp(u, cdf, t)
