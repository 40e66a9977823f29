"""Inference after cross-validated square-root LASSO.

The response is randomized through a two-level gaussian cascade: an
intermediate copy y_inter of y, and two conditionally independent children
y_cv (used to pick the penalty by K-fold cross-validation) and y_select
(used to pick the active set at that penalty). A four-step Gibbs sampler
then cycles the conditional laws of (y_cv, y_select, y_inter, y) given the
selection outcome, recording X_j' y each sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, SelectionViolatedError
from .sampler import ChainConfig, truncated_normal
from .selectors import _cv_scores, solve_sqrt_lasso, sqrt_lasso_region


@dataclass
class CascadeVariances:
    sigma1_sq: float
    sigma2_cv_sq: float
    sigma2_select_sq: float
    sigma_sq: float = 1.0

    def __post_init__(self):
        for v in (self.sigma1_sq, self.sigma2_cv_sq, self.sigma2_select_sq,
                  self.sigma_sq):
            if v <= 0:
                raise InvalidInputError("cascade variances must be positive")


@dataclass
class RandomizationCascade:
    y: np.ndarray
    y_inter: np.ndarray
    y_cv: np.ndarray
    y_select: np.ndarray
    variances: CascadeVariances


def randomize_cascade(y, variances: CascadeVariances, seed) -> RandomizationCascade:
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    v = variances
    y_inter = y + np.sqrt(v.sigma1_sq) * rng.standard_normal(y.size)
    y_cv = y_inter + np.sqrt(v.sigma2_cv_sq) * rng.standard_normal(y.size)
    y_select = y_inter + np.sqrt(v.sigma2_select_sq) * rng.standard_normal(y.size)
    return RandomizationCascade(y=y, y_inter=y_inter, y_cv=y_cv,
                                y_select=y_select, variances=v)


@dataclass
class CVSelection:
    lambda_hat: float
    grid: np.ndarray
    folds: list
    active: np.ndarray
    signs: np.ndarray


def _make_folds(n: int, K: int, fold_seed) -> list:
    perm = np.random.default_rng(fold_seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, K)]


def cv_lambda(y_cv, X, grid, K: int, fold_seed) -> float:
    """Penalty minimizing the K-fold held-out squared error of square-root
    LASSO refits; ties break toward the larger penalty."""
    X = np.asarray(X, dtype=float)
    y_cv = np.asarray(y_cv, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or K < 2:
        raise InvalidInputError("need a non-empty grid and K >= 2")
    folds = _make_folds(X.shape[0], K, fold_seed)
    fold_id = np.empty(X.shape[0], dtype=np.int64)
    for k, test in enumerate(folds):
        fold_id[test] = k
    grid_desc = np.sort(grid)[::-1].copy()
    try:
        scores = _cv_scores(np.ascontiguousarray(X), y_cv, grid_desc,
                            fold_id, K)
    except Exception as exc:
        raise RuntimeError("solver failed inside cross-validation") from exc
    # grid is scanned from the largest penalty down, so the first minimizer
    # is the tie-break toward larger penalties
    return float(grid_desc[int(np.argmin(scores))])


def cv_select(y_cv, X, grid, K: int, fold_seed, y_select=None) -> CVSelection:
    """Full selection: penalty from y_cv by cross-validation, active set and
    signs from the square-root LASSO on y_select at that penalty."""
    lam_hat = cv_lambda(y_cv, X, grid, K, fold_seed)
    target = np.asarray(y_select if y_select is not None else y_cv, dtype=float)
    fit = solve_sqrt_lasso(np.asarray(X, dtype=float), target, lam_hat)
    return CVSelection(lambda_hat=lam_hat, grid=np.asarray(grid, dtype=float),
                       folds=_make_folds(np.asarray(X).shape[0], K, fold_seed),
                       active=fit.active, signs=fit.signs)


@dataclass
class GibbsResult:
    samples: np.ndarray          # X_j' y per recorded sweep
    y_cv_updates: int = 0
    y_cv_failures: int = 0


def _model_matches(X, y_select, lam, active, signs) -> bool:
    if active.size == 0:
        # exact null-solution criterion, no solve needed
        return float(np.max(np.abs(X.T @ y_select))) <= lam * np.linalg.norm(y_select)
    fit = solve_sqrt_lasso(X, y_select, lam)
    return (fit.active.size == active.size and np.all(fit.active == active)
            and np.all(fit.signs == signs))


def _select_step(rng, y_sel, y_inter, member, Qx, sel_sd, n_chords):
    """One sweep of the y_select conditional: hit-and-run chords within the
    column span of the design (where the selection event lives), then an
    exact rejection redraw of the orthogonal block, whose angular part is
    unconstrained (the event sees it only through its norm).
    """
    n = y_sel.size
    sel = y_sel
    for _ in range(n_chords):
        g = rng.standard_normal(Qx.shape[1])
        u = Qx @ (g / np.linalg.norm(g))
        mean_s = float(u @ (y_inter - sel))
        radius = abs(mean_s) + 10.0 * sel_sd

        def on_chord(s, base=sel, direction=u):
            return member(base + s * direction)

        hi = _chord_boundary(on_chord, 0.0, 0.25 * sel_sd, radius)
        lo = _chord_boundary(on_chord, 0.0, -0.25 * sel_sd, radius)
        if lo < hi:
            s = truncated_normal(rng, mean_s, sel_sd, lo, hi)
            cand = sel + s * u
            if member(cand):
                sel = cand
    # orthogonal block: rejection from its unconstrained conditional
    span_part = Qx @ (Qx.T @ sel)
    m_perp = y_inter - Qx @ (Qx.T @ y_inter)
    for _ in range(50):
        z = rng.standard_normal(n)
        z_perp = m_perp + sel_sd * (z - Qx @ (Qx.T @ z))
        cand = span_part + z_perp
        if member(cand):
            sel = cand
            break
    return sel


def _chord_boundary(member, start: float, step: float, radius: float,
                    bisect_iters: int = 15) -> float:
    """Boundary of {s : member(s)} from a feasible start, moving by step's
    sign: doubling expansion capped at |s - start| <= radius, then bisection.
    The cap truncates a chord carrying negligible target mass."""
    inner = start
    outer = None
    width = abs(step)
    sgn = np.sign(step)
    while abs(inner - start) < radius:
        cand = inner + sgn * width
        if member(cand):
            inner = cand
            width *= 2.0
        else:
            outer = cand
            break
    if outer is None:
        return inner
    for _ in range(bisect_iters):
        mid = 0.5 * (inner + outer)
        if member(mid):
            inner = mid
        else:
            outer = mid
    return inner


def gibbs_chain(cascade: RandomizationCascade, X, selection: CVSelection,
                target_j: int, config: ChainConfig, K: int = 5,
                cv_every: int = 10, cv_attempt_cap: int = 500) -> GibbsResult:
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    v = cascade.variances
    lam = selection.lambda_hat
    grid = selection.grid
    E, signs = selection.active, selection.signs
    if not _model_matches(X, cascade.y_select, lam, E, signs):
        raise SelectionViolatedError("y_select does not reproduce the model")

    member = sqrt_lasso_region(X, E, signs, lam)
    Qx, _ = np.linalg.qr(X)

    E_minus_j = E[E != target_j]
    if E_minus_j.size:
        Q, _ = np.linalg.qr(X[:, E_minus_j])
    else:
        Q = np.zeros((n, 0))

    def proj_keep(vec):  # P_{E \ j} vec
        return Q @ (Q.T @ vec) if Q.shape[1] else np.zeros(n)

    y = cascade.y.copy()
    y_inter = cascade.y_inter.copy()
    y_cv = cascade.y_cv.copy()
    y_sel = cascade.y_select.copy()
    keep = proj_keep(y)

    prec_sum = 1.0 / v.sigma1_sq + 1.0 / v.sigma2_cv_sq + 1.0 / v.sigma2_select_sq
    inter_sd = np.sqrt(1.0 / prec_sum)
    shrink = v.sigma_sq / (v.sigma_sq + v.sigma1_sq)
    free_sd = np.sqrt(1.0 / (1.0 / v.sigma_sq + 1.0 / v.sigma1_sq))

    rng = np.random.default_rng(config.seed)
    total = config.burn_in + config.draws * max(config.thin, 1)
    xj = X[:, target_j]
    out = np.empty(config.draws)
    kept = 0
    cv_updates = 0
    cv_failures = 0
    sel_sd = np.sqrt(v.sigma2_select_sq)
    cv_sd = np.sqrt(v.sigma2_cv_sq)

    for sweep in range(total):
        # step 1: y_cv by rejection, only every cv_every-th sweep
        if sweep % cv_every == 0:
            for attempt in range(cv_attempt_cap):
                prop = y_inter + cv_sd * rng.standard_normal(n)
                fold_seed = int(rng.integers(2 ** 62))
                if cv_lambda(prop, X, grid, K, fold_seed) == lam:
                    y_cv = prop
                    cv_updates += 1
                    break
            else:
                cv_failures += 1  # stale y_cv retained

        # step 2: y_select inside the sign/active region
        y_sel = _select_step(rng, y_sel, y_inter, member, Qx, sel_sd,
                             n_chords=max(p, 4))

        # step 3: y_inter in closed form
        m = (y / v.sigma1_sq + y_cv / v.sigma2_cv_sq
             + y_sel / v.sigma2_select_sq) / prec_sum
        y_inter = m + inter_sd * rng.standard_normal(n)

        # step 4: y on the component orthogonal to P_{E \ j} y
        f_obs = y_inter - proj_keep(y_inter)
        z = rng.standard_normal(n)
        y = keep + shrink * f_obs + free_sd * (z - proj_keep(z))
        drift = np.max(np.abs(proj_keep(y) - keep)) if Q.shape[1] else 0.0
        if drift > 1e-9:
            raise SelectionViolatedError("fixed projection drifted")

        if sweep >= config.burn_in and (sweep - config.burn_in) % max(config.thin, 1) == 0:
            if kept < config.draws:
                out[kept] = xj @ y
                kept += 1
    return GibbsResult(samples=out[:kept], y_cv_updates=cv_updates,
                       y_cv_failures=cv_failures)
