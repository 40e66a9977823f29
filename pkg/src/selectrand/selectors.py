"""Randomized selection procedures and their affine selection regions.

Solvers: coordinate-descent LASSO, square-root LASSO by iterated rescaling,
proximal-gradient randomized logistic LASSO, and the Newton restricted MLE.
Region builders turn a fitted active set and sign pattern into explicit
affine constraints on the response (and randomization), so downstream
samplers can condition on the selection event by linear algebra alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy.special import expit

from .errors import (
    ConvergenceError,
    DegenerateFitError,
    InvalidInputError,
    RankError,
    SeparationError,
)
from .gaussian_core import LinearizableStatistic

ACTIVE_TOL = 1e-8
_MAX_SWEEPS = 100_000


# ---------------------------------------------------------------------------
# coordinate descent core
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cd_lasso(X, y, lam, col_sq, beta, max_sweeps, rel_tol):
    n, p = X.shape
    r = y - X @ beta
    y_sq = 0.0
    for i in range(n):
        y_sq += y[i] * y[i]
    gap = np.inf
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        for j in range(p):
            bj = beta[j]
            rho = bj * col_sq[j]
            for i in range(n):
                rho += X[i, j] * r[i]
            if rho > lam:
                bn = (rho - lam) / col_sq[j]
            elif rho < -lam:
                bn = (rho + lam) / col_sq[j]
            else:
                bn = 0.0
            d = bn - bj
            if d != 0.0:
                for i in range(n):
                    r[i] -= X[i, j] * d
                beta[j] = bn
        # duality gap with the rescaled-residual dual point
        xr_inf = 0.0
        for j in range(p):
            v = 0.0
            for i in range(n):
                v += X[i, j] * r[i]
            av = abs(v)
            if av > xr_inf:
                xr_inf = av
        scale = 1.0
        if xr_inf > lam:
            scale = lam / xr_inf
        r_sq = 0.0
        ry = 0.0
        l1 = 0.0
        for i in range(n):
            r_sq += r[i] * r[i]
            ry += r[i] * y[i]
        for j in range(p):
            l1 += abs(beta[j])
        primal = 0.5 * r_sq + lam * l1
        dual = scale * ry - 0.5 * scale * scale * r_sq
        gap = primal - dual
        if gap <= rel_tol * (1.0 + abs(primal)):
            break
    return beta, gap, sweeps


@njit(cache=True)
def _sqrt_lasso_beta(X, y, lam, beta, max_outer=200):
    """Square-root LASSO coefficients by iterated rescaled coordinate
    descent, warm-started from beta. Returns (beta, resid_norm)."""
    col_sq = (X ** 2).sum(axis=0)
    r = y - X @ beta
    resid_norm = np.sqrt((r ** 2).sum())
    for _ in range(max_outer):
        prev = beta.copy()
        beta, _, _ = _cd_lasso(X, y, lam * resid_norm, col_sq, beta,
                               _MAX_SWEEPS, 1e-9)
        r = y - X @ beta
        resid_norm = np.sqrt((r ** 2).sum())
        if np.max(np.abs(beta - prev)) <= 1e-8:
            break
    return beta, resid_norm


@njit(cache=True)
def _cv_scores(X, y, grid_desc, fold_id, K):
    """Held-out squared error of square-root LASSO refits per penalty,
    warm-starting each fold's path from large to small penalties."""
    n, p = X.shape
    scores = np.zeros(grid_desc.size)
    for k in range(K):
        n_tr = 0
        for i in range(n):
            if fold_id[i] != k:
                n_tr += 1
        tr = np.empty(n_tr, dtype=np.int64)
        te = np.empty(n - n_tr, dtype=np.int64)
        a = 0
        b = 0
        for i in range(n):
            if fold_id[i] != k:
                tr[a] = i
                a += 1
            else:
                te[b] = i
                b += 1
        Xtr = X[tr]
        ytr = y[tr]
        beta = np.zeros(p)
        for g in range(grid_desc.size):
            beta, _ = _sqrt_lasso_beta(Xtr, ytr, grid_desc[g], beta)
            resid = y[te] - X[te] @ beta
            scores[g] += (resid ** 2).sum()
    return scores


@dataclass
class LassoFit:
    beta: np.ndarray
    active: np.ndarray
    signs: np.ndarray
    subgrad_inactive: np.ndarray
    lam: object
    objective: float
    gap: float = np.nan


def solve_lasso(X, y_star, lam: float) -> LassoFit:
    """Minimize 0.5 * ||y - X b||^2 + lam * ||b||_1 by coordinate descent."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y_star, dtype=float)
    if lam <= 0:
        raise InvalidInputError("lam must be positive")
    col_sq = (X ** 2).sum(axis=0)
    if np.any(col_sq <= 0):
        raise InvalidInputError("zero column in design")
    beta0 = np.zeros(X.shape[1])
    beta, gap, sweeps = _cd_lasso(X, y, float(lam), col_sq, beta0,
                                  _MAX_SWEEPS, 1e-9)
    obj = 0.5 * np.sum((y - X @ beta) ** 2) + lam * np.abs(beta).sum()
    if gap > 1e-9 * (1.0 + abs(obj)):
        raise ConvergenceError(
            f"coordinate descent did not close the duality gap ({gap:.3e})",
            achieved_gap=float(gap))
    active = np.flatnonzero(np.abs(beta) > ACTIVE_TOL)
    # ties at the threshold resolve to inactive, hence strict >
    beta = beta.copy()
    beta[np.abs(beta) <= ACTIVE_TOL] = 0.0
    inactive = np.setdiff1d(np.arange(X.shape[1]), active)
    r = y - X @ beta
    subgrad = X[:, inactive].T @ r / lam if inactive.size else np.empty(0)
    return LassoFit(beta=beta, active=active, signs=np.sign(beta[active]),
                    subgrad_inactive=subgrad, lam=lam, objective=float(obj),
                    gap=float(gap))


# ---------------------------------------------------------------------------
# affine selection regions
# ---------------------------------------------------------------------------

@dataclass
class AffineSelectionEvent:
    """{A r + B w <= b}; B is None when randomization enters as r = y + omega."""

    A: np.ndarray
    b: np.ndarray
    B: Optional[np.ndarray] = None
    scaling: str = "raw"
    rows: Optional[np.ndarray] = None  # response coordinates constrained

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        if self.B is not None:
            self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if self.A.shape[0] != self.b.size or self.A.shape[0] < 1:
            raise InvalidInputError("A and b row counts differ")

    def slack(self, r, omega=None):
        val = self.A @ np.asarray(r, dtype=float)
        if self.B is not None:
            if omega is None:
                raise InvalidInputError("event requires omega")
            val = val + self.B @ np.asarray(omega, dtype=float)
        return self.b - val

    def contains(self, r, omega=None, tol=1e-9) -> bool:
        return bool(np.all(self.slack(r, omega) >= -tol))


def lasso_affine_region(X, active, signs, lam) -> AffineSelectionEvent:
    """Polyhedron of responses r for which solve_lasso(X, r, lam) yields
    exactly the given active set and sign pattern."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    active = np.asarray(active, dtype=int)
    inactive = np.setdiff1d(np.arange(p), active)
    if active.size == 0:
        A = np.vstack([X.T, -X.T])
        b = np.full(2 * p, float(lam))
        return AffineSelectionEvent(A=A, b=b)
    XE = X[:, active]
    gram = XE.T @ XE
    if np.linalg.matrix_rank(gram) < active.size:
        raise RankError("active design is rank deficient")
    Minv = np.linalg.inv(gram)
    s = np.asarray(signs, dtype=float)
    Sd = np.diag(s)
    # sign rows: -S (X_E'X_E)^{-1} X_E' r <= -lam * S (X_E'X_E)^{-1} s
    A_sign = -Sd @ Minv @ XE.T
    b_sign = -lam * Sd @ Minv @ s
    if inactive.size == 0:
        return AffineSelectionEvent(A=A_sign, b=b_sign)
    proj = XE @ Minv @ XE.T
    resid_op = X[:, inactive].T @ (np.eye(X.shape[0]) - proj) / lam
    pinv_term = X[:, inactive].T @ XE @ Minv @ s
    A = np.vstack([A_sign, resid_op, -resid_op])
    b = np.concatenate([b_sign, 1.0 - pinv_term, 1.0 + pinv_term])
    return AffineSelectionEvent(A=A, b=b)


def split_select(X, y, rows, lam):
    """Select on a row subset; the region constrains only those response
    coordinates."""
    rows = np.asarray(rows, dtype=int)
    if rows.size < 2:
        raise InvalidInputError("need at least two rows in the split")
    fit = solve_lasso(X[rows], np.asarray(y, dtype=float)[rows], lam)
    event = lasso_affine_region(X[rows], fit.active, fit.signs, lam)
    event.rows = rows
    return fit, event


# ---------------------------------------------------------------------------
# square-root LASSO
# ---------------------------------------------------------------------------

def solve_sqrt_lasso(X, y, lam: float, max_outer: int = 200) -> LassoFit:
    """Minimize ||y - X b||_2 + lam * ||b||_1 by iterating the rescaled
    LASSO with penalty lam * ||current residual||."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    ynorm = np.linalg.norm(y)
    if ynorm < 1e-12:
        raise DegenerateFitError("response is identically zero")
    beta = np.zeros(X.shape[1])
    resid_norm = ynorm
    for _ in range(max_outer):
        fit = solve_lasso(X, y, lam * resid_norm)
        new_norm = np.linalg.norm(y - X @ fit.beta)
        if new_norm < 1e-10:
            raise DegenerateFitError("residual collapsed to zero")
        if np.max(np.abs(fit.beta - beta)) <= 1e-8:
            beta = fit.beta
            resid_norm = new_norm
            break
        beta = fit.beta
        resid_norm = new_norm
    else:
        raise ConvergenceError("square-root LASSO fixed point not reached")
    obj = resid_norm + lam * np.abs(beta).sum()
    active = np.flatnonzero(np.abs(beta) > ACTIVE_TOL)
    inactive = np.setdiff1d(np.arange(X.shape[1]), active)
    r = y - X @ beta
    subgrad = (X[:, inactive].T @ r / (lam * resid_norm)
               if inactive.size else np.empty(0))
    return LassoFit(beta=beta, active=active, signs=np.sign(beta[active]),
                    subgrad_inactive=subgrad, lam=lam, objective=float(obj))


def sqrt_lasso_region(X, active, signs, lam):
    """Closed-form membership test for the square-root LASSO's active set
    and sign pattern at fixed lam.

    The fit coincides with a LASSO at penalty lam * ||residual||, and the
    residual norm satisfies ||r||^2 = ||(I - P_E) y||^2 / (1 - lam^2 c) with
    c = s'(X_E'X_E)^{-1}s, so every KKT inequality becomes an explicit
    comparison against lam_tilde(y) = gamma * ||(I - P_E) y||.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    active = np.asarray(active, dtype=int)
    inactive = np.setdiff1d(np.arange(p), active)
    if active.size == 0:
        Xt = X.T

        def member(y):
            y = np.asarray(y, dtype=float)
            return float(np.max(np.abs(Xt @ y))) <= lam * np.linalg.norm(y)

        return member
    XE = X[:, active]
    M = np.linalg.inv(XE.T @ XE)
    s = np.asarray(signs, dtype=float)
    c = float(s @ M @ s)
    if lam * lam * c >= 1.0:
        return lambda y: False  # sign pattern unreachable at this penalty
    gamma = lam / np.sqrt(1.0 - lam * lam * c)
    SMXt = (M @ XE.T) * s[:, None]
    sMs = s * (M @ s)
    proj_rows = XE @ M @ XE.T
    Xi_perp = X[:, inactive].T @ (np.eye(X.shape[0]) - proj_rows)
    Ds = X[:, inactive].T @ XE @ M @ s if inactive.size else np.empty(0)

    def member(y):
        y = np.asarray(y, dtype=float)
        resid_perp = y - proj_rows @ y
        lam_t = gamma * np.linalg.norm(resid_perp)
        if np.any(SMXt @ y <= lam_t * sMs):
            return False
        if inactive.size:
            u = Xi_perp @ y + lam_t * Ds
            if np.max(np.abs(u)) > lam_t:
                return False
        return True

    return member


# ---------------------------------------------------------------------------
# randomized logistic LASSO
# ---------------------------------------------------------------------------

def _logistic_loss_grad(X, y, beta):
    lin = X @ beta
    pi = expit(lin)
    loss = np.sum(np.logaddexp(0.0, lin)) - y @ lin
    return loss, -X.T @ (y - pi)


def solve_randomized_logistic_lasso(X, y, weights, omega,
                                    max_iter: int = 100_000) -> LassoFit:
    """FISTA on  l(b)/sqrt(n) + w'b + ||b||^2/(2 sqrt n) + sum_j L_j |b_j|."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    lam = np.asarray(weights, dtype=float) * np.ones(p)
    if np.any(lam <= 0):
        raise InvalidInputError("penalty weights must be positive")
    omega = np.asarray(omega, dtype=float)
    rn = np.sqrt(n)
    L = np.linalg.norm(X, 2) ** 2 / (4.0 * rn) + 1.0 / rn

    def smooth_grad(b):
        _, g = _logistic_loss_grad(X, y, b)
        return g / rn + omega + b / rn

    def prox(v, step):
        return np.sign(v) * np.maximum(np.abs(v) - step * lam, 0.0)

    beta = np.zeros(p)
    z = beta.copy()
    t = 1.0
    for _ in range(max_iter):
        g = smooth_grad(z)
        beta_new = prox(z - g / L, 1.0 / L)
        gmap = L * (z - beta_new)
        if np.linalg.norm(gmap) <= 1e-8 and np.max(np.abs(beta_new - beta)) <= 1e-12:
            beta = beta_new
            break
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = beta_new + ((t - 1.0) / t_new) * (beta_new - beta)
        beta, t = beta_new, t_new
    else:
        raise ConvergenceError("proximal gradient did not converge")
    active = np.flatnonzero(np.abs(beta) > ACTIVE_TOL)
    inactive = np.setdiff1d(np.arange(p), active)
    loss, grad = _logistic_loss_grad(X, y, beta)
    # KKT: X'(y - pi)/sqrt(n) - omega - beta/sqrt(n) = Lam z
    kkt = -grad / rn - omega - beta / rn
    subgrad = kkt[inactive] / lam[inactive] if inactive.size else np.empty(0)
    obj = loss / rn + omega @ beta + beta @ beta / (2 * rn) + lam @ np.abs(beta)
    return LassoFit(beta=beta, active=active, signs=np.sign(beta[active]),
                    subgrad_inactive=subgrad, lam=lam, objective=float(obj))


def logistic_restricted_mle(X_E, y, tol: float = 1e-10,
                            max_iter: int = 200) -> np.ndarray:
    """Newton iteration for the unpenalized logistic MLE on the given columns."""
    X_E = np.atleast_2d(np.asarray(X_E, dtype=float))
    y = np.asarray(y, dtype=float)
    beta = np.zeros(X_E.shape[1])
    for _ in range(max_iter):
        lin = X_E @ beta
        pi = expit(lin)
        grad = X_E.T @ (y - pi)
        if np.linalg.norm(grad) <= tol:
            if np.max(np.abs(lin)) > 30.0:
                # gradient only vanished because the logits saturated
                raise SeparationError("MLE diverging, data likely separated")
            return beta
        w = pi * (1.0 - pi)
        hess = X_E.T @ (X_E * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError("singular information matrix") from exc
        beta = beta + step
        if np.linalg.norm(beta) > 1e3:
            raise SeparationError("MLE diverging, data likely separated")
    raise ConvergenceError("Newton iteration for the restricted MLE stalled")


@dataclass
class LogisticRegionMatrices:
    Q: np.ndarray
    C: np.ndarray
    D: np.ndarray
    A_M: np.ndarray
    B_M: np.ndarray
    b_M: np.ndarray
    beta_bar: np.ndarray
    T: LinearizableStatistic
    active: np.ndarray = field(default=None)
    signs: np.ndarray = field(default=None)
    perm: np.ndarray = field(default=None)  # (E, notE) coordinate order

    def contains(self, T_value, omega, n, tol=1e-9) -> bool:
        """T_value in (E, notE) order; omega in original coordinate order."""
        w = np.asarray(omega, dtype=float)[self.perm]
        lhs = np.sqrt(n) * (self.A_M @ np.asarray(T_value)) + self.B_M @ w
        return bool(np.all(lhs <= self.b_M + tol))


def logistic_region(X, y, fit: LassoFit, weights) -> LogisticRegionMatrices:
    """Affine region {sqrt(n) A_M T + B_M w <= b_M} for the randomized
    logistic LASSO's active set and signs, with plug-in information matrices
    at the restricted MLE."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    E = np.asarray(fit.active, dtype=int)
    if E.size == 0:
        raise InvalidInputError("active set is empty")
    s = np.asarray(fit.signs, dtype=float)
    lam = np.asarray(weights, dtype=float) * np.ones(p)
    notE = np.setdiff1d(np.arange(p), E)
    XE = X[:, E]
    beta_bar = logistic_restricted_mle(XE, y)
    pi = expit(XE @ beta_bar)
    w = pi * (1.0 - pi)
    Q = XE.T @ (XE * w[:, None]) / n
    if np.linalg.cond(Q) > 1e12:
        raise RankError("plug-in information matrix is singular")
    Qinv = np.linalg.inv(Q)
    C = X[:, notE].T @ (XE * w[:, None]) / n
    D = C @ Qinv
    k, m = E.size, notE.size
    SE = np.diag(s)
    lam_s = lam[E] * s

    A_M = np.zeros((k + 2 * m, k + m))
    B_M = np.zeros((k + 2 * m, k + m))
    A_M[:k, :k] = -SE
    A_M[k:k + m, k:] = np.eye(m)
    A_M[k + m:, k:] = -np.eye(m)
    B_M[:k, :k] = SE @ Qinv
    B_M[k:k + m, :k] = D
    B_M[k:k + m, k:] = -np.eye(m)
    B_M[k + m:, :k] = -D
    B_M[k + m:, k:] = np.eye(m)
    b_M = np.concatenate([-SE @ Qinv @ lam_s,
                          lam[notE] - D @ lam_s,
                          lam[notE] + D @ lam_s])

    score_inactive = X[:, notE].T @ (y - pi) / n
    T_val = np.concatenate([beta_bar, score_inactive])
    G = X[:, notE].T @ (X[:, notE] * w[:, None]) / n
    cov = np.zeros((k + m, k + m))
    cov[:k, :k] = Qinv
    cov[k:, k:] = G - C @ Qinv @ C.T
    T = LinearizableStatistic(value=T_val, cov=cov, n=n)
    return LogisticRegionMatrices(Q=Q, C=C, D=D, A_M=A_M, B_M=B_M, b_M=b_M,
                                  beta_bar=beta_bar, T=T, active=E, signs=s,
                                  perm=np.concatenate([E, notE]))
