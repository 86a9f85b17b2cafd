"""Shared regression machinery: full least squares with leave-one-out
diagnostics, least-angle candidate ranking, and the hybrid path fit that
re-solves ordinary least squares on growing active sets and picks the set
with the lowest leave-one-out error.

Leave-one-out errors use the closed-form leverage identity
``e_i = (y_i - yhat_i) / (1 - h_i)`` and are reported relative to the
sample variance of the targets (absolute when that variance vanishes).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.linear_model import lars_path

from .numerics import RANK_RCOND

_LEVERAGE_EPS = 1e-10


@dataclass
class SparseFitResult:
    """Active set, coefficients and error estimates of a sparse fit."""

    active: np.ndarray
    coefficients: np.ndarray
    loo_error: float
    train_error: float
    path_loo: np.ndarray


def _relative_errors(y, residuals, leverages):
    """(loo, train) errors of one model, relative to var(y) when possible."""
    n = y.shape[0]
    denom = 1.0 - leverages
    with np.errstate(divide="ignore", invalid="ignore"):
        loo_terms = np.where(denom > _LEVERAGE_EPS, (residuals / denom) ** 2, np.inf)
    loo = float(np.mean(loo_terms))
    train = float(np.mean(residuals**2))
    var_y = float(np.var(y, ddof=1)) if n > 1 else 0.0
    if var_y > 0.0:
        loo /= var_y
        train /= var_y
    return loo, train


def fit_ols_loo(design, y):
    """Minimum-norm least squares with leverage-based leave-one-out error.

    Returns
    -------
    coefficients, loo_error, train_error, rank
    """
    a = np.asarray(design, dtype=float)
    yv = np.asarray(y, dtype=float)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > RANK_RCOND * s[0] if s.size else np.zeros(0, dtype=bool)
    rank = int(np.count_nonzero(keep))
    uk = u[:, keep]
    coef = vt[keep].T @ ((uk.T @ yv) / s[keep])
    residuals = yv - a @ coef
    leverages = np.sum(uk**2, axis=1)
    loo, train = _relative_errors(yv, residuals, leverages)
    return coef, loo, train, rank


def lar_ranking(candidates, y, max_steps=None):
    """Rank candidate columns by least-angle entry order.

    Columns are centered and scaled to unit variance for the ranking only;
    zero-variance columns are excluded. Falls back to an absolute-correlation
    ordering if the path solver fails on degenerate inputs.

    Returns
    -------
    list of int
        Column indices in the order they enter the path.
    """
    x = np.asarray(candidates, dtype=float)
    yv = np.asarray(y, dtype=float)
    if x.shape[1] == 0:
        return []
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    usable = np.flatnonzero(sd > 1e-14 * (1.0 + np.abs(mu)))
    if usable.size == 0:
        return []
    xs = (x[:, usable] - mu[usable]) / sd[usable]
    yc = yv - yv.mean()
    if np.max(np.abs(yc)) == 0.0:
        return []
    if max_steps is None:
        max_steps = usable.size
    max_steps = min(max_steps, usable.size)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, order, _ = lars_path(xs, yc, method="lar", max_iter=max_steps)
        order = list(order)
    except Exception:
        corr = np.abs(xs.T @ yc)
        order = list(np.argsort(-corr, kind="stable")[:max_steps])
    return [int(usable[j]) for j in order]


def prefix_loo_path(design_ordered, y):
    """Leave-one-out and training errors of every prefix of an ordered
    design matrix, from one QR factorization.

    Prefix k uses the first k columns. Requires n_rows >= n_cols.

    Returns
    -------
    loos, trains : ndarray of shape (n_cols,)
    q, r : the QR factors, for coefficient recovery
    """
    a = np.asarray(design_ordered, dtype=float)
    yv = np.asarray(y, dtype=float)
    q, r = np.linalg.qr(a)
    qty = q.T @ yv
    fitted = np.cumsum(q * qty[None, :], axis=1)
    lev = np.cumsum(q**2, axis=1)
    n, k = a.shape
    loos = np.empty(k)
    trains = np.empty(k)
    for j in range(k):
        loos[j], trains[j] = _relative_errors(yv, yv - fitted[:, j], lev[:, j])
    return loos, trains, q, r


def _prefix_coefficients(a, y, r, qty, k):
    """Coefficients of the k-column prefix; falls back to minimum-norm
    least squares when the triangular factor is numerically singular."""
    diag = np.abs(np.diag(r)[:k])
    if diag.size and np.min(diag) > RANK_RCOND * max(np.max(diag), 1.0):
        return solve_triangular(r[:k, :k], qty[:k], lower=False)
    coef, *_ = np.linalg.lstsq(a[:, :k], y, rcond=RANK_RCOND)  # pragma: no cover
    return coef


def fit_sparse(design, y, *, always_active=(0,), max_terms=None) -> SparseFitResult:
    """Hybrid sparse fit: least-angle ranking of the candidate columns,
    ordinary least squares re-solved for every prefix of the ranked path,
    and the prefix with the lowest leave-one-out error retained.

    Parameters
    ----------
    design : ndarray of shape (n, n_candidates)
        Full candidate matrix.
    y : ndarray of shape (n,)
    always_active : tuple of int
        Columns included in every model (the constant term by default).
    max_terms : int, optional
        Cap on the active-set size; defaults to min(n - 1, n_candidates).

    Returns
    -------
    SparseFitResult with ``active`` sorted ascending.
    """
    a = np.asarray(design, dtype=float)
    yv = np.asarray(y, dtype=float)
    n, n_cand = a.shape
    base = [int(j) for j in always_active]
    cap = min(n - 1, n_cand)
    if max_terms is not None:
        cap = min(cap, max(max_terms, len(base)))
    rest = [j for j in range(n_cand) if j not in base]
    ranked = lar_ranking(a[:, rest], yv, max_steps=max(cap - len(base), 0))
    order = base + [rest[j] for j in ranked]
    order = order[:cap] if cap >= len(base) else base
    loos, trains, q, r = prefix_loo_path(a[:, order], yv)
    # Prefixes smaller than the always-active block are not models.
    start = max(len(base), 1) - 1
    best = start + int(np.argmin(loos[start:]))
    coef = _prefix_coefficients(a[:, order], yv, r, q.T @ yv, best + 1)
    active = np.array(order[: best + 1])
    sort = np.argsort(active)
    return SparseFitResult(
        active=active[sort],
        coefficients=np.asarray(coef)[sort],
        loo_error=float(loos[best]),
        train_error=float(trains[best]),
        path_loo=loos,
    )
