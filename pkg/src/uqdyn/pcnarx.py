"""Polynomial-chaos NARX: a family of NARX models over uncertain structural
parameters. One autoregressive model is fitted per experimental-design
trace on a shared regressor basis; each regression coefficient is then
surrogated over the structural parameters by an adaptive sparse polynomial
chaos expansion, and forecasting evaluates the surrogated coefficients
before running the standard closure.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._regression import fit_sparse
from .narx import (
    ForecastDivergenceError,
    LagConfig,
    MonomialBasis,
    _normalize_ensemble,
    build_lag_matrix,
    forecast_trajectories,
)
from .numerics import solve_ols
from .pce import PolynomialChaosRegressor
from .randvars import SampleSet
from .validation import check_samples


def _closure_score(cfg, basis, coefs, xs, ys, guard):
    """Median relative free-run error on the training traces, with the
    default zero initialization; diverged closures count as infinite."""
    start = cfg.max_lag
    preds, diverged = forecast_trajectories(cfg, basis, coefs, xs, init="zeros",
                                            guard_limit=guard)
    errors = np.empty(len(xs))
    for i, y in enumerate(ys):
        if diverged[i] >= 0:
            errors[i] = np.inf
            continue
        gap = preds[i, start:] - y[start:]
        scale = np.linalg.norm(y[start:]) or 1.0
        errors[i] = np.linalg.norm(gap) / scale
    return float(np.median(errors))


def select_common_basis(cfg: LagConfig, candidate: MonomialBasis, excitations,
                        responses, cap=None, condition_rtol=1e-3,
                        structural=None):
    """Select one regressor basis shared by every trace.

    Each trace is fitted sparsely on its own and candidate regressors are
    ranked by selection frequency (ties broken by mean absolute
    coefficient). Regressors numerically dependent on higher-ranked ones
    within any single trace's design are pruned, so the per-trace
    least-squares problems stay well posed and their coefficients remain
    comparable across traces. The basis size is then chosen along the
    ranked prefixes by the closed-loop criterion: per-trace models are
    re-fitted for every prefix and the prefix whose free-run forecasts of
    the training traces have the lowest median relative error wins. When
    ``structural`` provides (xi_values, random_vector), the prefixes are
    scored with coefficient expansions over the structural parameters in
    the loop, so the size is chosen for the surrogated model rather than
    the raw per-trace tables. The constant regressor is always kept and
    the size is capped at half the shortest trace's design rows.

    Returns
    -------
    ndarray of sorted candidate-column indices
    """
    xs, ys = _normalize_ensemble(excitations, responses, cfg.n_inputs)
    counts = np.zeros(candidate.n_terms)
    weight = np.zeros(candidate.n_terms)
    min_rows = None
    lag_matrices, target_list = [], []
    for x, y in zip(xs, ys):
        lag_matrix, targets = build_lag_matrix(cfg, x, y)
        lag_matrices.append(lag_matrix)
        target_list.append(targets)
        min_rows = lag_matrix.shape[0] if min_rows is None else min(min_rows, lag_matrix.shape[0])
        regs = candidate.evaluate(lag_matrix)
        res = fit_sparse(regs, targets, always_active=(0,))
        counts[res.active] += 1
        weight[res.active] += np.abs(res.coefficients)
    if cap is None:
        cap = max(min_rows // 2, 1)
    selected = np.flatnonzero(counts > 0)
    mean_abs = np.where(counts > 0, weight / np.maximum(counts, 1), 0.0)
    order = selected[np.lexsort((selected, -mean_abs[selected], -counts[selected]))]

    def prune(ordering):
        """Drop columns near-dependent on higher-ranked ones, judged by the
        per-trace QR diagonal decay. A column must be independent in at
        least 90% of the traces; the few traces left deficient are flagged
        and excluded later by the per-trace fit."""
        ordering = ordering[:min_rows]
        dependent = np.zeros(len(ordering))
        for lag_matrix in lag_matrices:
            regs = candidate.evaluate(lag_matrix)[:, ordering]
            diag = np.abs(np.diag(np.linalg.qr(regs, mode="r")))
            bad = np.ones(len(ordering), dtype=bool)
            bad[:diag.size] = diag <= condition_rtol * diag[0]
            dependent += bad
        keep = dependent <= 0.1 * len(lag_matrices)
        keep[0] = True
        return [c for c, k in zip(ordering, keep) if k][:cap]

    ordered = prune([0] + [int(j) for j in order if j != 0])
    # Second candidate family: the full degree-1 block first (the linear
    # lag terms stabilize the closure jointly), then ranked nonlinear terms.
    degree_one = [int(j) for j in np.flatnonzero(candidate.exponents.sum(axis=1) <= 1)]
    rank_pos = {int(j): p for p, j in enumerate(order)}
    linear_first = ([0]
                    + sorted((j for j in degree_one if j != 0),
                             key=lambda j: rank_pos.get(j, len(rank_pos)))
                    + [int(j) for j in order if j != 0 and j not in degree_one])
    ordered_linear = prune(linear_first)

    guard = 1e6 * max(float(np.max(np.abs(np.concatenate(ys)))), 1e-12)

    def score_active(active_list):
        active = np.sort(np.asarray(active_list, dtype=int))
        basis = candidate.subset(active)
        coefs = np.empty((len(xs), active.size))
        for i, (lag_matrix, targets) in enumerate(zip(lag_matrices, target_list)):
            coefs[i] = solve_ols(basis.evaluate(lag_matrix), targets).coefficients
        if structural is not None:
            xi_values, random_vector = structural
            smoothed = np.empty_like(coefs)
            for j in range(active.size):
                model = PolynomialChaosRegressor(
                    random_vector=random_vector, degree=3, solver="lars",
                    adaptive_degree=True, max_terms=10).fit(xi_values, coefs[:, j])
                smoothed[:, j] = model.predict(xi_values)
            coefs = smoothed
        return _closure_score(cfg, basis, coefs, xs, ys, guard)

    best_active, best_score = [0], np.inf
    for ordering in (ordered, ordered_linear):
        for size in range(1, len(ordering) + 1):
            score = score_active(ordering[:size])
            if score < best_score - 1e-12:
                best_active, best_score = ordering[:size], score
    # Bounded local search repairs orderings where an early ranked term
    # poisons every prefix.
    pool = list(dict.fromkeys(ordered + ordered_linear))
    for _ in range(2):
        moved = False
        candidates = ([[c for c in best_active if c != drop]
                       for drop in best_active if drop != 0]
                      + [best_active + [add] for add in pool
                         if add not in best_active])
        for trial in candidates:
            score = score_active(trial)
            if score < best_score - 1e-12:
                best_active, best_score, moved = trial, score, True
        if not moved:
            break
    return np.sort(np.asarray(best_active, dtype=int))


def fit_per_trace(cfg: LagConfig, basis: MonomialBasis, excitations, responses):
    """Fit one least-squares NARX per trace on the shared basis.

    Returns
    -------
    coefficients : ndarray of shape (n_traces, basis.n_terms)
    flagged : boolean ndarray, True where the per-trace design was
        rank-deficient (minimum-norm solution stored)
    """
    xs, ys = _normalize_ensemble(excitations, responses, cfg.n_inputs)
    coefs = np.empty((len(xs), basis.n_terms))
    flagged = np.zeros(len(xs), dtype=bool)
    for i, (x, y) in enumerate(zip(xs, ys)):
        lag_matrix, targets = build_lag_matrix(cfg, x, y)
        regs = basis.evaluate(lag_matrix)
        sol = solve_ols(regs, targets)
        coefs[i] = sol.coefficients
        flagged[i] = sol.rank < basis.n_terms
    return coefs, flagged


class PcNarxRegressor(BaseEstimator):
    """NARX surrogate whose regression coefficients vary with uncertain
    structural parameters through sparse polynomial chaos expansions.

    Parameters
    ----------
    random_vector : RandomVector
        Distribution of the structural parameters.
    n_y, n_x, degree : NARX model orders and basis degree, as in
        :class:`~uqdyn.narx.NarxRegressor`.
    d_pce : int
        Maximum candidate degree of the per-coefficient expansions; each is
        degree-adaptive with leave-one-out selection.
    max_terms : int, optional
        Cap on the shared regressor basis (default: half the shortest
        trace's design rows).
    pce_max_terms : int, optional
        Active-set cap of the coefficient expansions.
    dt : float
    divergence_factor : float

    Attributes
    ----------
    lags_ : LagConfig
    basis_ : shared MonomialBasis
    coef_table_ : per-trace coefficients, shape (n_kept, n_terms)
    coef_models_ : list of fitted PolynomialChaosRegressor, one per regressor
    flagged_ : boolean mask of traces excluded for rank deficiency
    """

    def __init__(self, random_vector=None, n_y=1, n_x=1, degree=1, d_pce=10,
                 max_terms=None, pce_max_terms=None, dt=1.0,
                 divergence_factor=1e6):
        self.random_vector = random_vector
        self.n_y = n_y
        self.n_x = n_x
        self.degree = degree
        self.d_pce = d_pce
        self.max_terms = max_terms
        self.pce_max_terms = pce_max_terms
        self.dt = dt
        self.divergence_factor = divergence_factor

    def fit(self, excitations, responses, xi):
        """Fit from excitation traces, response traces, and the matrix of
        structural-parameter realizations (one row per trace)."""
        if self.random_vector is None:
            raise ValueError("random_vector must be set before fitting")
        xi_values = xi.values if isinstance(xi, SampleSet) else np.asarray(xi, dtype=float)
        xi_values = check_samples(xi_values, self.random_vector.dim, name="xi")
        xs, ys = _normalize_ensemble(excitations, responses)
        if xi_values.shape[0] != len(xs):
            raise ValueError("need one structural-parameter row per trace")
        cfg = LagConfig(
            n_y=self.n_y,
            n_x=(self.n_x if isinstance(self.n_x, (tuple, list))
                 else (self.n_x,) * xs[0].shape[1]),
            dt=self.dt)
        candidate = MonomialBasis.total_degree(cfg.n_lags, self.degree)
        active = select_common_basis(cfg, candidate, xs, ys, cap=self.max_terms,
                                     structural=(xi_values, self.random_vector))
        basis = candidate.subset(active)
        coefs, flagged = fit_per_trace(cfg, basis, xs, ys)
        if flagged.any():
            warnings.warn(
                f"{int(flagged.sum())} trace(s) had rank-deficient designs and "
                "were excluded from the coefficient surrogates")
        keep = ~flagged
        if not keep.any():
            raise ValueError("every per-trace fit was rank-deficient")
        self.coef_models_ = [
            PolynomialChaosRegressor(
                random_vector=self.random_vector, degree=self.d_pce,
                solver="lars", adaptive_degree=True,
                max_terms=self.pce_max_terms,
            ).fit(xi_values[keep], coefs[keep, j])
            for j in range(basis.n_terms)
        ]
        self.lags_ = cfg
        self.basis_ = basis
        self.candidate_basis_ = candidate
        self.active_ = active
        self.coef_table_ = coefs[keep]
        self.flagged_ = flagged
        self.xi_train_ = xi_values[keep]
        self.training_range_ = float(np.max(np.abs(np.concatenate(ys)))) or 1.0
        self.n_features_in_ = self.random_vector.dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_models_"):
            raise NotFittedError("fit the model before predicting")

    @property
    def guard_limit_(self):
        return self.divergence_factor * self.training_range_

    def predict_coefficients(self, xi_points):
        """Surrogated NARX coefficients at structural-parameter points,
        shape (n_points, n_terms)."""
        self._check_fitted()
        pts = check_samples(xi_points, self.random_vector.dim, name="xi")
        return np.column_stack([m.predict(pts) for m in self.coef_models_])

    def forecast(self, x, xi_point, init="zeros"):
        """Forecast one excitation at one structural-parameter point."""
        self._check_fitted()
        coef = self.predict_coefficients(np.atleast_2d(np.asarray(xi_point, dtype=float)))[0]
        preds, diverged = forecast_trajectories(
            self.lags_, self.basis_, coef, [x], init=init,
            guard_limit=self.guard_limit_)
        if diverged[0] >= 0:
            raise ForecastDivergenceError(int(diverged[0]), self.guard_limit_)
        return preds[0]

    def forecast_ensemble(self, excitations, xi_points, init="zeros"):
        """Forecast many (excitation, structural point) pairs; diverged
        traces are flagged and NaN-filled.

        Returns
        -------
        predictions : ndarray (n_traces, Q)
        diverged_at : int ndarray (n_traces,)
        """
        self._check_fitted()
        coefs = self.predict_coefficients(xi_points)
        return forecast_trajectories(
            self.lags_, self.basis_, coefs, excitations, init=init,
            guard_limit=self.guard_limit_)
