"""Polynomial NARX models: lag-vector construction, polynomial regressor
bases over the lags, least-squares or sparse training across an ensemble of
excitation/response traces, and the iterative forecast closure that feeds
predictions back into the lag vector.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._regression import fit_sparse, lar_ranking
from .numerics import solve_ols
from .pce import total_degree_indices
from .validation import check_positive_int


class ForecastDivergenceError(RuntimeError):
    """Raised when a forecast exceeds the divergence guard."""

    def __init__(self, step, limit):
        super().__init__(
            f"forecast diverged at step {step}: |prediction| exceeded {limit:.3g}"
        )
        self.step = step
        self.limit = limit


@dataclass(frozen=True)
class LagConfig:
    """Model orders of a NARX lag vector.

    ``n_y`` autoregressive lags (response values strictly before t) and,
    per exogenous input i, the ``n_x[i] + 1`` values from the current time
    back to the stated order.
    """

    n_y: int
    n_x: tuple
    dt: float = 1.0

    def __post_init__(self):
        check_positive_int(self.n_y, "n_y")
        nx = tuple(int(v) for v in (self.n_x if isinstance(self.n_x, (tuple, list))
                                    else (self.n_x,)))
        if any(v < 0 for v in nx):
            raise ValueError("exogenous orders must be >= 0")
        object.__setattr__(self, "n_x", nx)

    @property
    def n_inputs(self):
        return len(self.n_x)

    @property
    def max_lag(self):
        return max(self.n_y, *self.n_x) if self.n_x else self.n_y

    @property
    def n_lags(self):
        return self.n_y + sum(v + 1 for v in self.n_x)

    def lag_sources(self):
        """Ordered (source, delay) pairs defining the lag vector: response
        delays 1..n_y, then for each input the delays 0..n_x[i]."""
        spec = [("y", d) for d in range(1, self.n_y + 1)]
        for i, order in enumerate(self.n_x):
            spec.extend((i, d) for d in range(order + 1))
        return spec


def _as_trace(x, n_inputs=None):
    """Coerce one excitation trace to shape (Q, M)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("excitation trace must be 1-D or 2-D")
    if n_inputs is not None and arr.shape[1] != n_inputs:
        raise ValueError(f"expected {n_inputs} excitation columns, got {arr.shape[1]}")
    return arr


def build_lag_vector(cfg: LagConfig, x, y, t_index):
    """Lag vector at one time index from true signals.

    Parameters
    ----------
    cfg : LagConfig
    x : array of shape (Q,) or (Q, M), excitation trace
    y : array of shape (Q,), response trace
    t_index : int, target index; must be at least ``cfg.max_lag``

    Returns
    -------
    ndarray of shape (cfg.n_lags,)
    """
    xm = _as_trace(x, cfg.n_inputs)
    yv = np.asarray(y, dtype=float)
    if t_index < cfg.max_lag:
        raise IndexError(f"t_index must be >= {cfg.max_lag}")
    out = np.empty(cfg.n_lags)
    for j, (source, delay) in enumerate(cfg.lag_sources()):
        out[j] = yv[t_index - delay] if source == "y" else xm[t_index - delay, source]
    return out


def build_lag_matrix(cfg: LagConfig, x, y):
    """Lag matrix and aligned targets of one trace.

    Rows cover target indices max_lag..Q-1, so the matrix has
    Q - max_lag rows.
    """
    xm = _as_trace(x, cfg.n_inputs)
    yv = np.asarray(y, dtype=float)
    q = yv.shape[0]
    if xm.shape[0] != q:
        raise ValueError("excitation and response must share the grid")
    start = cfg.max_lag
    if q <= start:
        raise ValueError(f"trace must be longer than the largest lag ({start})")
    rows = q - start
    phi = np.empty((rows, cfg.n_lags))
    for j, (source, delay) in enumerate(cfg.lag_sources()):
        src = yv if source == "y" else xm[:, source]
        phi[:, j] = src[start - delay:q - delay]
    return phi, yv[start:]


def assemble_design(cfg: LagConfig, traces):
    """Stack per-trace lag matrices and targets over an experimental design.

    Parameters
    ----------
    traces : sequence of (x, y) pairs on a shared grid

    Returns
    -------
    lag_matrix : ndarray of shape (sum of per-trace rows, n_lags)
    targets : ndarray
    slices : list of slice, the row block of each trace
    """
    blocks, targets, slices = [], [], []
    offset = 0
    for x, y in traces:
        phi, tgt = build_lag_matrix(cfg, x, y)
        blocks.append(phi)
        targets.append(tgt)
        slices.append(slice(offset, offset + phi.shape[0]))
        offset += phi.shape[0]
    return np.vstack(blocks), np.concatenate(targets), slices


class MonomialBasis:
    """Multivariate monomials over the lag variables, total degree bounded,
    cross terms and the constant included."""

    def __init__(self, exponents):
        e = np.asarray(exponents, dtype=int)
        if e.ndim != 2 or np.any(e < 0):
            raise ValueError("exponents must be a 2-D non-negative integer array")
        if np.unique(e, axis=0).shape[0] != e.shape[0]:
            raise ValueError("monomials must be distinct")
        self.exponents = e

    @classmethod
    def total_degree(cls, n_vars, degree):
        return cls(total_degree_indices(n_vars, degree))

    @property
    def n_terms(self):
        return self.exponents.shape[0]

    @property
    def n_vars(self):
        return self.exponents.shape[1]

    def subset(self, columns):
        return MonomialBasis(self.exponents[np.asarray(columns, dtype=int)])

    def evaluate(self, lags, chunk_rows=None):
        """Evaluate all monomials at the given lag vectors.

        Parameters
        ----------
        lags : ndarray of shape (n, n_vars)
        chunk_rows : int, optional
            Row-block size; bounds transient memory for large bases.

        Returns
        -------
        ndarray of shape (n, n_terms)
        """
        phi = np.asarray(lags, dtype=float)
        if phi.ndim == 1:
            phi = phi[None, :]
        if phi.shape[1] != self.n_vars:
            raise ValueError(f"expected {self.n_vars} lag columns, got {phi.shape[1]}")
        n = phi.shape[0]
        if chunk_rows is None:
            chunk_rows = max(1, int(2.0e7 / max(self.n_terms, 1)))
        out = np.empty((n, self.n_terms))
        max_exp = self.exponents.max(axis=0)
        for start in range(0, n, chunk_rows):
            block = phi[start:start + chunk_rows]
            res = np.ones((block.shape[0], self.n_terms))
            for j in range(self.n_vars):
                if max_exp[j] == 0:
                    continue
                table = np.empty((block.shape[0], max_exp[j] + 1))
                table[:, 0] = 1.0
                for e in range(1, max_exp[j] + 1):
                    table[:, e] = table[:, e - 1] * block[:, j]
                res *= table[:, self.exponents[:, j]]
            out[start:start + block.shape[0]] = res
        return out


def _normalize_ensemble(excitations, responses, n_inputs=None):
    xs = [_as_trace(x, n_inputs) for x in excitations]
    ys = [np.asarray(y, dtype=float) for y in responses]
    if len(xs) != len(ys):
        raise ValueError("need one response trace per excitation trace")
    for x, y in zip(xs, ys):
        if x.shape[0] != y.shape[0]:
            raise ValueError("each excitation/response pair must share the grid")
    return xs, ys


def _coerce_init(init, n_traces, prefix_len):
    if isinstance(init, str):
        if init != "zeros":
            raise ValueError("init must be 'zeros' or an array of prefix values")
        return np.zeros((n_traces, prefix_len))
    arr = np.asarray(init, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr[None, :], (n_traces, 1))
    if arr.shape[0] != n_traces or arr.shape[1] < prefix_len:
        raise ValueError(
            f"init must provide at least {prefix_len} values per trace")
    return arr[:, :prefix_len].copy()


def forecast_trajectories(cfg: LagConfig, basis: MonomialBasis, coefficients,
                          excitations, init="zeros", guard_limit=np.inf):
    """Iterative forecast closure for a batch of excitations.

    Each predicted value feeds back into the lag vector of the following
    steps. The first max_lag values come from ``init`` ("zeros" or an array
    of true prefix values). Traces whose prediction magnitude exceeds
    ``guard_limit`` are flagged, and their remaining values are NaN.

    Parameters
    ----------
    coefficients : ndarray of shape (n_terms,) or (n_traces, n_terms)
        Shared or per-trace coefficients aligned with ``basis``.

    Returns
    -------
    predictions : ndarray of shape (n_traces, Q)
    diverged_at : int ndarray of shape (n_traces,), first bad step or -1
    """
    xs = [_as_trace(x, cfg.n_inputs) for x in excitations]
    q = xs[0].shape[0]
    if any(x.shape[0] != q for x in xs):
        raise ValueError("all excitations must share one grid")
    n = len(xs)
    x_arr = np.stack(xs)
    coefs = np.asarray(coefficients, dtype=float)
    per_trace = coefs.ndim == 2
    if per_trace and coefs.shape[0] != n:
        raise ValueError("need one coefficient row per trace")
    if coefs.shape[-1] != basis.n_terms:
        raise ValueError("coefficients do not match the basis size")

    start = cfg.max_lag
    if q <= start:
        raise ValueError(f"excitation must be longer than the largest lag ({start})")
    out = np.empty((n, q))
    out[:, :start] = _coerce_init(init, n, start)
    diverged_at = np.full(n, -1, dtype=int)
    sources = cfg.lag_sources()
    lag_block = np.empty((n, cfg.n_lags))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(start, q):
            for j, (source, delay) in enumerate(sources):
                lag_block[:, j] = (out[:, i - delay] if source == "y"
                                   else x_arr[:, i - delay, source])
            regs = basis.evaluate(lag_block)
            vals = (np.sum(regs * coefs, axis=1) if per_trace else regs @ coefs)
            bad = (~np.isfinite(vals)) | (np.abs(vals) > guard_limit)
            newly = bad & (diverged_at < 0)
            diverged_at[newly] = i
            vals = np.where(bad, np.nan, vals)
            out[:, i] = vals
    for idx in np.flatnonzero(diverged_at >= 0):
        out[idx, diverged_at[idx]:] = np.nan
    return out, diverged_at


class NarxRegressor(BaseEstimator):
    """Polynomial NARX surrogate of a scalar response driven by exogenous
    excitation traces.

    Parameters
    ----------
    n_y : int
        Autoregressive order.
    n_x : int or tuple of int
        Exogenous order(s), one per input signal.
    degree : int
        Total degree of the monomial regressor basis (constant included).
    solver : {"ols", "sparse"}
        "ols" solves the full basis by least squares; "sparse" ranks
        regressors by least-angle regression and keeps the leave-one-out
        optimal prefix, re-solved by least squares.
    selection : {"loo", "closure"}
        Prefix criterion of the sparse solver. "loo" minimizes the
        leave-one-out error of the one-step-ahead fit; "closure" re-solves
        geometrically spaced prefixes and keeps the one whose free-run
        forecasts of the training traces have the lowest median relative
        error (slower, but guards against one-step-optimal models with
        unstable closures).
    max_terms : int, optional
        Active-set cap for the sparse solver.
    dt : float
        Grid step, stored for bookkeeping.
    divergence_factor : float
        Forecast guard: predictions beyond this multiple of the training
        response range abort the trace.

    Attributes
    ----------
    lags_ : LagConfig
    basis_ : MonomialBasis of the active regressors
    coef_ : ndarray aligned with ``basis_``
    residual_variance_ : float, rss / (rows - rank)
    """

    def __init__(self, n_y=1, n_x=1, degree=1, solver="ols", selection="loo",
                 max_terms=None, dt=1.0, divergence_factor=1e6):
        self.n_y = n_y
        self.n_x = n_x
        self.degree = degree
        self.solver = solver
        self.selection = selection
        self.max_terms = max_terms
        self.dt = dt
        self.divergence_factor = divergence_factor

    def _lag_config(self, n_inputs):
        n_x = self.n_x if isinstance(self.n_x, (tuple, list)) else (self.n_x,) * n_inputs
        if len(n_x) != n_inputs:
            raise ValueError(f"n_x must provide one order per input ({n_inputs})")
        return LagConfig(n_y=self.n_y, n_x=tuple(n_x), dt=self.dt)

    def _closure_selected(self, cfg, candidate, regressors, targets, xs, ys,
                          score_xs=None):
        """Least-angle ranked prefixes, re-solved by least squares and
        scored by the median relative free-run error on the training
        traces. ``score_xs`` substitutes the excitations used for scoring
        (e.g. forecast-fed auxiliary signals in a chained model)."""
        n_rows = regressors.shape[0]
        cap = min(n_rows - 1, candidate.n_terms)
        if self.max_terms is not None:
            cap = min(cap, self.max_terms)
        # Ranking is insensitive to row subsampling; cap the cost on
        # very tall designs.
        stride = max(1, n_rows // 4000)
        ranked = lar_ranking(regressors[::stride, 1:], targets[::stride],
                             max_steps=cap - 1)
        order = [0] + [int(r + 1) for r in ranked]
        sizes = []
        size = 1
        while size < len(order):
            sizes.append(size)
            size = max(size + 1, int(round(size * 1.4)))
        sizes.append(len(order))
        guard = self.divergence_factor * max(
            float(np.max(np.abs(np.concatenate(ys)))), 1e-12)
        start = cfg.max_lag
        closure_xs = xs if score_xs is None else score_xs

        def evaluate(cols):
            coef, *_ = np.linalg.lstsq(regressors[:, cols], targets, rcond=1e-12)
            basis_k = candidate.subset(cols)
            preds, diverged = forecast_trajectories(
                cfg, basis_k, coef, closure_xs, init="zeros", guard_limit=guard)
            errors = np.empty(len(closure_xs))
            for i, y in enumerate(ys):
                if diverged[i] >= 0:
                    errors[i] = np.inf
                    continue
                scale = np.linalg.norm(y[start:]) or 1.0
                errors[i] = np.linalg.norm(preds[i, start:] - y[start:]) / scale
            return float(np.median(errors)), coef

        best = None
        for k in sizes:
            score, coef = evaluate(order[:k])
            if best is None or score < best[0] - 1e-12:
                best = (score, list(order[:k]), coef)
        # One local sweep around the winner: neighboring prefix sizes, then
        # single drop/add moves within the ranked pool.
        k_best = len(best[1])
        for k in {max(1, k_best - 2), max(1, k_best - 1), k_best + 1, k_best + 2}:
            if 1 <= k <= len(order) and k not in sizes:
                score, coef = evaluate(order[:k])
                if score < best[0] - 1e-12:
                    best = (score, list(order[:k]), coef)
        pool = order[: min(len(order), 2 * len(best[1]) + 8)]
        moves = ([[c for c in best[1] if c != drop] for drop in best[1] if drop != 0]
                 + [best[1] + [add] for add in pool if add not in best[1]])
        for cols in moves:
            score, coef = evaluate(cols)
            if score < best[0] - 1e-12:
                best = (score, cols, coef)
        _, cols, coef = best
        active = np.asarray(cols, dtype=int)
        sort = np.argsort(active)
        return active[sort], np.asarray(coef)[sort]

    def fit(self, excitations, responses, score_excitations=None):
        """Fit from aligned lists (or arrays) of excitation traces, each
        (Q,) or (Q, M), and response traces (Q,).

        ``score_excitations`` optionally replaces the excitations used by
        the closure-selection criterion, so a chained model can pick its
        structure under the signals it will actually receive at forecast
        time."""
        xs, ys = _normalize_ensemble(excitations, responses)
        cfg = self._lag_config(xs[0].shape[1])
        lag_matrix, targets, _ = assemble_design(cfg, list(zip(xs, ys)))
        candidate = MonomialBasis.total_degree(cfg.n_lags, self.degree)
        regressors = candidate.evaluate(lag_matrix)
        if self.solver == "ols":
            if regressors.shape[0] < candidate.n_terms:
                raise ValueError(
                    f"ols needs at least {candidate.n_terms} design rows, "
                    f"got {regressors.shape[0]}")
            sol = solve_ols(regressors, targets)
            if sol.rank < candidate.n_terms:
                warnings.warn(
                    f"rank-deficient regressor matrix (rank {sol.rank} of "
                    f"{candidate.n_terms}); minimum-norm solution used")
            active = np.arange(candidate.n_terms)
            coef = sol.coefficients
            rss, rank = sol.residual_sum_squares, sol.rank
        elif self.solver == "sparse" and self.selection == "loo":
            res = fit_sparse(regressors, targets, always_active=(0,),
                             max_terms=self.max_terms)
            active, coef = res.active, res.coefficients
            resid = targets - regressors[:, active] @ coef
            rss, rank = float(np.sum(resid**2)), len(active)
        elif self.solver == "sparse" and self.selection == "closure":
            score_xs = None
            if score_excitations is not None:
                score_xs = [_as_trace(x, cfg.n_inputs) for x in score_excitations]
            active, coef = self._closure_selected(cfg, candidate, regressors,
                                                  targets, xs, ys,
                                                  score_xs=score_xs)
            resid = targets - regressors[:, active] @ coef
            rss, rank = float(np.sum(resid**2)), len(active)
        else:
            raise ValueError(
                f"unknown solver/selection {self.solver!r}/{self.selection!r}")
        rows = regressors.shape[0]
        self.lags_ = cfg
        self.basis_ = candidate.subset(active)
        self.candidate_basis_ = candidate
        self.active_ = active
        self.coef_ = np.asarray(coef, dtype=float)
        self.residual_variance_ = rss / max(rows - rank, 1)
        self.training_range_ = float(np.max(np.abs(np.concatenate(ys)))) or 1.0
        self.n_features_in_ = cfg.n_lags
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("fit the model before predicting")

    @property
    def guard_limit_(self):
        return self.divergence_factor * self.training_range_

    def one_step_ahead(self, x, y):
        """One-step-ahead predictions with true lags, aligned with target
        indices max_lag..Q-1."""
        self._check_fitted()
        lag_matrix, _ = build_lag_matrix(self.lags_, x, y)
        return self.basis_.evaluate(lag_matrix) @ self.coef_

    def forecast(self, x, init="zeros"):
        """Forecast one excitation trace; raises on divergence."""
        self._check_fitted()
        preds, diverged = forecast_trajectories(
            self.lags_, self.basis_, self.coef_, [x], init=init,
            guard_limit=self.guard_limit_)
        if diverged[0] >= 0:
            raise ForecastDivergenceError(int(diverged[0]), self.guard_limit_)
        return preds[0]

    def forecast_ensemble(self, excitations, init="zeros"):
        """Forecast many excitations; diverged traces are flagged and
        NaN-filled rather than raising.

        Returns
        -------
        predictions : ndarray (n_traces, Q)
        diverged_at : int ndarray (n_traces,), first bad step or -1
        """
        self._check_fitted()
        return forecast_trajectories(
            self.lags_, self.basis_, self.coef_, excitations, init=init,
            guard_limit=self.guard_limit_)

    def to_dict(self):
        self._check_fitted()
        return {
            "n_y": self.lags_.n_y,
            "n_x": list(self.lags_.n_x),
            "dt": self.lags_.dt,
            "degree": self.degree,
            "exponents": self.basis_.exponents.tolist(),
            "coefficients": self.coef_.tolist(),
            "residual_variance": self.residual_variance_,
            "training_range": self.training_range_,
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(n_y=d["n_y"], n_x=tuple(d["n_x"]), degree=d["degree"], dt=d["dt"])
        model.lags_ = LagConfig(n_y=d["n_y"], n_x=tuple(d["n_x"]), dt=d["dt"])
        model.basis_ = MonomialBasis(np.asarray(d["exponents"], dtype=int))
        model.coef_ = np.asarray(d["coefficients"], dtype=float)
        model.residual_variance_ = d["residual_variance"]
        model.training_range_ = d["training_range"]
        model.n_features_in_ = model.lags_.n_lags
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
