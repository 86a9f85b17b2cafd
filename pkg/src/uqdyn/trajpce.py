"""Trajectory surrogates for parameter-driven dynamical systems:
principal-component compression of a trajectory ensemble with polynomial
chaos expansions of the retained score variables, and the time-frozen
baseline that fits an independent sparse expansion at every time instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import json
import os

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError

from ._regression import fit_sparse
from .dynmodels import TimeGrid
from .pce import PceBasis, PolynomialChaosRegressor, total_degree_indices
from .randvars import SampleSet
from .validation import check_matrix, check_samples


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Stack of trajectories sharing one time grid, one row per realization."""

    grid: TimeGrid
    values: np.ndarray
    inputs: SampleSet | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.steps:
            raise ValueError("values must be (n_traces, grid.steps)")
        object.__setattr__(self, "values", v)
        if self.inputs is not None and self.inputs.values.shape[0] != v.shape[0]:
            raise ValueError("inputs must have one row per trajectory")

    @property
    def n_traces(self):
        return self.values.shape[0]


@dataclass
class PcaReduction:
    """Mean curve, eigenmodes and eigenvalues retained from an ensemble.

    ``modes`` has one unit-norm column per retained component; eigenvalues
    are in descending order and sum to ``explained_fraction`` times the
    total variance.
    """

    mean: np.ndarray
    modes: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float
    explained_fraction: float = field(init=False)

    def __post_init__(self):
        kept = float(np.sum(self.eigenvalues))
        self.explained_fraction = kept / self.total_variance if self.total_variance > 0 else 1.0

    @property
    def n_components(self):
        return self.modes.shape[1]


def fit_pca(values, epsilon=0.01):
    """Principal component analysis of a trajectory ensemble.

    Keeps the smallest number of components whose eigenvalues sum to at
    least (1 - epsilon) of the total variance. The empirical covariance
    uses the 1/(N-1) normalization; when there are fewer trajectories than
    time steps the eigenproblem is solved through the N x N Gram matrix,
    which has the same nonzero spectrum.

    Parameters
    ----------
    values : ndarray of shape (n_traces, n_steps)
    epsilon : float in (0, 1)
        Unexplained-variance budget.

    Returns
    -------
    PcaReduction
    """
    y = check_matrix(values, "values")
    n, q = y.shape
    if n < 2:
        raise ValueError("need at least 2 trajectories")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    mean = y.mean(axis=0)
    centered = y - mean
    # Variance below the centering round-off level counts as zero.
    rms = float(np.sqrt(np.mean(y**2)))
    floor = (1e-12 * max(rms, 1e-300)) ** 2 * q
    if n <= q:
        gram = centered @ centered.T / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1]
        eigvals = np.clip(eigvals[order], 0.0, None)
        eigvecs = eigvecs[:, order]
        total = float(np.trace(gram))
        lead = eigvals[0] if eigvals.size else 0.0
        positive = eigvals > max(1e-14 * lead, floor)
        keep = np.flatnonzero(positive)
        modes_full = np.zeros((q, keep.size))
        for col, j in enumerate(keep):
            modes_full[:, col] = centered.T @ eigvecs[:, j] / np.sqrt((n - 1) * eigvals[j])
        eigvals = eigvals[keep]
    else:
        cov = centered.T @ centered / (n - 1)
        eigvals, modes_full = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        eigvals = np.clip(eigvals[order], 0.0, None)
        modes_full = modes_full[:, order]
        total = float(np.trace(cov))
        lead = eigvals[0] if eigvals.size else 0.0
        positive = eigvals > max(1e-14 * lead, floor)
        eigvals = eigvals[positive]
        modes_full = modes_full[:, positive]

    if eigvals.size == 0:
        return PcaReduction(mean=mean, modes=np.zeros((q, 0)),
                            eigenvalues=np.zeros(0), total_variance=0.0)

    cumulative = np.cumsum(eigvals)
    target = (1.0 - epsilon) * total
    reached = np.flatnonzero(cumulative >= target * (1.0 - 1e-12))
    m = int(reached[0]) + 1 if reached.size else eigvals.size
    modes = modes_full[:, :m]
    # Deterministic sign: largest-magnitude entry of each mode is positive.
    flip = modes[np.argmax(np.abs(modes), axis=0), np.arange(m)] < 0
    modes[:, flip] *= -1.0
    return PcaReduction(mean=mean, modes=modes, eigenvalues=eigvals[:m],
                        total_variance=total)


def project_scores(reduction: PcaReduction, values):
    """Score coefficients of one trajectory (or a stack) by projection of
    the centered values onto the eigenmodes."""
    y = np.asarray(values, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != reduction.mean.shape[0]:
        raise ValueError("trajectory length does not match the reduction")
    scores = (y - reduction.mean) @ reduction.modes
    return scores[0] if single else scores


def reconstruct(reduction: PcaReduction, scores):
    """Inverse of :func:`project_scores`: mean plus the weighted modes."""
    z = np.atleast_2d(np.asarray(scores, dtype=float))
    out = reduction.mean + z @ reduction.modes.T
    return out[0] if np.asarray(scores).ndim == 1 else out


class PcaPceSurrogate(BaseEstimator):
    """Trajectory surrogate: principal-component compression of the training
    ensemble and one sparse polynomial chaos expansion per retained score.

    Parameters
    ----------
    random_vector : RandomVector
        Input distribution.
    epsilon : float
        Unexplained-variance budget of the compression.
    score_pce : PolynomialChaosRegressor, optional
        Template estimator cloned for each score variable. Defaults to an
        adaptive sparse expansion of maximum degree 5.

    Attributes
    ----------
    reduction_ : PcaReduction
    score_models_ : list of fitted PolynomialChaosRegressor, one per mode
    """

    def __init__(self, random_vector=None, epsilon=0.01, score_pce=None):
        self.random_vector = random_vector
        self.epsilon = epsilon
        self.score_pce = score_pce

    def _template(self):
        if self.score_pce is not None:
            template = clone(self.score_pce)
        else:
            template = PolynomialChaosRegressor(degree=5, solver="lars",
                                                adaptive_degree=True)
        template.set_params(random_vector=self.random_vector)
        return template

    def fit(self, X, Y):
        """Fit from input samples ``X`` (n, M) and the aligned trajectory
        matrix ``Y`` (n, Q)."""
        if self.random_vector is None:
            raise ValueError("random_vector must be set before fitting")
        x = check_samples(X, self.random_vector.dim)
        y = check_matrix(Y, "Y")
        if x.shape[0] != y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        self.reduction_ = fit_pca(y, epsilon=self.epsilon)
        scores = project_scores(self.reduction_, y)
        self.score_models_ = [
            self._template().fit(x, scores[:, j])
            for j in range(self.reduction_.n_components)
        ]
        self.n_features_in_ = x.shape[1]
        return self

    def predict_scores(self, X):
        if not hasattr(self, "reduction_"):
            raise NotFittedError("fit the surrogate before predicting")
        x = check_samples(X, self.random_vector.dim)
        if not self.score_models_:
            return np.zeros((x.shape[0], 0))
        return np.column_stack([m.predict(x) for m in self.score_models_])

    def predict(self, X):
        """Predicted trajectories, shape (n_points, Q)."""
        scores = self.predict_scores(X)
        return self.reduction_.mean + scores @ self.reduction_.modes.T

    def save_bundle(self, directory):
        """Write the surrogate as a directory artifact: the mean curve and
        eigenmodes as CSV plus one JSON file per score expansion."""
        if not hasattr(self, "reduction_"):
            raise NotFittedError("fit the surrogate before serializing")
        os.makedirs(directory, exist_ok=True)
        red = self.reduction_
        with open(os.path.join(directory, "mean.csv"), "w", encoding="utf-8") as f:
            f.write("index,value\n")
            for i, v in enumerate(red.mean):
                f.write(f"{i},{v:.17g}\n")
        with open(os.path.join(directory, "modes.csv"), "w", encoding="utf-8") as f:
            f.write("index," + ",".join(f"mode_{j+1}" for j in range(red.n_components)) + "\n")
            for i in range(red.mean.shape[0]):
                row = ",".join(f"{red.modes[i, j]:.17g}" for j in range(red.n_components))
                f.write(f"{i},{row}\n" if red.n_components else f"{i}\n")
        meta = {
            "eigenvalues": red.eigenvalues.tolist(),
            "total_variance": red.total_variance,
            "epsilon": self.epsilon,
            "n_components": red.n_components,
        }
        with open(os.path.join(directory, "reduction.json"), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=1)
        for j, model in enumerate(self.score_models_):
            model.save(os.path.join(directory, f"score_{j + 1}.json"))


class TimeFrozenPce(BaseEstimator):
    """Baseline trajectory surrogate: an independent sparse polynomial chaos
    expansion at every time instant, sharing one candidate basis but
    re-running the sparse selection per instant.

    Attributes
    ----------
    basis_ : PceBasis, the shared candidate basis
    coef_matrix_ : ndarray of shape (Q, n_candidates)
        Per-instant coefficients, zero outside each active set.
    loo_errors_ : ndarray of shape (Q,)
    """

    def __init__(self, random_vector=None, degree=3, max_terms=None):
        self.random_vector = random_vector
        self.degree = degree
        self.max_terms = max_terms

    def fit(self, X, Y):
        if self.random_vector is None:
            raise ValueError("random_vector must be set before fitting")
        x = check_samples(X, self.random_vector.dim)
        y = check_matrix(Y, "Y")
        if x.shape[0] != y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        basis = PceBasis(self.random_vector,
                         total_degree_indices(self.random_vector.dim, self.degree))
        psi = basis.evaluate(x)
        q = y.shape[1]
        coefs = np.zeros((q, basis.n_terms))
        loos = np.empty(q)
        for t in range(q):
            res = fit_sparse(psi, y[:, t], always_active=(0,), max_terms=self.max_terms)
            coefs[t, res.active] = res.coefficients
            loos[t] = res.loo_error
        self.basis_ = basis
        self.coef_matrix_ = coefs
        self.loo_errors_ = loos
        self.n_features_in_ = x.shape[1]
        return self

    def predict(self, X):
        """Predicted trajectories, shape (n_points, Q)."""
        if not hasattr(self, "coef_matrix_"):
            raise NotFittedError("fit the surrogate before predicting")
        x = check_samples(X, self.random_vector.dim)
        return self.basis_.evaluate(x) @ self.coef_matrix_.T
