"""Scalar polynomial chaos expansions on independent uniform/normal inputs:
total-degree multi-index sets, orthonormal tensor-product bases, ordinary
least-squares and sparse least-angle fitting, and prediction.
"""

from __future__ import annotations

import json
import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ._regression import fit_ols_loo, fit_sparse
from .randvars import Normal, RandomVector, Uniform
from .validation import check_samples, check_vector


def total_degree_indices(n_dims, degree):
    """All multi-indices of length ``n_dims`` with total degree <= ``degree``,
    in lexicographic order.

    Returns
    -------
    ndarray of shape (C(n_dims + degree, degree), n_dims), dtype int
    """
    if n_dims < 1:
        raise ValueError("n_dims must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    out = []

    def build(prefix, budget):
        if len(prefix) == n_dims:
            out.append(prefix)
            return
        for d in range(budget + 1):
            build(prefix + (d,), budget - d)

    build((), degree)
    return np.array(out, dtype=int)


def legendre_orthonormal(x, max_degree):
    """Legendre polynomials orthonormal w.r.t. the uniform density on
    [-1, 1], evaluated at ``x`` for all degrees 0..max_degree.

    Returns an array of shape ``x.shape + (max_degree + 1,)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = x
    for k in range(1, max_degree):
        out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
    return out * np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)


def hermite_orthonormal(x, max_degree):
    """Probabilists' Hermite polynomials orthonormal w.r.t. the standard
    normal density, evaluated at ``x`` for all degrees 0..max_degree."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = x
    for k in range(1, max_degree):
        out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
    scale = np.array([1.0 / math.sqrt(math.factorial(k)) for k in range(max_degree + 1)])
    return out * scale


_FAMILY_EVAL = {"legendre": legendre_orthonormal, "hermite": hermite_orthonormal}


def _basis_families(random_vector):
    families = []
    for m in random_vector.marginals:
        if isinstance(m, Uniform):
            families.append("legendre")
        elif isinstance(m, Normal):
            families.append("hermite")
        else:
            raise ValueError(
                f"marginal kind {m.kind!r} has no supported orthonormal polynomial family"
            )
    return tuple(families)


class PceBasis:
    """Orthonormal tensor-product polynomial basis over a random vector.

    Parameters
    ----------
    random_vector : RandomVector
        Input distribution; uniform marginals use normalized Legendre
        polynomials, normal marginals use normalized probabilists' Hermite
        polynomials.
    indices : array-like of shape (n_terms, n_dims)
        Multi-index set, one row per basis function.
    """

    def __init__(self, random_vector: RandomVector, indices):
        idx = np.asarray(indices, dtype=int)
        if idx.ndim != 2 or idx.shape[1] != random_vector.dim:
            raise ValueError("indices must have one column per input dimension")
        if np.any(idx < 0):
            raise ValueError("multi-indices must be non-negative")
        if np.unique(idx, axis=0).shape[0] != idx.shape[0]:
            raise ValueError("multi-indices must be pairwise distinct")
        self.random_vector = random_vector
        self.indices = idx
        self.families = _basis_families(random_vector)

    @classmethod
    def total_degree(cls, random_vector, degree):
        return cls(random_vector, total_degree_indices(random_vector.dim, degree))

    @property
    def n_terms(self):
        return self.indices.shape[0]

    def evaluate_standard(self, u):
        """Evaluate all basis functions at standardized points.

        Parameters
        ----------
        u : array-like of shape (n_points, n_dims) or (n_dims,)

        Returns
        -------
        ndarray of shape (n_points, n_terms)
        """
        u = check_samples(u, self.random_vector.dim, name="standardized points")
        out = np.ones((u.shape[0], self.n_terms))
        for j, family in enumerate(self.families):
            max_deg = int(self.indices[:, j].max())
            table = _FAMILY_EVAL[family](u[:, j], max_deg)
            out *= table[:, self.indices[:, j]]
        return out

    def evaluate(self, x):
        """Evaluate all basis functions at physical points."""
        x = check_samples(x, self.random_vector.dim)
        return self.evaluate_standard(self.random_vector.to_standard(x))

    def subset(self, columns):
        return PceBasis(self.random_vector, self.indices[np.asarray(columns, dtype=int)])


def build_information_matrix(basis: PceBasis, x_std):
    """Information matrix: entry (i, j) is basis function j evaluated at
    standardized sample i."""
    return basis.evaluate_standard(x_std)


class PolynomialChaosRegressor(BaseEstimator, RegressorMixin):
    """Scalar polynomial chaos surrogate.

    Parameters
    ----------
    random_vector : RandomVector
        Input distribution defining the orthonormal basis.
    degree : int
        Total degree of the candidate basis (the maximum degree when
        ``adaptive_degree`` is set).
    solver : {"lars", "ols"}
        "ols" solves the full candidate basis by least squares and requires
        at least as many samples as basis terms. "lars" ranks candidates by
        least-angle regression, re-solves least squares along the path and
        keeps the active set with the lowest leave-one-out error.
    adaptive_degree : bool
        Sweep candidate degrees 0..degree and keep the lowest
        leave-one-out error.
    max_terms : int, optional
        Cap on the sparse active-set size.

    Attributes
    ----------
    basis_ : PceBasis of the active terms
    coef_ : ndarray, coefficients aligned with ``basis_.indices``
    loo_error_ : float, relative leave-one-out error of the selected model
    train_error_ : float, relative training error
    degree_ : int, selected candidate degree
    """

    def __init__(self, random_vector=None, degree=3, solver="lars",
                 adaptive_degree=False, max_terms=None):
        self.random_vector = random_vector
        self.degree = degree
        self.solver = solver
        self.adaptive_degree = adaptive_degree
        self.max_terms = max_terms

    def _fit_candidate(self, u, y, degree):
        basis = PceBasis(self.random_vector, total_degree_indices(self.random_vector.dim, degree))
        psi = basis.evaluate_standard(u)
        if self.solver == "ols":
            if psi.shape[0] < psi.shape[1]:
                raise ValueError(
                    f"ols needs at least {psi.shape[1]} samples for degree {degree}, "
                    f"got {psi.shape[0]}"
                )
            coef, loo, train, _ = fit_ols_loo(psi, y)
            active = np.arange(basis.n_terms)
        elif self.solver == "lars":
            res = fit_sparse(psi, y, always_active=(0,), max_terms=self.max_terms)
            coef, loo, train, active = res.coefficients, res.loo_error, res.train_error, res.active
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        return basis, active, coef, loo, train

    def fit(self, X, y):
        if self.random_vector is None:
            raise ValueError("random_vector must be set before fitting")
        x = check_samples(X, self.random_vector.dim)
        yv = check_vector(y, "y", length=x.shape[0])
        u = self.random_vector.to_standard(x)
        degrees = list(range(self.degree + 1)) if self.adaptive_degree else [self.degree]
        if self.adaptive_degree and self.solver == "ols":
            degrees = [p for p in degrees
                       if math.comb(self.random_vector.dim + p, p) <= x.shape[0]]
            if not degrees:
                raise ValueError("too few samples for an ols fit at any candidate degree")
        best = None
        loo_by_degree = {}
        for p in degrees:
            candidate = self._fit_candidate(u, yv, p)
            loo_by_degree[p] = candidate[3]
            if best is None or candidate[3] < best[3]:
                best = candidate + (p,)
        basis, active, coef, loo, train, degree = best
        self.basis_ = basis.subset(active)
        self.coef_ = np.asarray(coef, dtype=float)
        self.loo_error_ = loo
        self.train_error_ = train
        self.degree_ = degree
        self.loo_by_degree_ = loo_by_degree
        self.n_features_in_ = x.shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("fit the surrogate before predicting")
        x = check_samples(X, self.random_vector.dim)
        out = self.basis_.evaluate(x) @ self.coef_
        return out if np.asarray(X).ndim > 1 else float(out[0])

    def to_dict(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("fit the surrogate before serializing")
        return {
            "random_vector": self.random_vector.to_dict(),
            "indices": self.basis_.indices.tolist(),
            "coefficients": self.coef_.tolist(),
            "degree": self.degree_,
            "loo_error": self.loo_error_,
            "train_error": self.train_error_,
        }

    @classmethod
    def from_dict(cls, d):
        rv = RandomVector.from_dict(d["random_vector"])
        model = cls(random_vector=rv, degree=d["degree"])
        model.basis_ = PceBasis(rv, np.asarray(d["indices"], dtype=int))
        model.coef_ = np.asarray(d["coefficients"], dtype=float)
        model.loo_error_ = d["loo_error"]
        model.train_error_ = d["train_error"]
        model.degree_ = d["degree"]
        model.n_features_in_ = rv.dim
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
