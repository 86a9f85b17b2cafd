"""Dense numerical kernels: least squares, symmetric eigensolver, Gauss
quadrature and 1-D linear interpolation.

All functions are pure and operate on plain numpy arrays, so they are safe
to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_matrix, check_positive_int, check_vector

# Relative singular-value cutoff used for rank detection in least squares.
RANK_RCOND = 1e-12


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Minimum-norm least-squares solution of ``design @ c = targets``.

    Attributes
    ----------
    coefficients : ndarray of shape (n_cols,)
    residual_sum_squares : float
    rank : int
        Numerical rank of the design matrix.
    """

    coefficients: np.ndarray
    residual_sum_squares: float
    rank: int


def solve_ols(design, targets) -> LeastSquaresSolution:
    """Solve an ordinary least-squares problem by orthogonal factorization.

    Uses an SVD-based LAPACK driver, which returns the minimum-norm
    solution for rank-deficient systems. The normal equations are never
    formed explicitly.

    Parameters
    ----------
    design : array-like of shape (n_rows, n_cols)
    targets : array-like of shape (n_rows,)

    Returns
    -------
    LeastSquaresSolution
    """
    a = check_matrix(design, "design")
    b = check_vector(targets, "targets", length=a.shape[0])
    coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=RANK_RCOND)
    rss = float(np.sum((a @ coef - b) ** 2))
    return LeastSquaresSolution(coef, rss, int(rank))


def eig_symmetric(m, sym_rtol=1e-12):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    m : array-like, square and symmetric to within ``sym_rtol`` relative
        to its largest absolute entry.
    sym_rtol : float
        Allowed relative asymmetry.

    Returns
    -------
    eigenvalues : ndarray of shape (n,), sorted descending
    eigenvectors : ndarray of shape (n, n)
        Orthonormal columns aligned with the eigenvalues. The sign of each
        column is fixed so its largest-magnitude entry is positive.
    """
    a = check_matrix(m, "matrix", square=True)
    scale = np.max(np.abs(a)) or 1.0
    if np.max(np.abs(a - a.T)) > sym_rtol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    # Deterministic sign convention.
    flip = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    return w, v


def gauss_quadrature_nodes(family, order):
    """Gauss quadrature rule against a probability weight.

    Parameters
    ----------
    family : {"legendre", "hermite"}
        "legendre" integrates against the uniform density 1/2 on [-1, 1];
        "hermite" against the standard normal density (probabilists'
        convention).
    order : int
        Number of nodes; exact for polynomials up to degree 2*order - 1.

    Returns
    -------
    nodes, weights : ndarray of shape (order,)
        Weights sum to 1.
    """
    check_positive_int(order, "order")
    if family == "legendre":
        nodes, weights = np.polynomial.legendre.leggauss(order)
        return nodes, weights / 2.0
    if family == "hermite":
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        return nodes * np.sqrt(2.0), weights / np.sqrt(np.pi)
    raise ValueError(f"unsupported quadrature family: {family!r}")


def interp_linear(grid_x, grid_y, query, clamp=False):
    """Piecewise-linear interpolation on a strictly increasing grid.

    Parameters
    ----------
    grid_x : array-like, strictly increasing abscissae
    grid_y : array-like, same length as ``grid_x``
    query : array-like of evaluation points
    clamp : bool
        If False (default), queries outside the grid range raise; if True,
        they are clamped to the boundary values.

    Returns
    -------
    ndarray with the shape of ``query``
    """
    x = check_vector(grid_x, "grid_x")
    y = check_vector(grid_y, "grid_y", length=x.shape[0])
    if x.shape[0] < 2:
        raise ValueError("grid_x needs at least two points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("grid_x must be strictly increasing")
    q = np.asarray(query, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("query contains non-finite entries")
    if not clamp and (q.min() < x[0] or q.max() > x[-1]):
        raise ValueError(
            "query outside interpolation range "
            f"[{x[0]}, {x[-1]}]; pass clamp=True to extend by boundary values"
        )
    return np.interp(q, x, y)
