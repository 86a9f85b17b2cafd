"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_matrix(a, name="matrix", square=False):
    """Coerce ``a`` to a 2-D float array with finite entries.

    Parameters
    ----------
    a : array-like
        Input to validate.
    name : str
        Label used in error messages.
    square : bool
        Require equal row and column counts.

    Returns
    -------
    ndarray of shape (n_rows, n_cols)
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def check_vector(v, name="vector", length=None):
    """Coerce ``v`` to a 1-D float array with finite entries."""
    x = np.asarray(v, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    if length is not None and x.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {x.shape[0]}")
    return x


def check_positive_int(value, name):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_samples(X, n_dims=None, name="X"):
    """Coerce sample points to a 2-D (n_points, n_dims) float array.

    A 1-D input is interpreted as a single point.
    """
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    if n_dims is not None and x.shape[1] != n_dims:
        raise ValueError(f"{name} must have {n_dims} columns, got {x.shape[1]}")
    return x
