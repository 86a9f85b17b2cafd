"""Validation metrics for ensembles of predicted trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import check_matrix


def point_in_time_error(reference, predicted):
    """Normalized point-in-time validation error.

    At each instant the mean squared prediction error is divided by the
    unbiased variance of the reference ensemble. Instants with zero
    reference variance report the absolute mean squared error and are
    flagged.

    Parameters
    ----------
    reference, predicted : ndarray of shape (n_traces, n_steps)

    Returns
    -------
    epsilon : ndarray of shape (n_steps,)
    absolute : boolean ndarray of shape (n_steps,)
        True where the error is absolute rather than relative.
    """
    y = check_matrix(reference, "reference")
    yhat = np.asarray(predicted, dtype=float)
    if yhat.shape != y.shape:
        raise ValueError("reference and predicted shapes differ")
    n = y.shape[0]
    if n < 2:
        raise ValueError("need at least 2 traces")
    mse = np.mean((y - yhat) ** 2, axis=0)
    variance = np.sum((y - y.mean(axis=0)) ** 2, axis=0) / (n - 1)
    absolute = variance <= 0.0
    epsilon = np.where(absolute, mse, mse / np.where(absolute, 1.0, variance))
    return epsilon, absolute


def ensemble_statistics(values):
    """Pointwise mean and unbiased standard deviation curves."""
    y = check_matrix(values, "values")
    if y.shape[0] < 2:
        raise ValueError("need at least 2 traces")
    return y.mean(axis=0), y.std(axis=0, ddof=1)


def relative_l2_errors(reference, predicted, burn_in=0):
    """Per-trace relative L2 forecast error over the horizon after the
    burn-in samples. Traces with non-finite predictions report inf."""
    y = np.asarray(reference, dtype=float)
    yhat = np.asarray(predicted, dtype=float)
    if yhat.shape != y.shape:
        raise ValueError("reference and predicted shapes differ")
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        diff = yhat[i, burn_in:] - y[i, burn_in:]
        if not np.all(np.isfinite(diff)):
            out[i] = np.inf
            continue
        scale = np.linalg.norm(y[i, burn_in:])
        out[i] = np.linalg.norm(diff) / (scale if scale > 0 else 1.0)
    return out


@dataclass
class ComparisonSummary:
    """Per-trace comparison of two surrogates on one validation set."""

    errors_a: np.ndarray
    errors_b: np.ndarray
    winners: list
    fraction_a_wins: float
    median_a: float
    median_b: float
    mean_difference: float


def compare_surrogates(errors_a, errors_b, tie_tol=1e-15) -> ComparisonSummary:
    """Compare per-trace errors of surrogates A and B.

    Ties split evenly between the two, so identical error tables give a
    50/50 outcome with zero mean difference. Non-finite errors lose
    against finite ones and tie with each other.
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("error tables must be 1-D and aligned")
    winners = []
    score = 0.0
    for ea, eb in zip(a, b):
        finite_a, finite_b = np.isfinite(ea), np.isfinite(eb)
        if not finite_a and not finite_b:
            winners.append("tie")
            score += 0.5
        elif finite_a != finite_b:
            winners.append("a" if finite_a else "b")
            score += 1.0 if finite_a else 0.0
        elif abs(ea - eb) <= tie_tol * max(abs(ea), abs(eb), 1.0):
            winners.append("tie")
            score += 0.5
        elif ea < eb:
            winners.append("a")
            score += 1.0
        else:
            winners.append("b")
    finite = np.isfinite(a) & np.isfinite(b)
    return ComparisonSummary(
        errors_a=a,
        errors_b=b,
        winners=winners,
        fraction_a_wins=score / a.shape[0],
        median_a=float(np.median(a)),
        median_b=float(np.median(b)),
        mean_difference=float(np.mean(a[finite] - b[finite])) if finite.any() else 0.0,
    )
