"""Stochastic time warping: per-trace alignment of oscillatory trajectories
to a reference curve by an invertible rescaling of the time axis, resampling
of the warped traces on a common grid, and the full trajectory surrogate
that couples warping with PCA-compressed polynomial chaos expansions.

Warp families: "linear" (tau = k*t, one coefficient) and "affine"
(tau = k*t + shift, two coefficients), with k > 0 for invertibility.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError

from .pce import PolynomialChaosRegressor
from .trajpce import PcaPceSurrogate
from .validation import check_matrix, check_samples, check_vector

_FAMILIES = ("linear", "affine")
_MIN_OVERLAP_POINTS = 8


def warp_distance(y1, y2, dt):
    """Normalized cross-correlation of two curves on a shared uniform grid:
    |integral(y1*y2)| / (||y1||*||y2||) with trapezoidal integrals.

    Lies in [0, 1]; equals 1 exactly when the curves are proportional.
    """
    a = check_vector(y1, "y1")
    b = check_vector(y2, "y2", length=a.shape[0])
    na = math.sqrt(np.trapezoid(a * a, dx=dt))
    nb = math.sqrt(np.trapezoid(b * b, dx=dt))
    if na == 0.0 or nb == 0.0:
        raise ValueError("warp distance is undefined for an all-zero trajectory")
    return min(abs(float(np.trapezoid(a * b, dx=dt))) / (na * nb), 1.0)


@dataclass(frozen=True)
class WarpFit:
    """Fitted warp coefficients: (k,) for linear, (k, shift) for affine.

    ``improved`` is False when no candidate beat the identity warp and the
    identity coefficients were returned instead.
    """

    coefficients: np.ndarray
    distance: float
    improved: bool


def _identity_beta(family):
    return np.array([1.0]) if family == "linear" else np.array([1.0, 0.0])


def _warped_objective(values, ref, times, family):
    """Return f(beta) -> alignment distance of the warped curve vs the
    reference, evaluated over the overlap of the warped image with the
    reference horizon."""
    t_end = times[-1]
    dt = times[1] - times[0]

    def objective(beta):
        k = beta[0]
        shift = beta[1] if family == "affine" else 0.0
        if k <= 0.0:
            return -np.inf
        lo = max(0.0, shift)
        hi = min(t_end, k * t_end + shift)
        mask = (times >= lo) & (times <= hi)
        if np.count_nonzero(mask) < _MIN_OVERLAP_POINTS:
            return -np.inf
        tau = times[mask]
        warped = np.interp(np.clip((tau - shift) / k, 0.0, t_end), times, values)
        ref_part = ref[mask]
        na = math.sqrt(np.trapezoid(warped * warped, dx=dt))
        nb = math.sqrt(np.trapezoid(ref_part * ref_part, dx=dt))
        if na == 0.0 or nb == 0.0:
            return -np.inf
        return abs(float(np.trapezoid(warped * ref_part, dx=dt))) / (na * nb)

    return objective


def _golden_max(f, lo, hi, tol):
    """Golden-section maximization of a scalar function on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def dominant_angular_frequency(values, dt):
    """Angular frequency of the strongest spectral line of a signal."""
    v = np.asarray(values, dtype=float)
    spectrum = np.abs(np.fft.rfft(v - v.mean()))
    freqs = np.fft.rfftfreq(v.size, d=dt)
    peak = int(np.argmax(spectrum))
    return 2.0 * math.pi * max(freqs[peak], freqs[1])


def fit_warp(values, ref_values, times, family="linear", k_range=(0.5, 2.0),
             n_grid=200, shift_range=None, tol=1e-4) -> WarpFit:
    """Fit warp coefficients maximizing the alignment distance between the
    warped curve and the reference.

    A coarse grid search over the coefficient ranges is followed by
    golden-section refinement; if nothing beats the identity warp, the
    identity coefficients are returned with ``improved=False``.

    Parameters
    ----------
    values, ref_values : arrays on the shared ``times`` grid
    times : uniform time grid starting at 0
    family : {"linear", "affine"}
    k_range : (float, float), search bounds for the rate coefficient, > 0
    n_grid : int, coarse-search resolution for the rate coefficient
    shift_range : (float, float), optional affine-shift bounds; defaults to
        half a period of the reference's dominant frequency either way
    tol : float, golden-section bracket width

    Returns
    -------
    WarpFit
    """
    y = check_vector(values, "values")
    ref = check_vector(ref_values, "ref_values", length=y.shape[0])
    t = check_vector(times, "times", length=y.shape[0])
    if family not in _FAMILIES:
        raise ValueError(f"unknown warp family {family!r}")
    if not 0.0 < k_range[0] < k_range[1]:
        raise ValueError("k_range must satisfy 0 < k_lo < k_hi")
    objective = _warped_objective(y, ref, t, family)
    identity = _identity_beta(family)
    identity_distance = objective(identity)

    k_values = np.linspace(k_range[0], k_range[1], n_grid)
    if family == "linear":
        coarse = [objective(np.array([k])) for k in k_values]
        best = int(np.argmax(coarse))
        lo = k_values[max(best - 1, 0)]
        hi = k_values[min(best + 1, n_grid - 1)]
        k_star, d_star = _golden_max(lambda k: objective(np.array([k])), lo, hi, tol)
        beta = np.array([k_star])
    else:
        if shift_range is None:
            half_period = math.pi / dominant_angular_frequency(ref, t[1] - t[0])
            shift_range = (-half_period, half_period)
        shifts = np.linspace(shift_range[0], shift_range[1], max(n_grid // 8, 9))
        coarse_best, beta = -np.inf, identity.copy()
        for shift in shifts:
            col = [objective(np.array([k, shift])) for k in k_values]
            j = int(np.argmax(col))
            if col[j] > coarse_best:
                coarse_best = col[j]
                beta = np.array([k_values[j], shift])
        d_star = coarse_best
        for _ in range(3):
            k_star, d_star = _golden_max(
                lambda k: objective(np.array([k, beta[1]])),
                max(beta[0] - 0.05, k_range[0]), min(beta[0] + 0.05, k_range[1]), tol)
            beta[0] = k_star
            width = (shift_range[1] - shift_range[0]) / 8.0
            s_star, d_star = _golden_max(
                lambda s: objective(np.array([beta[0], s])),
                max(beta[1] - width, shift_range[0]),
                min(beta[1] + width, shift_range[1]), tol)
            beta[1] = s_star

    # The improved flag marks traces where the search could not beat the
    # identity warp and the identity coefficients were kept.
    if not np.isfinite(d_star) or d_star < identity_distance:
        return WarpFit(identity, float(max(identity_distance, 0.0)), False)
    return WarpFit(beta, float(d_star), True)


@dataclass
class WarpedEnsemble:
    """Warped traces resampled on a common grid over the intersection of
    the individual warped time ranges."""

    tau: np.ndarray
    values: np.ndarray
    betas: np.ndarray
    family: str
    reference_values: np.ndarray
    improved: np.ndarray


def build_warped_ensemble(values, times, reference_values, family="linear",
                          k_range=(0.5, 2.0), n_grid=200, shift_range=None,
                          tol=1e-4) -> WarpedEnsemble:
    """Warp every trace of an ensemble toward the reference and resample the
    warped curves on one shared grid.

    The common grid spans the intersection of the warped time ranges with
    as many points as the original grid.
    """
    y = check_matrix(values, "values")
    t = check_vector(times, "times", length=y.shape[1])
    ref = check_vector(reference_values, "reference_values", length=y.shape[1])
    if y.shape[0] < 2:
        raise ValueError("need at least two traces")
    fits = [fit_warp(row, ref, t, family=family, k_range=k_range,
                     n_grid=n_grid, shift_range=shift_range, tol=tol)
            for row in y]
    betas = np.array([f.coefficients for f in fits])
    improved = np.array([f.improved for f in fits])
    t_end = t[-1]
    shifts = betas[:, 1] if family == "affine" else np.zeros(len(fits))
    lows = shifts
    highs = betas[:, 0] * t_end + shifts
    lo, hi = float(np.max(lows)), float(np.min(highs))
    if hi <= lo:
        raise ValueError("warped time ranges have an empty intersection")
    tau = np.linspace(lo, hi, y.shape[1])
    warped = np.empty_like(y)
    for i in range(y.shape[0]):
        query = np.clip((tau - shifts[i]) / betas[i, 0], 0.0, t_end)
        warped[i] = np.interp(query, t, y[i])
    return WarpedEnsemble(tau=tau, values=warped, betas=betas, family=family,
                          reference_values=ref, improved=improved)


class TimeWarpSurrogate(BaseEstimator):
    """Trajectory surrogate for oscillatory responses: per-trace time
    warping toward a reference curve, a PCA-PCE surrogate of the warped
    ensemble, polynomial chaos expansions of the warp coefficients, and
    inverse warping of predictions back to physical time.

    Parameters
    ----------
    random_vector : RandomVector
    family : {"linear", "affine"}
    epsilon : float
        Unexplained-variance budget of the warped-domain compression.
    score_pce, beta_pce : PolynomialChaosRegressor templates, optional
    k_range : (float, float)
        Warp-rate search range; predictions clamp nonpositive rates to the
        lower bound.
    n_grid : int
        Coarse warp-search resolution.
    tol : float
        Warp-search refinement tolerance.

    Attributes
    ----------
    warped_ : WarpedEnsemble of the training traces
    beta_models_ : list of fitted coefficient expansions
    curve_model_ : PcaPceSurrogate over the warped domain
    """

    def __init__(self, random_vector=None, family="linear", epsilon=0.01,
                 score_pce=None, beta_pce=None, k_range=(0.5, 2.0),
                 n_grid=200, tol=1e-4):
        self.random_vector = random_vector
        self.family = family
        self.epsilon = epsilon
        self.score_pce = score_pce
        self.beta_pce = beta_pce
        self.k_range = k_range
        self.n_grid = n_grid
        self.tol = tol

    def _beta_template(self):
        if self.beta_pce is not None:
            template = clone(self.beta_pce)
        else:
            template = PolynomialChaosRegressor(degree=5, solver="lars",
                                                adaptive_degree=True)
        template.set_params(random_vector=self.random_vector)
        return template

    def _pick_reference(self, x, y):
        standardized = self.random_vector.to_standard(x)
        nearest = int(np.argmin(np.sum(standardized**2, axis=1)))
        return y[nearest]

    def fit(self, X, Y, times, reference=None):
        """Fit from inputs ``X`` (n, M), trajectories ``Y`` (n, Q) and the
        shared time grid.

        ``reference`` is the alignment target (typically the trajectory
        simulated at the mean input); when omitted, the training trace whose
        standardized input is closest to the distribution mean is used.
        """
        if self.random_vector is None:
            raise ValueError("random_vector must be set before fitting")
        x = check_samples(X, self.random_vector.dim)
        y = check_matrix(Y, "Y")
        if x.shape[0] != y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        t = check_vector(times, "times", length=y.shape[1])
        ref = (self._pick_reference(x, y) if reference is None
               else check_vector(np.asarray(reference, dtype=float).ravel(),
                                 "reference", length=y.shape[1]))
        self.warped_ = build_warped_ensemble(
            y, t, ref, family=self.family, k_range=self.k_range,
            n_grid=self.n_grid, tol=self.tol)
        self.beta_models_ = [
            self._beta_template().fit(x, self.warped_.betas[:, j])
            for j in range(self.warped_.betas.shape[1])
        ]
        self.curve_model_ = PcaPceSurrogate(
            random_vector=self.random_vector, epsilon=self.epsilon,
            score_pce=self.score_pce).fit(x, self.warped_.values)
        self.times_train_ = t
        self.n_features_in_ = x.shape[1]
        return self

    def predict_betas(self, X):
        """Predicted warp coefficients, nonpositive rates clamped."""
        if not hasattr(self, "beta_models_"):
            raise NotFittedError("fit the surrogate before predicting")
        x = check_samples(X, self.random_vector.dim)
        betas = np.column_stack([m.predict(x) for m in self.beta_models_])
        bad = betas[:, 0] <= 0.0
        if np.any(bad):
            warnings.warn(
                f"{int(np.count_nonzero(bad))} predicted warp rates were "
                f"nonpositive; clamped to {self.k_range[0]}")
            betas[bad, 0] = self.k_range[0]
        return betas

    def predict(self, X, times=None):
        """Predicted trajectories on the physical grid (training grid by
        default), shape (n_points, len(times)).

        Queries outside the warped image are extended by the boundary
        values of the warped-domain prediction.
        """
        betas = self.predict_betas(X)
        t = self.times_train_ if times is None else np.asarray(times, dtype=float)
        warped_pred = self.curve_model_.predict(X)
        tau = self.warped_.tau
        out = np.empty((betas.shape[0], t.shape[0]))
        for i in range(betas.shape[0]):
            shift = betas[i, 1] if self.family == "affine" else 0.0
            out[i] = np.interp(betas[i, 0] * t + shift, tau, warped_pred[i])
        return out

    def export_beta_table(self, path):
        """Write the per-trace warp coefficients as CSV."""
        if not hasattr(self, "warped_"):
            raise NotFittedError("fit the surrogate before exporting")
        betas = self.warped_.betas
        header = "trace_id," + ",".join(f"beta_{j + 1}" for j in range(betas.shape[1]))
        with open(path, "w", encoding="utf-8") as f:
            f.write(header + "\n")
            for i, row in enumerate(betas):
                f.write(",".join([str(i)] + [f"{v:.17g}" for v in row]) + "\n")
