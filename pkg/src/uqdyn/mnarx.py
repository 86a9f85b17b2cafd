"""Manifold NARX: chained autoregressive models on an iteratively built
manifold of auxiliary quantities. Each quantity is either a deterministic
transform of earlier signals or a NARX sub-model trained on simulated
auxiliary data; the final model consumes the assembled manifold as its
exogenous input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .narx import ForecastDivergenceError, NarxRegressor, _as_trace


@dataclass(frozen=True)
class TransformStage:
    """Auxiliary quantity computed deterministically from earlier signals.

    ``fn`` receives a dict of the named input signals (each a 1-D array on
    the trace grid) and returns the new signal.
    """

    name: str
    inputs: tuple
    fn: Callable

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))


@dataclass(frozen=True)
class NarxStage:
    """Auxiliary quantity modeled autoregressively from earlier signals.

    Training requires the true auxiliary signal; at prediction time the
    stage runs its own forecast closure.
    """

    name: str
    inputs: tuple
    n_y: int = 1
    n_x: int | tuple = 1
    degree: int = 1
    solver: str = "ols"
    selection: str = "loo"
    max_terms: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))


@dataclass(frozen=True)
class ManifoldSpec:
    """Validated, causally ordered auxiliary-quantity definitions.

    Stage i may reference only the exogenous input names and stages
    1..i-1; violations are rejected here, at construction.
    """

    stages: tuple
    input_names: tuple = ("x",)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        available = set(self.input_names)
        for stage in self.stages:
            if not isinstance(stage, (TransformStage, NarxStage)):
                raise TypeError("stages must be TransformStage or NarxStage")
            if stage.name in available:
                raise ValueError(f"duplicate quantity name {stage.name!r}")
            missing = [ref for ref in stage.inputs if ref not in available]
            if missing:
                raise ValueError(
                    f"stage {stage.name!r} references undefined quantities "
                    f"{missing}; stages may only use the exogenous input and "
                    "earlier stages")
            available.add(stage.name)

    @property
    def names(self):
        return tuple(stage.name for stage in self.stages)


def _input_signal_names(n_inputs):
    if n_inputs == 1:
        return ("x",)
    return tuple(f"x{i}" for i in range(n_inputs))


def _base_signals(x, names):
    xm = _as_trace(x)
    if xm.shape[1] != len(names):
        raise ValueError(f"expected {len(names)} excitation columns, got {xm.shape[1]}")
    return {name: xm[:, j] for j, name in enumerate(names)}


def build_manifold(spec: ManifoldSpec, x, aux=None, models=None, init="zeros"):
    """Compute the auxiliary signals of one trace, in causal order.

    During training-matrix assembly the true auxiliary data is passed via
    ``aux``; at prediction time fitted sub-models are passed via ``models``
    and NARX-stage quantities come from their forecast closures.

    Returns
    -------
    dict name -> 1-D signal, containing the exogenous inputs and every
    stage output
    """
    signals = _base_signals(x, spec.input_names)
    aux = aux or {}
    for stage in spec.stages:
        if isinstance(stage, TransformStage):
            signals[stage.name] = np.asarray(
                stage.fn({k: signals[k] for k in stage.inputs}), dtype=float)
        elif stage.name in aux:
            signals[stage.name] = np.asarray(aux[stage.name], dtype=float)
        else:
            if models is None or stage.name not in models:
                raise ValueError(
                    f"stage {stage.name!r} needs true auxiliary data or a "
                    "fitted sub-model")
            exo = np.column_stack([signals[k] for k in stage.inputs])
            try:
                signals[stage.name] = models[stage.name].forecast(exo, init=init)
            except ForecastDivergenceError as err:
                raise ForecastDivergenceError(err.step, err.limit) from err
    return signals


class MNarxRegressor(BaseEstimator):
    """Manifold-NARX surrogate: NARX sub-models build auxiliary quantities
    which, together with the exogenous input, form the final model's input
    manifold.

    With no stages and ``final_inputs=("x",)`` this reduces exactly to the
    classical NARX model.

    Parameters
    ----------
    stages : tuple of TransformStage / NarxStage
    final_inputs : tuple of signal names consumed by the final model
    n_y, n_x, degree, solver, max_terms : final-model configuration, as in
        :class:`~uqdyn.narx.NarxRegressor`
    teacher_forced : bool
        When True, forecasts consume true auxiliary signals passed through
        ``aux`` instead of sub-model forecasts (validation mode).

    Attributes
    ----------
    spec_ : ManifoldSpec
    stage_models_ : dict name -> fitted NarxRegressor
    final_model_ : fitted NarxRegressor
    """

    def __init__(self, stages=(), final_inputs=("x",), n_y=1, n_x=1, degree=1,
                 solver="ols", selection="loo", max_terms=None, dt=1.0,
                 divergence_factor=1e6, teacher_forced=False):
        self.stages = stages
        self.final_inputs = final_inputs
        self.n_y = n_y
        self.n_x = n_x
        self.degree = degree
        self.solver = solver
        self.selection = selection
        self.max_terms = max_terms
        self.dt = dt
        self.divergence_factor = divergence_factor
        self.teacher_forced = teacher_forced

    def _final_template(self):
        return NarxRegressor(
            n_y=self.n_y, n_x=self.n_x, degree=self.degree, solver=self.solver,
            selection=self.selection, max_terms=self.max_terms, dt=self.dt,
            divergence_factor=self.divergence_factor)

    def fit(self, excitations, responses, aux=None):
        """Fit sub-models and the final model on true (teacher-forced)
        signals.

        Parameters
        ----------
        excitations : sequence of traces, each (Q,) or (Q, M)
        responses : sequence of (Q,) response traces
        aux : dict name -> (n_traces, Q) array of true auxiliary signals,
            required for every NARX stage
        """
        xs = [_as_trace(x) for x in excitations]
        names = _input_signal_names(xs[0].shape[1])
        spec = ManifoldSpec(stages=tuple(self.stages), input_names=names)
        for ref in self.final_inputs:
            if ref not in names and ref not in spec.names:
                raise ValueError(f"final model references undefined quantity {ref!r}")
        aux = aux or {}
        for stage in spec.stages:
            if isinstance(stage, NarxStage) and stage.name not in aux:
                raise ValueError(
                    f"fitting requires true auxiliary data for stage {stage.name!r}")
        per_trace_signals = []
        for i, x in enumerate(xs):
            trace_aux = {k: np.asarray(v, dtype=float)[i] for k, v in aux.items()}
            per_trace_signals.append(build_manifold(spec, x, aux=trace_aux))

        self.stage_models_ = {}
        for stage in spec.stages:
            if not isinstance(stage, NarxStage):
                continue
            exo = [np.column_stack([sig[k] for k in stage.inputs])
                   for sig in per_trace_signals]
            targets = [sig[stage.name] for sig in per_trace_signals]
            model = NarxRegressor(
                n_y=stage.n_y, n_x=stage.n_x, degree=stage.degree,
                solver=stage.solver, selection=stage.selection,
                max_terms=stage.max_terms, dt=self.dt,
                divergence_factor=self.divergence_factor)
            self.stage_models_[stage.name] = model.fit(exo, targets)

        final_exo = [np.column_stack([sig[k] for k in self.final_inputs])
                     for sig in per_trace_signals]
        score_exo = None
        if self.selection == "closure" and self.stage_models_:
            # Score the final structure under forecast-fed auxiliary
            # signals, the condition it faces at prediction time. Traces
            # whose sub-model forecast diverges fall back to true signals.
            score_exo = []
            for i, x in enumerate(xs):
                try:
                    signals = build_manifold(spec, x, models=self.stage_models_,
                                             init="zeros")
                    score_exo.append(np.column_stack(
                        [signals[k] for k in self.final_inputs]))
                except ForecastDivergenceError:
                    score_exo.append(final_exo[i])
        self.final_model_ = self._final_template().fit(
            final_exo, responses, score_excitations=score_exo)
        self.spec_ = spec
        self.n_features_in_ = xs[0].shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "final_model_"):
            raise NotFittedError("fit the model before forecasting")

    def _assemble_forecast_inputs(self, x, init, aux):
        teacher = dict(aux or {}) if (self.teacher_forced or aux) else {}
        try:
            signals = build_manifold(self.spec_, x, aux=teacher,
                                     models=self.stage_models_, init=init)
        except ForecastDivergenceError as err:
            stage = next(
                (s.name for s in self.spec_.stages
                 if isinstance(s, NarxStage) and s.name not in teacher), "stage")
            raise ForecastDivergenceError(err.step, err.limit) from ValueError(
                f"sub-model {stage!r} diverged")
        return np.column_stack([signals[k] for k in self.final_inputs])

    def forecast(self, x, init="zeros", aux=None):
        """Forecast one excitation trace.

        Sub-model closures run first in causal order; passing ``aux``
        substitutes true auxiliary signals (teacher forcing). The sub-model
        init mode mirrors ``init`` when it is "zeros"; explicit prefix
        arrays apply to the final response only.
        """
        self._check_fitted()
        sub_init = init if isinstance(init, str) else "zeros"
        zeta = self._assemble_forecast_inputs(x, sub_init, aux)
        return self.final_model_.forecast(zeta, init=init)

    def forecast_ensemble(self, excitations, init="zeros", aux=None):
        """Forecast many traces; diverged traces are flagged and NaN-filled.

        Returns
        -------
        predictions : ndarray (n_traces, Q)
        diverged_at : int ndarray (n_traces,), first bad step or -1
        diverged_stage : list of str or None, name of the stage that
            diverged first ("final" for the final closure)
        """
        self._check_fitted()
        n = len(excitations)
        q = _as_trace(excitations[0]).shape[0]
        preds = np.full((n, q), np.nan)
        diverged_at = np.full(n, -1, dtype=int)
        diverged_stage = [None] * n
        sub_init = init if isinstance(init, str) else "zeros"
        for i, x in enumerate(excitations):
            trace_aux = None
            if aux:
                trace_aux = {k: np.asarray(v, dtype=float)[i] for k, v in aux.items()}
            try:
                zeta = self._assemble_forecast_inputs(x, sub_init, trace_aux)
            except ForecastDivergenceError as err:
                diverged_at[i] = err.step
                diverged_stage[i] = str(err.__cause__) if err.__cause__ else "stage"
                continue
            row_init = init if isinstance(init, str) else np.asarray(init)[i]
            row, bad = self.final_model_.forecast_ensemble([zeta], init=row_init)
            preds[i] = row[0]
            if bad[0] >= 0:
                diverged_at[i] = bad[0]
                diverged_stage[i] = "final"
        return preds, diverged_at, diverged_stage
