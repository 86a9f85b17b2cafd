"""Deterministic rendering of the five figure kinds from harness CSVs.

All validation happens before any drawing, so a failed render never leaves
a partial output file behind.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schema import (
    MEAN_STD_COLUMNS,
    METRIC_COLUMNS,
    SchemaError,
    load_csv,
    load_trajectories,
)

FIGURE_KINDS = ("ensemble", "warped-ensemble", "mean-std", "trace-comparison",
                "error-evolution")

# Fixed style so identical inputs give identical bytes.
matplotlib.rcParams["svg.hashsalt"] = "uqdyn-figures"

_PALETTE = ("#1f77b4", "#d62728", "#7f7f7f", "#2ca02c", "#9467bd", "#8c564b")


def _style(spec):
    style = dict(spec.get("style") or {})
    figsize = style.get("figsize", (8.0, 4.5))
    dpi = int(style.get("dpi", 150))
    return style, tuple(figsize), dpi


def _validate_spec(spec):
    if not isinstance(spec, dict):
        raise SchemaError("figure spec must be a JSON object")
    kind = spec.get("kind")
    if kind not in FIGURE_KINDS:
        raise SchemaError(f"kind: expected one of {list(FIGURE_KINDS)}, got {kind!r}")
    output = spec.get("output")
    if not output or os.path.splitext(output)[1].lower() not in (".png", ".svg"):
        raise SchemaError("output: expected a path ending in .png or .svg")
    if not isinstance(spec.get("inputs"), dict):
        raise SchemaError("inputs: expected an object of CSV paths")
    return kind, output


def _save(fig, output, dpi):
    metadata = {"Date": None} if output.lower().endswith(".svg") else None
    fig.savefig(output, dpi=dpi, metadata=metadata)
    plt.close(fig)


def _render_ensemble(spec, warped):
    style, figsize, dpi = _style(spec)
    times, matrix = load_trajectories(spec["inputs"].get("trajectories", ""))
    max_traces = int(style.get("max_traces", 100))
    alpha = float(style.get("alpha", 0.35))
    fig, ax = plt.subplots(figsize=figsize)
    for row in matrix[:max_traces]:
        ax.plot(times, row, color="#1f77b4", linewidth=0.6, alpha=alpha)
    ax.set_xlabel("warped time" if warped else "time [s]")
    ax.set_ylabel(style.get("ylabel", "response"))
    ax.set_title(style.get("title", ""))
    fig.tight_layout()
    return fig, dpi


def _render_mean_std(spec):
    style, figsize, dpi = _style(spec)
    field = style.get("field", "mean")
    if field not in ("mean", "std"):
        raise SchemaError("style.field: expected 'mean' or 'std'")
    curves = spec["inputs"].get("curves")
    if not isinstance(curves, dict) or not curves:
        raise SchemaError("inputs.curves: expected a label -> CSV path object")
    loaded = {label: load_csv(path, MEAN_STD_COLUMNS)
              for label, path in curves.items()}
    fig, ax = plt.subplots(figsize=figsize)
    for color, (label, frame) in zip(_PALETTE, loaded.items()):
        ax.plot(frame["t"], frame[field], label=label, color=color, linewidth=1.2)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(f"{field} response")
    ax.set_title(style.get("title", ""))
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig, dpi


def _render_trace_comparison(spec):
    style, figsize, dpi = _style(spec)
    inputs = spec["inputs"]
    reference_path = inputs.get("reference")
    surrogates = inputs.get("surrogates")
    if not reference_path or not isinstance(surrogates, dict) or not surrogates:
        raise SchemaError(
            "inputs: trace-comparison needs 'reference' and a 'surrogates' object")
    trace_id = int(spec.get("trace_id", 0))
    times, reference = load_trajectories(reference_path)
    if trace_id < 0 or trace_id >= reference.shape[0]:
        raise SchemaError(f"trace_id {trace_id} outside 0..{reference.shape[0] - 1}")
    loaded = {}
    for label, path in surrogates.items():
        s_times, matrix = load_trajectories(path)
        if matrix.shape != reference.shape or not np.allclose(s_times, times):
            raise SchemaError(f"{path}: grid or trace count differs from the reference")
        loaded[label] = matrix[trace_id]
    fig, ax = plt.subplots(figsize=figsize)
    ax.plot(times, reference[trace_id], "k--", linewidth=1.2, label="reference")
    for color, (label, series) in zip(("#1f77b4", "#c837ab", "#2ca02c"),
                                      loaded.items()):
        ax.plot(times, series, color=color, linewidth=1.0, label=label)
        ax.plot(times, series - reference[trace_id], color="#d62728",
                linewidth=0.8, alpha=0.9,
                label=f"error ({label})")
    ax.set_xlabel("time [s]")
    ax.set_ylabel(style.get("ylabel", "response"))
    ax.set_title(style.get("title", f"trace {trace_id}"))
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig, dpi


def _render_error_evolution(spec):
    style, figsize, dpi = _style(spec)
    metrics = spec["inputs"].get("metrics")
    if not isinstance(metrics, dict) or not metrics:
        raise SchemaError("inputs.metrics: expected a label -> CSV path object")
    loaded = {label: load_csv(path, METRIC_COLUMNS)
              for label, path in metrics.items()}
    fig, ax = plt.subplots(figsize=figsize)
    for color, (label, frame) in zip(_PALETTE, loaded.items()):
        ax.plot(frame["t"], frame["epsilon"], label=label, color=color,
                linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("point-in-time validation error")
    ax.set_title(style.get("title", ""))
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig, dpi


def render(spec):
    """Render one figure specification to its output path.

    Returns the output path. All inputs are validated before the output
    file is opened, so schema violations never leave partial files.
    """
    kind, output = _validate_spec(spec)
    if kind == "ensemble":
        fig, dpi = _render_ensemble(spec, warped=False)
    elif kind == "warped-ensemble":
        fig, dpi = _render_ensemble(spec, warped=True)
    elif kind == "mean-std":
        fig, dpi = _render_mean_std(spec)
    elif kind == "trace-comparison":
        fig, dpi = _render_trace_comparison(spec)
    else:
        fig, dpi = _render_error_evolution(spec)
    _save(fig, output, dpi)
    return output
