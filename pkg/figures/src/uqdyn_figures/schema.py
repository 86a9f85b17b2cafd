"""CSV schema validation for harness artifacts.

Documented schemas:
    trajectories: t,trace_id,value
    metrics:      t,epsilon
    mean-std:     t,mean,std
"""

from __future__ import annotations

import os

import pandas as pd

TRAJECTORY_COLUMNS = ("t", "trace_id", "value")
METRIC_COLUMNS = ("t", "epsilon")
MEAN_STD_COLUMNS = ("t", "mean", "std")


class SchemaError(ValueError):
    """A CSV artifact does not match its declared schema."""


def load_csv(path, columns):
    """Read a CSV and verify its exact column set and non-emptiness.

    Raises
    ------
    SchemaError
        Naming the file and the offending columns.
    """
    if not os.path.exists(path):
        raise SchemaError(f"{path}: file does not exist")
    try:
        frame = pd.read_csv(path)
    except Exception as err:
        raise SchemaError(f"{path}: unreadable CSV ({err})") from err
    found = tuple(frame.columns)
    if found != tuple(columns):
        missing = [c for c in columns if c not in found]
        extra = [c for c in found if c not in columns]
        raise SchemaError(
            f"{path}: expected columns {list(columns)}, found {list(found)}"
            + (f"; missing {missing}" if missing else "")
            + (f"; unexpected {extra}" if extra else ""))
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    for column in columns:
        if not pd.api.types.is_numeric_dtype(frame[column]):
            raise SchemaError(f"{path}: column {column!r} is not numeric")
    return frame


def load_trajectories(path):
    """Load a trajectory CSV and pivot it to (times, matrix)."""
    frame = load_csv(path, TRAJECTORY_COLUMNS)
    wide = frame.pivot_table(index="trace_id", columns="t", values="value",
                             sort=True)
    if wide.isna().any().any():
        raise SchemaError(f"{path}: traces do not share one time grid")
    return wide.columns.to_numpy(dtype=float), wide.to_numpy(dtype=float)
