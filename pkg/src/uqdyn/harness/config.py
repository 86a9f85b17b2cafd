"""Experiment configuration: JSON parsing with fail-fast validation,
per-kind defaults, and config hashing for reproducibility manifests."""

from __future__ import annotations

import copy
import hashlib
import json
import math

from ..randvars import Marginal, RandomVector, Uniform


class ConfigError(ValueError):
    """Invalid experiment configuration; the message carries a dotted path
    to the offending key."""


EXPERIMENT_KINDS = (
    "bouc-wen-warp",
    "bouc-wen-frozen",
    "coupled-pcnarx",
    "coupled-mnarx",
    "custom",
)


def _bouc_wen_marginals():
    return [
        Uniform.from_mean_std(0.02, 0.002).to_dict(),
        Uniform.from_mean_std(2.0 * math.pi, 0.2 * math.pi).to_dict(),
        Uniform.from_mean_std(50.0, 5.0).to_dict(),
        Uniform.from_mean_std(1.0, 0.1).to_dict(),
        Uniform.from_mean_std(math.pi, 0.1 * math.pi).to_dict(),
    ]


def _defaults(kind):
    if kind in ("bouc-wen-warp", "bouc-wen-frozen"):
        base = {
            "experiment": kind,
            "seed": 0,
            "output_dir": None,
            "jobs": 1,
            "grid": {"t_end": 30.0, "dt": 0.01, "substeps": 1},
            "ed_size": 100,
            "validation_size": 1000,
            "model": {
                "marginals": _bouc_wen_marginals(),
                "beta_hyst": 50.0,
                "rho": 0.0,
                "gamma": 1.0,
                "n_exp": 1.0,
            },
        }
        if kind == "bouc-wen-warp":
            base["model"]["train_horizon_factor"] = 1.45
            base["surrogate"] = {
                "family": "linear",
                "epsilon": 0.01,
                "k_range": [0.5, 2.0],
                "n_grid": 200,
                "tol": 1e-4,
                "score_degree": 5,
                "beta_degree": 5,
                "frozen_degree": 3,
            }
            base["statistics"] = {"mc_size": 0, "resample_size": 0}
        else:
            base["surrogate"] = {"degree": 3, "max_terms": None}
        return base
    if kind == "coupled-pcnarx":
        return {
            "experiment": kind,
            "seed": 0,
            "output_dir": None,
            "jobs": 1,
            "grid": {"t_end": 20.0, "dt": 0.025, "substeps": 3},
            "ed_size": 100,
            "validation_size": 50,
            "model": {
                "cov": 0.2,
                "means": {"k_u": 5000.0, "k_s": 1000.0, "m_u": 50.0,
                          "m_s": 10.0, "c": 600.0},
            },
            "surrogate": {
                "n_y": 4, "n_x": 5, "degree": 3, "d_pce": 10,
                "max_terms": None, "pce_max_terms": 30,
            },
        }
    if kind == "coupled-mnarx":
        return {
            "experiment": kind,
            "seed": 0,
            "output_dir": None,
            "jobs": 1,
            "grid": {"t_end": 4.0, "dt": 0.025, "substeps": 3},
            "ed_size": 100,
            "validation_size": 50,
            "model": {
                "params": {"k_u": 5000.0, "k_s": 1000.0, "m_u": 50.0,
                           "m_s": 10.0, "c": 50.0},
            },
            "surrogate": {
                "classical": {"n_y": 4, "n_x": 3, "degree": 7, "solver": "ols"},
                "stage": {"n_y": 3, "n_x": 2, "degree": 4, "max_terms": 100},
                "final": {"n_y": 3, "n_x": 2, "degree": 6, "max_terms": 100},
            },
        }
    # custom: a model block plus an explicit surrogate kind
    return {
        "experiment": "custom",
        "seed": 0,
        "output_dir": None,
        "jobs": 1,
        "grid": {"t_end": 10.0, "dt": 0.01, "substeps": 1},
        "ed_size": 32,
        "validation_size": 16,
        "model": {"kind": "bouc-wen", "marginals": _bouc_wen_marginals(),
                  "beta_hyst": 50.0, "rho": 0.0, "gamma": 1.0, "n_exp": 1.0,
                  "train_horizon_factor": 1.45},
        "surrogate": {"kind": "timewarp", "epsilon": 0.01, "family": "linear",
                      "k_range": [0.5, 2.0], "n_grid": 200, "tol": 1e-4,
                      "score_degree": 5, "beta_degree": 5, "frozen_degree": 3},
    }


def _merge(defaults, overrides, path):
    """Merge overrides into defaults, rejecting unknown keys."""
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown configuration key: {where!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(raw):
    """Validate a raw configuration dict against its experiment kind's
    schema and fill defaults.

    Raises
    ------
    ConfigError
        On unknown keys, missing/invalid values; the message names the
        offending key by dotted path.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    kind = raw.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment: expected one of {list(EXPERIMENT_KINDS)}, got {kind!r}")
    config = _merge(_defaults(kind), raw, "")
    grid = config["grid"]
    for key in ("t_end", "dt"):
        if not isinstance(grid[key], (int, float)) or grid[key] <= 0:
            raise ConfigError(f"grid.{key}: must be a positive number")
    if int(grid["substeps"]) < 1:
        raise ConfigError("grid.substeps: must be >= 1")
    for key in ("ed_size", "validation_size"):
        if not isinstance(config[key], int) or config[key] < 1:
            raise ConfigError(f"{key}: must be a positive integer")
    if not isinstance(config["seed"], int):
        raise ConfigError("seed: must be an integer")
    if not isinstance(config["jobs"], int) or config["jobs"] < 1:
        raise ConfigError("jobs: must be a positive integer")
    if "marginals" in config.get("model", {}):
        marginals = config["model"]["marginals"]
        if len(marginals) != 5:
            raise ConfigError("model.marginals: expected 5 entries")
        for i, m in enumerate(marginals):
            try:
                Marginal.from_dict(m)
            except Exception as err:
                raise ConfigError(f"model.marginals[{i}]: {err}") from err
    if kind == "custom":
        model_kind = config["model"].get("kind")
        if model_kind not in ("bouc-wen",):
            raise ConfigError(
                f"model.kind: custom experiments support 'bouc-wen', got {model_kind!r}")
        surrogate_kind = config["surrogate"].get("kind")
        if surrogate_kind not in ("timewarp", "time-frozen"):
            raise ConfigError(
                "surrogate.kind: expected 'timewarp' or 'time-frozen', "
                f"got {surrogate_kind!r}")
    return config


def load_config(path):
    """Read and resolve a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at line {err.lineno}, column {err.colno}: "
                          f"{err.msg}") from err
    except OSError as err:
        raise ConfigError(f"cannot read configuration: {err}") from err
    return resolve_config(raw)


def config_hash(config):
    """Stable hash of a resolved configuration.

    Excludes the output directory and worker count, which do not affect
    the computed results.
    """
    hashed = {k: v for k, v in config.items() if k not in ("output_dir", "jobs")}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def marginals_to_vector(marginal_dicts) -> RandomVector:
    return RandomVector([Marginal.from_dict(m) for m in marginal_dicts])
