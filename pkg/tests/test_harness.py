import json
import math

import numpy as np
import pytest

from uqdyn.harness.cli import main as cli_main
from uqdyn.harness.config import ConfigError, config_hash, resolve_config
from uqdyn.harness.metrics import (
    compare_surrogates,
    ensemble_statistics,
    point_in_time_error,
    relative_l2_errors,
)
from uqdyn.harness.runner import run_experiment


class TestPointInTimeError:
    def test_perfect_predictions(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((10, 20))
        eps, absolute = point_in_time_error(y, y.copy())
        np.testing.assert_allclose(eps, 0.0)
        assert not absolute.any()

    def test_mean_prediction_identity(self):
        # Predicting the ensemble mean gives (N-1)/N exactly.
        rng = np.random.default_rng(1)
        y = rng.standard_normal((25, 8))
        pred = np.tile(y.mean(axis=0), (25, 1))
        eps, _ = point_in_time_error(y, pred)
        np.testing.assert_allclose(eps, (25 - 1) / 25, rtol=1e-12)

    def test_zero_variance_instants_flagged(self):
        y = np.ones((5, 3))
        pred = np.zeros((5, 3))
        eps, absolute = point_in_time_error(y, pred)
        assert absolute.all()
        np.testing.assert_allclose(eps, 1.0)


class TestEnsembleStatistics:
    def test_constant_ensemble(self):
        y = np.full((4, 6), 3.0)
        mean, std = ensemble_statistics(y)
        np.testing.assert_allclose(mean, 3.0)
        np.testing.assert_allclose(std, 0.0)

    def test_two_trace_hand_computation(self):
        y = np.array([[1.0, 1.0], [-1.0, -1.0]])
        mean, std = ensemble_statistics(y)
        np.testing.assert_allclose(mean, 0.0)
        np.testing.assert_allclose(std, math.sqrt(2.0))

    def test_mc_stability_between_seeds(self):
        t = np.linspace(0.0, 1.0, 30)
        curves = []
        for seed in (0, 1):
            rng = np.random.default_rng(seed)
            amp = rng.uniform(0.5, 1.5, 10_000)
            y = amp[:, None] * np.sin(2 * np.pi * t)[None, :]
            curves.append(ensemble_statistics(y))
        scale = np.max(np.abs(curves[0][0]))
        assert np.max(np.abs(curves[0][0] - curves[1][0])) < 0.01 * scale


class TestCompareSurrogates:
    def test_identical_tables_tie(self):
        errs = np.array([0.1, 0.2, 0.3])
        summary = compare_surrogates(errs, errs.copy())
        assert summary.fraction_a_wins == pytest.approx(0.5)
        assert summary.mean_difference == pytest.approx(0.0)
        assert summary.winners == ["tie"] * 3

    def test_perfect_vs_nonzero(self):
        summary = compare_surrogates(np.zeros(4), np.full(4, 0.5))
        assert summary.fraction_a_wins == 1.0

    def test_diverged_traces_lose(self):
        summary = compare_surrogates(np.array([np.inf, 0.1]), np.array([0.4, np.inf]))
        assert summary.winners == ["b", "a"]

    def test_relative_l2_with_burn_in(self):
        y = np.ones((2, 10))
        pred = np.ones((2, 10))
        pred[:, :3] = 99.0  # inside the burn-in window
        errs = relative_l2_errors(y, pred, burn_in=3)
        np.testing.assert_allclose(errs, 0.0)

    def test_non_finite_prediction_reports_inf(self):
        y = np.ones((1, 5))
        pred = np.ones((1, 5))
        pred[0, 4] = np.nan
        assert relative_l2_errors(y, pred)[0] == np.inf


class TestConfig:
    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match="grid.dtx"):
            resolve_config({"experiment": "bouc-wen-warp", "grid": {"dtx": 0.1}})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="experiment"):
            resolve_config({"experiment": "kriging"})

    def test_defaults_filled(self):
        config = resolve_config({"experiment": "coupled-pcnarx", "seed": 3})
        assert config["surrogate"]["n_y"] == 4
        assert config["grid"]["dt"] == 0.025

    def test_invalid_sizes(self):
        with pytest.raises(ConfigError, match="ed_size"):
            resolve_config({"experiment": "bouc-wen-frozen", "ed_size": 0})

    def test_hash_stability_and_sensitivity(self):
        a = resolve_config({"experiment": "bouc-wen-frozen", "seed": 1})
        b = resolve_config({"experiment": "bouc-wen-frozen", "seed": 1})
        c = resolve_config({"experiment": "bouc-wen-frozen", "seed": 2})
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)

    def test_bad_marginal_reported(self):
        raw = {"experiment": "bouc-wen-frozen",
               "model": {"marginals": [{"kind": "uniform", "lower": 1.0, "upper": 0.0}]}}
        with pytest.raises(ConfigError, match="marginals"):
            resolve_config(raw)


def _small_warp_config(seed=11):
    return {
        "experiment": "bouc-wen-warp",
        "seed": seed,
        "grid": {"t_end": 8.0, "dt": 0.02},
        "ed_size": 12,
        "validation_size": 8,
        "surrogate": {"score_degree": 3, "beta_degree": 3, "frozen_degree": 2},
        "statistics": {"mc_size": 40, "resample_size": 40},
    }


class TestRunExperiment:
    def test_bouc_wen_warp_artifacts(self, tmp_path):
        out, manifest = run_experiment(_small_warp_config(), out_dir=tmp_path / "run")
        names = {f["name"] for f in manifest["files"]}
        assert {"config.json", "ed_inputs.csv", "ed_trajectories.csv",
                "val_trajectories.csv", "metrics_timewarp.csv",
                "metrics_time_frozen.csv", "beta_table.csv",
                "mean_std_mc.csv", "mean_std_timewarp.csv"} <= names
        metrics = (tmp_path / "run" / "metrics_timewarp.csv").read_text().splitlines()
        assert metrics[0] == "t,epsilon"
        assert "timewarp_mean_eps_late" in manifest["summary"]

    def test_determinism_byte_identical(self, tmp_path):
        _, m1 = run_experiment(_small_warp_config(), out_dir=tmp_path / "a")
        _, m2 = run_experiment(_small_warp_config(), out_dir=tmp_path / "b")
        for name in ("metrics_timewarp.csv", "metrics_time_frozen.csv",
                     "mean_std_mc.csv", "beta_table.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert m1["config_hash"] == m2["config_hash"]
        fa = {f["name"]: f["sha256"] for f in m1["files"]}
        fb = {f["name"]: f["sha256"] for f in m2["files"]}
        assert fa == fb

    def test_coupled_pcnarx_small(self, tmp_path):
        config = {
            "experiment": "coupled-pcnarx",
            "seed": 5,
            "grid": {"t_end": 4.0, "dt": 0.05, "substeps": 2},
            "ed_size": 12,
            "validation_size": 6,
            "surrogate": {"d_pce": 2, "pce_max_terms": 8},
        }
        out, manifest = run_experiment(config, out_dir=tmp_path / "pc")
        names = {f["name"] for f in manifest["files"]}
        assert {"comparison.csv", "predictions_narx.csv",
                "predictions_pcnarx.csv", "narx_model.json"} <= names
        comparison = (tmp_path / "pc" / "comparison.csv").read_text().splitlines()
        assert comparison[0] == "trace_id,err_a,err_b,winner"
        assert len(comparison) == 7


class TestCli:
    def test_validate_config_ok(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(_small_warp_config()))
        assert cli_main(["validate-config", str(path)]) == 0
        assert "configuration ok" in capsys.readouterr().out

    def test_validate_config_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"experiment": "bouc-wen-warp", "typo": 1}))
        assert cli_main(["validate-config", str(path)]) == 2

    def test_invalid_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"experiment\": oops\n}")
        assert cli_main(["validate-config", str(path)]) == 2
        assert "line" in capsys.readouterr().err

    def test_run_and_report_round_trip(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        small = _small_warp_config()
        small["grid"] = {"t_end": 5.0, "dt": 0.02}
        small["ed_size"] = 8
        small["validation_size"] = 4
        small["statistics"] = {"mc_size": 0, "resample_size": 0}
        config.write_text(json.dumps(small))
        out = tmp_path / "artifacts"
        assert cli_main(["run", str(config), "--out", str(out)]) == 0
        assert cli_main(["report", str(out)]) == 0
        assert "all checksums match" in capsys.readouterr().out

    def test_report_detects_corruption(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        small = _small_warp_config()
        small["experiment"] = "bouc-wen-frozen"
        small.pop("statistics")
        small["surrogate"] = {"degree": 2}
        small["ed_size"] = 8
        small["validation_size"] = 4
        small["grid"] = {"t_end": 4.0, "dt": 0.02}
        config.write_text(json.dumps(small))
        out = tmp_path / "artifacts"
        assert cli_main(["run", str(config), "--out", str(out)]) == 0
        victim = out / "metrics_time_frozen.csv"
        victim.write_text(victim.read_text() + "tampered\n")
        assert cli_main(["report", str(out)]) == 3
