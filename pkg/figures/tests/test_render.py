import hashlib
import json

import numpy as np
import pytest

from uqdyn_figures.cli import main as cli_main
from uqdyn_figures.render import render
from uqdyn_figures.schema import SchemaError, load_csv, load_trajectories


def _write_trajectories(path, n_traces=6, n_steps=40, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0, n_steps)
    lines = ["t,trace_id,value"]
    for trace in range(n_traces):
        amp = rng.uniform(0.5, 1.5)
        values = amp * np.sin(2 * np.pi * (t + 0.1 * trace))
        lines.extend(f"{ti:.17g},{trace},{v:.17g}" for ti, v in zip(t, values))
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_mean_std(path, seed=1):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0, 30)
    lines = ["t,mean,std"]
    lines.extend(f"{ti:.17g},{np.sin(ti):.17g},{abs(rng.normal(0.2, 0.01)):.17g}"
                 for ti in t)
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_metric(path):
    t = np.linspace(0.0, 2.0, 30)
    lines = ["t,epsilon"]
    lines.extend(f"{ti:.17g},{1e-3 * np.exp(2.0 * ti):.17g}" for ti in t)
    path.write_text("\n".join(lines) + "\n")
    return path


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSchema:
    def test_wrong_columns_named_in_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,eps\n0.0,1.0\n")
        with pytest.raises(SchemaError, match="epsilon"):
            load_csv(bad, ("t", "epsilon"))

    def test_empty_file_clean_error(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("t,trace_id,value\n")
        with pytest.raises(SchemaError, match="no data rows"):
            load_csv(empty, ("t", "trace_id", "value"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="does not exist"):
            load_csv(tmp_path / "nope.csv", ("t", "epsilon"))

    def test_trajectory_pivot(self, tmp_path):
        path = _write_trajectories(tmp_path / "traj.csv", n_traces=3, n_steps=5)
        times, matrix = load_trajectories(path)
        assert times.shape == (5,)
        assert matrix.shape == (3, 5)

    def test_non_numeric_column(self, tmp_path):
        bad = tmp_path / "text.csv"
        bad.write_text("t,epsilon\n0.0,big\n")
        with pytest.raises(SchemaError, match="not numeric"):
            load_csv(bad, ("t", "epsilon"))


class TestRenderKinds:
    @pytest.mark.parametrize("kind", ["ensemble", "warped-ensemble"])
    @pytest.mark.parametrize("ext", [".png", ".svg"])
    def test_ensemble_kinds(self, tmp_path, kind, ext):
        csv = _write_trajectories(tmp_path / "traj.csv")
        out = tmp_path / f"fig{ext}"
        render({"kind": kind, "inputs": {"trajectories": str(csv)},
                "output": str(out)})
        assert out.exists() and out.stat().st_size > 0

    def test_mean_std(self, tmp_path):
        a = _write_mean_std(tmp_path / "a.csv", seed=1)
        b = _write_mean_std(tmp_path / "b.csv", seed=2)
        out = tmp_path / "ms.png"
        render({"kind": "mean-std",
                "inputs": {"curves": {"surrogate": str(a), "reference": str(b)}},
                "output": str(out), "style": {"field": "std"}})
        assert out.exists()

    def test_trace_comparison(self, tmp_path):
        ref = _write_trajectories(tmp_path / "ref.csv", seed=3)
        sur = _write_trajectories(tmp_path / "sur.csv", seed=4)
        out = tmp_path / "cmp.png"
        render({"kind": "trace-comparison",
                "inputs": {"reference": str(ref), "surrogates": {"model": str(sur)}},
                "trace_id": 2, "output": str(out)})
        assert out.exists()

    def test_error_evolution(self, tmp_path):
        m = _write_metric(tmp_path / "metric.csv")
        out = tmp_path / "err.svg"
        render({"kind": "error-evolution",
                "inputs": {"metrics": {"frozen": str(m)}},
                "output": str(out)})
        assert out.exists()

    def test_checksum_stable_across_reruns(self, tmp_path):
        csv = _write_trajectories(tmp_path / "traj.csv")
        digests = {}
        for ext in (".png", ".svg"):
            hashes = []
            for attempt in ("one", "two"):
                out = tmp_path / f"fig_{attempt}{ext}"
                render({"kind": "ensemble",
                        "inputs": {"trajectories": str(csv)},
                        "output": str(out)})
                hashes.append(_sha(out))
            digests[ext] = hashes
            assert hashes[0] == hashes[1], f"{ext} output not reproducible"

    def test_schema_violation_leaves_no_output(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("time,id,val\n0,0,1\n")
        out = tmp_path / "fig.png"
        with pytest.raises(SchemaError):
            render({"kind": "ensemble", "inputs": {"trajectories": str(bad)},
                    "output": str(out)})
        assert not out.exists()

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(SchemaError, match="kind"):
            render({"kind": "heatmap", "inputs": {}, "output": str(tmp_path / "x.png")})

    def test_bad_output_extension(self, tmp_path):
        with pytest.raises(SchemaError, match="output"):
            render({"kind": "ensemble", "inputs": {}, "output": str(tmp_path / "x.pdf")})

    def test_mismatched_comparison_grids(self, tmp_path):
        ref = _write_trajectories(tmp_path / "ref.csv", n_steps=40)
        sur = _write_trajectories(tmp_path / "sur.csv", n_steps=30)
        with pytest.raises(SchemaError, match="grid"):
            render({"kind": "trace-comparison",
                    "inputs": {"reference": str(ref),
                               "surrogates": {"m": str(sur)}},
                    "output": str(tmp_path / "x.png")})


class TestCli:
    def test_render_subcommand(self, tmp_path, capsys):
        csv = _write_trajectories(tmp_path / "traj.csv")
        spec = tmp_path / "spec.json"
        out = tmp_path / "fig.png"
        spec.write_text(json.dumps({
            "kind": "ensemble",
            "inputs": {"trajectories": str(csv)},
            "output": str(out),
        }))
        assert cli_main(["render", str(spec)]) == 0
        assert out.exists()

    def test_schema_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "kind": "error-evolution",
            "inputs": {"metrics": {"m": str(bad)}},
            "output": str(tmp_path / "fig.png"),
        }))
        assert cli_main(["render", str(spec)]) == 2
        assert "schema error" in capsys.readouterr().err

    def test_unreadable_spec(self, tmp_path, capsys):
        spec = tmp_path / "broken.json"
        spec.write_text("{not json")
        assert cli_main(["render", str(spec)]) == 2
