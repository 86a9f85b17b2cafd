"""Acceptance suite: every criterion runs at its stated tolerance and
prints one PASS/FAIL line.

The trajectory-surrogate and autoregressive comparisons run the full
experiment presets through the batch harness, at the sizes stated in the
criteria.
"""

import json
import math
import time

import numpy as np
import pytest
from oracles import forced_sdof_response

from uqdyn.dynmodels import (
    BoucWenParams,
    TimeGrid,
    rk4_integrate,
    simulate_bouc_wen,
)
from uqdyn.harness.runner import run_experiment
from uqdyn.narx import MonomialBasis, NarxRegressor
from uqdyn.mnarx import MNarxRegressor
from uqdyn.numerics import gauss_quadrature_nodes
from uqdyn.pce import PceBasis, PolynomialChaosRegressor
from uqdyn.pcnarx import PcNarxRegressor
from uqdyn.randvars import Normal, RandomVector, Uniform


def _report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# ---------------------------------------------------------------------------
# Shared full-scale studies
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bouc_wen_study(tmp_path_factory):
    config = {
        "experiment": "bouc-wen-warp",
        "seed": 42,
        "ed_size": 100,
        "validation_size": 1000,
        "statistics": {"mc_size": 10_000, "resample_size": 10_000},
    }
    out = tmp_path_factory.mktemp("bouc_wen_warp")
    start = time.monotonic()
    directory, manifest = run_experiment(config, out_dir=out / "run")
    elapsed = time.monotonic() - start
    return {"summary": manifest["summary"], "elapsed": elapsed,
            "directory": directory}


@pytest.fixture(scope="module")
def pcnarx_study(tmp_path_factory):
    config = {"experiment": "coupled-pcnarx", "seed": 42}
    out = tmp_path_factory.mktemp("coupled_pcnarx")
    start = time.monotonic()
    directory, manifest = run_experiment(config, out_dir=out / "run")
    elapsed = time.monotonic() - start
    return {"summary": manifest["summary"], "elapsed": elapsed,
            "directory": directory}


@pytest.fixture(scope="module")
def mnarx_study(tmp_path_factory):
    config = {"experiment": "coupled-mnarx", "seed": 42}
    out = tmp_path_factory.mktemp("coupled_mnarx")
    start = time.monotonic()
    directory, manifest = run_experiment(config, out_dir=out / "run")
    elapsed = time.monotonic() - start
    return {"summary": manifest["summary"], "elapsed": elapsed,
            "directory": directory}


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

def test_basis_orthonormality():
    """Gauss-quadrature inner products of all basis pairs match the
    identity within 1e-10 for up to 3 inputs and total degree 10."""
    start = time.monotonic()
    cases = [
        [Uniform(-1.0, 1.0)],
        [Normal(0.0, 1.0)],
        [Uniform(-1.0, 1.0), Normal(0.0, 1.0)],
        [Uniform(-1.0, 1.0), Normal(0.0, 1.0), Uniform(-1.0, 1.0)],
    ]
    worst = 0.0
    for marginals in cases:
        rv = RandomVector(marginals)
        basis = PceBasis.total_degree(rv, 10)
        rules = [gauss_quadrature_nodes(
            "legendre" if isinstance(m, Uniform) else "hermite", 11)
            for m in marginals]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        points = np.column_stack([g.ravel() for g in grids])
        wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        weights = np.prod(np.column_stack([w.ravel() for w in wgrids]), axis=1)
        table = basis.evaluate_standard(points)
        gram = table.T @ (weights[:, None] * table)
        worst = max(worst, float(np.max(np.abs(gram - np.eye(basis.n_terms)))))
    elapsed = time.monotonic() - start
    ok = worst <= 1e-10 and elapsed < 10.0
    _report("basis-orthonormality",
            ok, f"max deviation {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-10
    assert elapsed < 10.0


def test_exact_recovery_suite():
    """Every surrogate family recovers a synthetic generator inside its
    span to 1e-8 coefficient error."""
    start = time.monotonic()
    worst = {}

    rv = RandomVector([Uniform(-1.0, 1.0), Uniform(-1.0, 1.0)])
    basis = PceBasis.total_degree(rv, 3)
    rng = np.random.default_rng(0)
    truth = rng.standard_normal(basis.n_terms)
    x = rv.sample(3 * basis.n_terms, seed=1).values
    y = basis.evaluate(x) @ truth
    model = PolynomialChaosRegressor(rv, degree=3, solver="ols").fit(x, y)
    worst["ols-pce"] = float(np.max(np.abs(model.coef_ - truth)))

    sparse_truth = np.zeros(basis.n_terms)
    sparse_truth[[1, 4, 7]] = (1.5, -0.75, 2.0)
    y_sparse = basis.evaluate(x) @ sparse_truth
    sparse = PolynomialChaosRegressor(rv, degree=3, solver="lars").fit(x, y_sparse)
    fitted = np.zeros(basis.n_terms)
    labels = {tuple(i): j for j, i in enumerate(basis.indices)}
    for idx, c in zip(sparse.basis_.indices, sparse.coef_):
        fitted[labels[tuple(idx)]] = c
    worst["sparse-pce"] = float(np.max(np.abs(fitted - sparse_truth)))

    xs, ys = [], []
    for _ in range(3):
        exc = rng.standard_normal(300)
        resp = np.zeros(300)
        for k in range(1, 300):
            resp[k] = 0.5 * resp[k - 1] - 0.1 * resp[k - 1] ** 2 + 0.8 * exc[k]
        xs.append(exc)
        ys.append(resp)
    narx = NarxRegressor(n_y=1, n_x=0, degree=2, solver="ols").fit(xs, ys)
    coef = dict(zip(map(tuple, narx.basis_.exponents), narx.coef_))
    narx_err = max(abs(coef[(1, 0)] - 0.5), abs(coef[(2, 0)] + 0.1),
                   abs(coef[(0, 1)] - 0.8), abs(coef[(0, 0)]))
    worst["narx"] = float(narx_err)

    xi_rv = RandomVector([Uniform(0.2, 0.7)])
    xi = xi_rv.sample(20, seed=2).values
    xs, ys = [], []
    for theta in xi[:, 0]:
        exc = rng.standard_normal(200)
        resp = np.zeros(200)
        for k in range(1, 200):
            resp[k] = theta * resp[k - 1] + exc[k]
        xs.append(exc)
        ys.append(resp)
    pcn = PcNarxRegressor(xi_rv, n_y=1, n_x=0, degree=1, d_pce=3).fit(xs, ys, xi)
    target = np.array([tuple(e) for e in pcn.basis_.exponents])
    j_ylag = int(np.flatnonzero((target == (1, 0)).all(axis=1))[0])
    probe = np.linspace(0.25, 0.65, 9)[:, None]
    worst["pc-narx"] = float(np.max(np.abs(
        pcn.predict_coefficients(probe)[:, j_ylag] - probe[:, 0])))

    from uqdyn.mnarx import NarxStage

    xs, yas, ybs = [], [], []
    for _ in range(3):
        exc = rng.uniform(-1, 1, 250)
        ya = np.zeros(250)
        yb = np.zeros(250)
        for k in range(1, 250):
            ya[k] = 0.5 * ya[k - 1] + exc[k]
            yb[k] = 0.3 * yb[k - 1] + ya[k] ** 2
        xs.append(exc)
        yas.append(ya)
        ybs.append(yb)
    mn = MNarxRegressor(
        stages=(NarxStage("ya", inputs=("x",), n_y=1, n_x=0, degree=1),),
        final_inputs=("ya",), n_y=1, n_x=0, degree=2, solver="ols",
    ).fit(xs, ybs, aux={"ya": np.array(yas)})
    sub = dict(zip(map(tuple, mn.stage_models_["ya"].basis_.exponents),
                   mn.stage_models_["ya"].coef_))
    fin = dict(zip(map(tuple, mn.final_model_.basis_.exponents),
                   mn.final_model_.coef_))
    worst["mnarx"] = float(max(abs(sub[(1, 0)] - 0.5), abs(sub[(0, 1)] - 1.0),
                               abs(fin[(1, 0)] - 0.3), abs(fin[(0, 2)] - 1.0)))

    elapsed = time.monotonic() - start
    bad = {k: v for k, v in worst.items() if v > 1e-8}
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    ok = not bad and elapsed < 60.0
    _report("exact-recovery", ok, f"{detail}, {elapsed:.1f}s")
    assert not bad, bad
    assert elapsed < 60.0


def test_rk4_convergence_order():
    """Observed RK4 order is 4 +- 0.3 against the closed-form damped
    oscillator across dt in {1e-2, 5e-3, 2.5e-3}."""
    zeta, omega, amp, omega_x = 0.05, 2.0 * math.pi, 1.0, math.pi

    def rhs(t, s):
        return np.array([
            s[1],
            -amp * math.sin(omega_x * t) - 2 * zeta * omega * s[1] - omega**2 * s[0],
        ])

    errors = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        grid = TimeGrid.from_duration(2.0, dt)
        states = rk4_integrate(rhs, np.zeros(2), grid)
        exact = forced_sdof_response(grid.times(), zeta, omega, amp, omega_x)
        errors.append(np.max(np.abs(states[:, 0] - exact)))
    orders = [math.log2(errors[0] / errors[1]), math.log2(errors[1] / errors[2])]
    ok = all(abs(o - 4.0) <= 0.3 for o in orders)
    _report("rk4-order", ok, f"observed orders {orders[0]:.2f}, {orders[1]:.2f}")
    for o in orders:
        assert abs(o - 4.0) <= 0.3


def test_time_frozen_fails_warping_succeeds(bouc_wen_study):
    """With 100 training and 1000 validation trajectories, the mean
    point-in-time error over the second half of the horizon exceeds 0.5
    for time-frozen expansions while the warp surrogate stays below half
    that value and below 0.2."""
    summary = bouc_wen_study["summary"]
    frozen = summary["time_frozen_mean_eps_late"]
    warp = summary["timewarp_mean_eps_late"]
    elapsed = bouc_wen_study["elapsed"]
    ok = frozen > 0.5 and warp < 0.5 * frozen and warp < 0.2 and elapsed < 600.0
    _report("frozen-fails-warp-succeeds", ok,
            f"frozen {frozen:.3f}, warp {warp:.4f}, {elapsed:.0f}s")
    assert frozen > 0.5
    assert warp < 0.5 * frozen
    assert warp < 0.2
    assert elapsed < 600.0


def test_bouc_wen_statistics(bouc_wen_study):
    """Warp-surrogate mean and standard-deviation curves from 10^4
    resamples match the 10^4-sample Monte Carlo reference within 5% and
    10% relative L2."""
    summary = bouc_wen_study["summary"]
    mean_err = summary["mean_curve_rel_l2"]
    std_err = summary["std_curve_rel_l2"]
    elapsed = bouc_wen_study["elapsed"]
    ok = mean_err < 0.05 and std_err < 0.10 and elapsed < 900.0
    _report("bouc-wen-statistics", ok,
            f"mean {mean_err:.4f}, std {std_err:.4f}, {elapsed:.0f}s")
    assert mean_err < 0.05
    assert std_err < 0.10
    assert elapsed < 900.0


def test_pcnarx_beats_classical_narx(pcnarx_study):
    """On 50 out-of-sample traces the coefficient-surrogated model wins at
    least 75% of the traces with median error at most half the classical
    model's."""
    summary = pcnarx_study["summary"]
    wins = summary["pcnarx_win_fraction"]
    ratio = summary["pcnarx_median_error"] / summary["narx_median_error"]
    elapsed = pcnarx_study["elapsed"]
    ok = wins >= 0.75 and ratio <= 0.5 and elapsed < 600.0
    _report("pcnarx-vs-narx", ok,
            f"wins {wins * 100:.0f}%, median ratio {ratio:.2f}, {elapsed:.0f}s")
    assert wins >= 0.75
    assert ratio <= 0.5
    assert elapsed < 600.0


def test_mnarx_beats_classical_narx(mnarx_study):
    """On 50 out-of-sample traces the staged model wins at least 75% of
    the traces with median error at most half the classical model's."""
    summary = mnarx_study["summary"]
    wins = summary["mnarx_win_fraction"]
    ratio = summary["mnarx_median_error"] / summary["narx_median_error"]
    elapsed = mnarx_study["elapsed"]
    ok = wins >= 0.75 and ratio <= 0.5 and elapsed < 600.0
    _report("mnarx-vs-narx", ok,
            f"wins {wins * 100:.0f}%, median ratio {ratio:.2f}, {elapsed:.0f}s")
    assert wins >= 0.75
    assert ratio <= 0.5
    assert elapsed < 600.0


def test_degeneracy_identities():
    """Zero-variance structural input collapses the coefficient-surrogated
    model to classical NARX; an identity manifold bit-matches classical
    NARX; the hysteretic oscillator with both hysteresis parameters zero
    matches the linear closed form within 1e-5."""
    rng = np.random.default_rng(3)

    exc = rng.standard_normal(150)
    resp = np.zeros(150)
    for k in range(1, 150):
        resp[k] = 0.55 * resp[k - 1] + exc[k]
    xs, ys = [exc] * 5, [resp] * 5
    xi = np.full((5, 1), 0.4)
    xi_rv = RandomVector([Uniform(0.0, 1.0)])
    pcn = PcNarxRegressor(xi_rv, n_y=1, n_x=0, degree=1, d_pce=2).fit(xs, ys, xi)
    classical = NarxRegressor(n_y=1, n_x=0, degree=1, solver="ols").fit(xs, ys)
    coef_pc = np.zeros(classical.basis_.n_terms)
    coef_pc[pcn.active_] = pcn.predict_coefficients(np.array([[0.4]]))[0]
    pc_gap = float(np.max(np.abs(coef_pc - classical.coef_)))

    xs2 = [rng.standard_normal(120) for _ in range(3)]
    ys2 = []
    for x in xs2:
        y = np.zeros(120)
        for k in range(1, 120):
            y[k] = 0.6 * y[k - 1] + 0.2 * x[k]
        ys2.append(y)
    cls2 = NarxRegressor(n_y=1, n_x=1, degree=2, solver="ols").fit(xs2, ys2)
    mn2 = MNarxRegressor(stages=(), final_inputs=("x",), n_y=1, n_x=1,
                         degree=2, solver="ols").fit(xs2, ys2)
    probe = rng.standard_normal(120)
    bit_match = np.array_equal(cls2.forecast(probe), mn2.forecast(probe))

    p = BoucWenParams(zeta=0.02, omega=2.0 * math.pi, alpha=0.0, A_amp=1.0,
                      omega_x=math.pi, beta_hyst=0.0)
    grid = TimeGrid.from_duration(10.0, 0.01)
    traj = simulate_bouc_wen(p, grid, substeps=4)
    exact = forced_sdof_response(grid.times(), p.zeta, p.omega, p.A_amp, p.omega_x)
    linear_gap = float(np.max(np.abs(traj.values - exact)))

    ok = pc_gap <= 1e-10 and bit_match and linear_gap <= 1e-5
    _report("degeneracy-identities", ok,
            f"pc-narx gap {pc_gap:.1e}, mnarx bit-match {bit_match}, "
            f"linear-oscillator gap {linear_gap:.1e}")
    assert pc_gap <= 1e-10
    assert bit_match
    assert linear_gap <= 1e-5


def test_determinism(tmp_path):
    """Two runs of an experiment with identical configuration and seed
    produce identical metric CSVs."""
    config = {
        "experiment": "bouc-wen-warp",
        "seed": 9,
        "grid": {"t_end": 6.0, "dt": 0.02},
        "ed_size": 10,
        "validation_size": 6,
        "surrogate": {"score_degree": 3, "beta_degree": 3, "frozen_degree": 2},
    }
    run_experiment(config, out_dir=tmp_path / "a")
    run_experiment(config, out_dir=tmp_path / "b")
    config2 = {
        "experiment": "coupled-pcnarx",
        "seed": 9,
        "grid": {"t_end": 4.0, "dt": 0.05, "substeps": 2},
        "ed_size": 10,
        "validation_size": 5,
        "surrogate": {"d_pce": 2, "pce_max_terms": 8},
    }
    run_experiment(config2, out_dir=tmp_path / "c")
    run_experiment(config2, out_dir=tmp_path / "d")
    same = True
    for pair, names in ((("a", "b"), ("metrics_timewarp.csv",
                                      "metrics_time_frozen.csv")),
                        (("c", "d"), ("metrics_narx.csv", "metrics_pcnarx.csv",
                                      "comparison.csv"))):
        for name in names:
            left = (tmp_path / pair[0] / name).read_bytes()
            right = (tmp_path / pair[1] / name).read_bytes()
            same = same and left == right
    _report("determinism", same, "metric CSVs byte-identical across reruns")
    assert same


def test_manifest_reproduction_metadata(bouc_wen_study):
    """Manifests carry the configuration hash, seed and per-file checksums
    needed to reproduce and verify a run."""
    with open(f"{bouc_wen_study['directory']}/manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    ok = ("config_hash" in manifest and "seed" in manifest
          and all({"name", "bytes", "sha256"} <= set(e) for e in manifest["files"]))
    _report("manifest-metadata", ok,
            f"{len(manifest['files'])} files listed with checksums")
    assert ok
