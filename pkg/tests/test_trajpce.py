import numpy as np
import pytest

from uqdyn.dynmodels import TimeGrid
from uqdyn.pce import PolynomialChaosRegressor
from uqdyn.randvars import RandomVector, SampleSet, Uniform
from uqdyn.trajpce import (
    PcaPceSurrogate,
    TimeFrozenPce,
    TrajectoryEnsemble,
    fit_pca,
    project_scores,
    reconstruct,
)


class TestFitPca:
    def test_two_trace_hand_computation(self):
        # Traces (1, 0) and (-1, 0): mean 0, eigenvalues (2, 0), mode (1, 0),
        # scores +-1.
        red = fit_pca(np.array([[1.0, 0.0], [-1.0, 0.0]]), epsilon=0.01)
        np.testing.assert_allclose(red.mean, [0.0, 0.0])
        assert red.n_components == 1
        assert red.eigenvalues[0] == pytest.approx(2.0)
        np.testing.assert_allclose(red.modes[:, 0], [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(
            project_scores(red, np.array([[1.0, 0.0], [-1.0, 0.0]]))[:, 0],
            [1.0, -1.0],
        )

    def test_identical_trajectories_mean_only(self):
        y = np.tile([1.0, 2.0, 3.0], (5, 1))
        red = fit_pca(y, epsilon=0.01)
        assert red.n_components == 0
        np.testing.assert_allclose(reconstruct(red, np.zeros(0)), [1.0, 2.0, 3.0])

    def test_recovers_known_modes(self):
        # Oracle: ensemble synthesized from 3 orthonormal modes with
        # mean-zero, mutually orthogonal weight columns of distinct scale,
        # so the empirical eigenmodes equal the construction modes exactly
        # (up to sign).
        rng = np.random.default_rng(0)
        q, n = 120, 40
        modes, _ = np.linalg.qr(rng.standard_normal((q, 3)))
        mean = np.sin(np.linspace(0.0, 3.0, q))
        raw = rng.standard_normal((n, 3))
        centered, _ = np.linalg.qr(raw - raw.mean(axis=0))
        weights = centered * np.array([5.0, 2.0, 0.7])
        y = mean + weights @ modes.T
        red = fit_pca(y, epsilon=1e-6)
        assert red.n_components == 3
        for j in range(3):
            overlap = abs(red.modes[:, j] @ modes[:, j])
            assert overlap == pytest.approx(1.0, abs=1e-8)

    def test_energy_accounting(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((30, 50)) * np.linspace(2.0, 0.1, 50)
        eps = 0.05
        red = fit_pca(y, epsilon=eps)
        kept = np.sum(red.eigenvalues)
        assert kept >= (1.0 - eps) * red.total_variance - 1e-12
        assert kept - red.eigenvalues[-1] < (1.0 - eps) * red.total_variance

    def test_mode_orthonormality(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((25, 60))
        red = fit_pca(y, epsilon=0.2)
        gram = red.modes.T @ red.modes
        assert np.max(np.abs(gram - np.eye(red.n_components))) <= 1e-10

    def test_gram_and_direct_paths_agree(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((40, 12))  # N > Q: direct covariance path
        red_direct = fit_pca(y, epsilon=0.01)
        red_gram = fit_pca(y.copy(), epsilon=0.01)
        np.testing.assert_allclose(red_direct.eigenvalues, red_gram.eigenvalues)

    def test_round_trip_on_full_rank(self):
        rng = np.random.default_rng(4)
        y = np.outer(rng.standard_normal(20), np.ones(30)) + rng.standard_normal((20, 30)) * 0.3
        red = fit_pca(y, epsilon=1e-12)
        back = reconstruct(red, project_scores(red, y))
        np.testing.assert_allclose(back, y, atol=1e-8)

    def test_rejects_single_trace(self):
        with pytest.raises(ValueError):
            fit_pca(np.ones((1, 5)))


class TestProjectScores:
    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(5)
        red = fit_pca(rng.standard_normal((10, 20)), epsilon=0.01)
        np.testing.assert_allclose(project_scores(red, red.mean), 0.0, atol=1e-12)

    def test_single_mode_displacement(self):
        rng = np.random.default_rng(6)
        red = fit_pca(rng.standard_normal((10, 20)), epsilon=0.01)
        y = red.mean + 2.0 * red.modes[:, 0]
        scores = project_scores(red, y)
        assert scores[0] == pytest.approx(2.0)
        np.testing.assert_allclose(scores[1:], 0.0, atol=1e-12)

    def test_training_scores_centered(self):
        rng = np.random.default_rng(7)
        y = rng.standard_normal((15, 25))
        red = fit_pca(y, epsilon=0.01)
        scores = project_scores(red, y)
        np.testing.assert_allclose(scores.mean(axis=0), 0.0, atol=1e-10)


def _rank_one_problem(n=60, q=80, seed=8):
    # Trajectories y_i(t) = x_i * sin(t) for a single uniform input.
    rv = RandomVector([Uniform(-1.0, 1.0)])
    x = rv.sample(n, seed=seed).values
    t = np.linspace(0.0, 2.0 * np.pi, q)
    y = x[:, [0]] * np.sin(t)[None, :]
    return rv, x, t, y


class TestPcaPceSurrogate:
    def test_rank_one_analytic(self):
        rv, x, t, y = _rank_one_problem()
        model = PcaPceSurrogate(rv, epsilon=1e-6).fit(x, y)
        assert model.reduction_.n_components == 1
        pred = model.predict(np.array([[0.3]]))
        np.testing.assert_allclose(pred[0], 0.3 * np.sin(t), atol=1e-6)

    def test_constant_ensemble(self):
        rv = RandomVector([Uniform(-1.0, 1.0)])
        x = rv.sample(10, seed=9).values
        y = np.tile(np.linspace(1.0, 2.0, 30), (10, 1))
        model = PcaPceSurrogate(rv, epsilon=0.01).fit(x, y)
        pred = model.predict(np.array([[0.5], [-0.5]]))
        np.testing.assert_allclose(pred, np.tile(y[0], (2, 1)), atol=1e-12)

    def test_zero_score_models_give_mean(self):
        rv, x, t, y = _rank_one_problem()
        model = PcaPceSurrogate(rv, epsilon=1e-6).fit(x, y)
        model.score_models_[0].coef_ = np.zeros_like(model.score_models_[0].coef_)
        pred = model.predict(np.array([[0.7]]))
        np.testing.assert_allclose(pred[0], model.reduction_.mean)

    def test_reconstruction_error_equals_truncation_tail(self):
        # Trace identity: the (N-1)-normalized reconstruction error of the
        # training set equals the sum of the discarded eigenvalues.
        rng = np.random.default_rng(10)
        rv = RandomVector([Uniform(-1.0, 1.0), Uniform(-1.0, 1.0)])
        x = rv.sample(50, seed=11).values
        t = np.linspace(0.0, 1.0, 40)
        y = (x[:, [0]] * t[None, :] + x[:, [1]] ** 2 * np.cos(3 * t)[None, :]
             + 0.05 * rng.standard_normal((50, 40)))
        model = PcaPceSurrogate(rv, epsilon=0.02).fit(x, y)
        back = reconstruct(model.reduction_, project_scores(model.reduction_, y))
        tail = model.reduction_.total_variance - np.sum(model.reduction_.eigenvalues)
        err = np.sum((back - y) ** 2) / (y.shape[0] - 1)
        assert err == pytest.approx(tail, rel=1e-8)

    def test_prediction_affine_in_scores(self):
        rv, x, t, y = _rank_one_problem()
        model = PcaPceSurrogate(rv, epsilon=1e-6).fit(x, y)
        base = model.predict(np.array([[0.2]]))[0]
        model.score_models_[0].coef_ = 2.0 * model.score_models_[0].coef_
        doubled = model.predict(np.array([[0.2]]))[0]
        np.testing.assert_allclose(
            doubled - model.reduction_.mean, 2.0 * (base - model.reduction_.mean),
            atol=1e-10,
        )

    def test_score_template_cloned(self):
        rv, x, t, y = _rank_one_problem()
        template = PolynomialChaosRegressor(degree=2, solver="lars")
        model = PcaPceSurrogate(rv, epsilon=1e-6, score_pce=template).fit(x, y)
        assert not hasattr(template, "coef_")
        assert model.score_models_[0].degree == 2


class TestTimeFrozenPce:
    def test_linear_map_recovered_exactly(self):
        rv = RandomVector([Uniform(-1.0, 1.0)])
        x = rv.sample(40, seed=12).values
        t = np.linspace(0.0, 1.0, 15)
        y = x[:, [0]] * t[None, :]
        model = TimeFrozenPce(rv, degree=3).fit(x, y)
        pred = model.predict(np.array([[0.25], [-0.8]]))
        np.testing.assert_allclose(pred, np.array([[0.25], [-0.8]]) * t[None, :], atol=1e-8)

    def test_constant_in_x_ensemble(self):
        rv = RandomVector([Uniform(-1.0, 1.0)])
        x = rv.sample(25, seed=13).values
        profile = np.cos(np.linspace(0.0, 2.0, 20))
        y = np.tile(profile, (25, 1))
        model = TimeFrozenPce(rv, degree=4).fit(x, y)
        np.testing.assert_allclose(model.predict(np.array([[0.1]]))[0], profile, atol=1e-10)

    def test_requires_aligned_shapes(self):
        rv = RandomVector([Uniform(-1.0, 1.0)])
        with pytest.raises(ValueError):
            TimeFrozenPce(rv).fit(np.zeros((5, 1)), np.zeros((4, 3)))


class TestTrajectoryEnsemble:
    def test_shape_checked(self):
        grid = TimeGrid(dt=0.1, steps=4)
        with pytest.raises(ValueError):
            TrajectoryEnsemble(grid, np.zeros((3, 5)))

    def test_inputs_alignment_checked(self):
        grid = TimeGrid(dt=0.1, steps=4)
        with pytest.raises(ValueError):
            TrajectoryEnsemble(grid, np.zeros((3, 4)),
                               inputs=SampleSet(np.zeros((2, 1))))
