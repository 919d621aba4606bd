import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logei_bo.errors import DomainError, NumericError, ShapeError
from logei_bo.gp import (
    Dataset,
    GPHyperparams,
    Observation,
    _cholesky_with_jitter,
    default_hyperparams,
    fit,
    kernel_matern52,
    kernel_matrix,
    log_marginal_likelihood,
    predict,
    tune_hyperparams,
)


def hp1(ls=1.0, sv=1.0, noise=0.0):
    return GPHyperparams((ls,), sv, noise)


def random_data(rng, n, d=1, distinct=True):
    X = rng.uniform(0, 1, (n, d))
    y = np.sin(5 * X).sum(1) + 0.3 * rng.standard_normal(n)
    return Dataset(X, y)


def dense_lml(data, hp, log_targets=False):
    """Explicit inverse and determinant on standardized targets."""
    t = np.log(data.y) if log_targets else data.y
    sd = t.std()
    ts = (t - t.mean()) / sd if sd > 0 else np.zeros_like(t)
    n = len(ts)
    K = np.array([[kernel_matern52(a, b, hp) for b in data.X] for a in data.X])
    K += hp.noise_variance * np.eye(n)
    return -0.5 * ts @ np.linalg.inv(K) @ ts - 0.5 * math.log(np.linalg.det(K)) - 0.5 * n * math.log(2 * math.pi)


class TestKernel:
    def test_same_point(self):
        assert kernel_matern52([0.3, 2.0], [0.3, 2.0], GPHyperparams((1.0, 2.0), 2.0)) == 2.0

    def test_unit_distance(self):
        # (1 + sqrt5 + 5/3) exp(-sqrt5) = 0.523994108831820310592... (mpmath)
        assert kernel_matern52([0.0], [1.0], hp1()) == pytest.approx(0.5239941088318203, rel=1e-14)

    def test_decays_monotonically(self):
        d = np.linspace(0, 50, 200)
        k = [kernel_matern52([0.0], [v], hp1()) for v in d]
        assert np.all(np.diff(k) < 0) and k[-1] < 1e-20

    def test_anisotropic_scaling(self):
        hp = GPHyperparams((1.0, 10.0), 1.0)
        assert kernel_matern52([0, 0], [0, 10], hp) == pytest.approx(kernel_matern52([0], [1], hp1()))

    def test_symmetric_and_matrix_agrees(self):
        rng = np.random.default_rng(1)
        A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
        hp = GPHyperparams((0.5, 1.0, 2.0), 1.3)
        K = kernel_matrix(A, B, hp)
        for i in range(4):
            for j in range(5):
                assert K[i, j] == pytest.approx(kernel_matern52(A[i], B[j], hp), rel=1e-12)
                assert kernel_matern52(A[i], B[j], hp) == kernel_matern52(B[j], A[i], hp)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            kernel_matern52([0, 0], [0], hp1())
        with pytest.raises(ShapeError):
            kernel_matern52([0, 0], [0, 1], hp1())


class TestDataset:
    def test_from_observations(self):
        d = Dataset.from_observations([Observation((0.0, 1.0), 2.0), Observation((1.0, 1.0), 3.0)])
        assert d.dim == 2 and len(d) == 2
        assert d.observations[1] == Observation((1.0, 1.0), 3.0)

    def test_rejects_bad(self):
        with pytest.raises(DomainError):
            Dataset(np.zeros((0, 1)), [])
        with pytest.raises(DomainError, match="observation 1"):
            Dataset([[0.0], [np.nan]], [1.0, 2.0])
        with pytest.raises(ShapeError):
            Dataset([[0.0], [1.0]], [1.0])
        with pytest.raises(ShapeError):
            Dataset.from_observations([Observation((0.0,), 1.0), Observation((0.0, 1.0), 1.0)])

    def test_csv_roundtrip(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x1,x2,y\n0.5,1,2\n-1e-3,2.5,3\n")
        d = Dataset.from_csv(p)
        np.testing.assert_array_equal(d.X, [[0.5, 1], [-1e-3, 2.5]])
        np.testing.assert_array_equal(d.y, [2, 3])

    @pytest.mark.parametrize(
        "body,match",
        [
            ("x1,y\n0,1\n1,abc\n", ":3: non-numeric"),
            ("x1,y\n0,1\n1\n", ":3: expected 2 cells"),
            ("a,b\n0,1\n", ":1: header"),
            ("x1,y\n0,nan\n", ":2: non-finite"),
            ("", "empty file"),
        ],
    )
    def test_csv_errors(self, tmp_path, body, match):
        p = tmp_path / "d.csv"
        p.write_text(body)
        with pytest.raises(DomainError, match=match):
            Dataset.from_csv(p)


class TestFitPredict:
    def test_single_noiseless_point(self):
        m = fit(Dataset([[0.0]], [5.0]), hp1())
        post = m.predict([0.0])
        assert post.mu == 5.0 and post.sigma <= 1e-12

    def test_single_point_log_targets(self):
        m = fit(Dataset([[0.0]], [math.e**2]), hp1(), log_targets=True)
        assert m.targets[0] == pytest.approx(2.0, abs=1e-15)
        assert predict(m, [0.0]).mu == pytest.approx(2.0, abs=1e-15)

    def test_two_points_hand_solved(self):
        # 2x2 system: alpha = (K + nI)^-1 t, mean at x=0 is k(0,0) a0 + k(0,1) a1
        hp = hp1(noise=1e-10)
        m = fit(Dataset([[0.0], [1.0]], [0.0, 1.0]), hp)
        k01 = kernel_matern52([0], [1], hp)
        t = np.array([-1.0, 1.0])  # standardized (0, 1)
        det = (1 + 1e-10) ** 2 - k01**2
        a = np.array([(1 + 1e-10) * t[0] - k01 * t[1], -k01 * t[0] + (1 + 1e-10) * t[1]]) / det
        mean_std = a[0] + k01 * a[1]
        assert m.predict_latent([0.0]).mu == pytest.approx(mean_std, abs=1e-12)
        assert m.predict([0.0]).mu == pytest.approx(0.0, abs=1e-6)

    def test_single_point_closed_form_unstandardized(self):
        hp = hp1(ls=0.7, sv=1.5, noise=0.2)
        m = fit(Dataset([[0.1]], [3.0]), hp, standardize=False)
        for x in (0.1, 0.5, 2.0):
            expected = kernel_matern52([x], [0.1], hp) * 3.0 / (1.5 + 0.2)
            assert m.predict([x]).mu == pytest.approx(expected, rel=1e-13)

    def test_interpolates_training_point(self):
        d = random_data(np.random.default_rng(3), 6)
        m = fit(d, hp1(ls=0.3))
        post = m.predict(d.X[2])
        assert post.mu == pytest.approx(d.y[2], abs=1e-8)
        assert post.sigma <= 1e-5

    def test_prior_far_from_data(self):
        d = random_data(np.random.default_rng(4), 5)
        m = fit(d, hp1(ls=0.2, sv=1.7, noise=1e-6))
        assert m.predict_latent([0.5 + 25 * 0.2]).sigma ** 2 == pytest.approx(1.7, abs=1e-6)

    def test_shape_error(self):
        m = fit(Dataset([[0.0, 0.0]], [1.0]), GPHyperparams((1.0, 1.0)))
        with pytest.raises(ShapeError):
            m.predict([0.0])
        with pytest.raises(ShapeError):
            fit(Dataset([[0.0, 0.0]], [1.0]), hp1())

    def test_log_targets_error_names_index(self):
        with pytest.raises(DomainError, match="observation 2"):
            fit(Dataset([[0.0], [1.0], [2.0]], [1.0, 2.0, 0.0]), hp1(), log_targets=True)

    def test_duplicates_noiseless_rejected(self):
        with pytest.raises(DomainError):
            fit(Dataset([[0.0], [0.0]], [1.0, 2.0]), hp1())
        fit(Dataset([[0.0], [0.0]], [1.0, 2.0]), hp1(noise=1e-6))

    def test_jitter_escalation(self):
        K = np.ones((3, 3))
        L, jitter = _cholesky_with_jitter(K, 1.0)
        assert 1e-10 <= jitter <= 1e-4
        np.testing.assert_allclose(L @ L.T, K + jitter * np.eye(3), atol=1e-12)
        with pytest.raises(NumericError):
            _cholesky_with_jitter(np.diag([1.0, -1.0]), 1.0)

    def test_model_is_immutable(self):
        m = fit(Dataset([[0.0], [1.0]], [0.0, 1.0]), hp1())
        with pytest.raises(AttributeError):
            m.target_shift = 3.0


class TestLML:
    def test_unit_scalar(self):
        # one standardized target is 0 and K + noise = 1
        assert log_marginal_likelihood(Dataset([[0.0]], [4.0]), hp1(sv=0.5, noise=0.5)) == pytest.approx(
            -0.9189385332046727, rel=1e-15
        )

    def test_scalar_gaussian(self):
        t, v = 1.7, 0.8
        value = log_marginal_likelihood(Dataset([[0.0]], [t]), hp1(sv=0.5, noise=0.3), standardize=False)
        assert value == pytest.approx(-t * t / (2 * v) - 0.5 * math.log(v) - 0.5 * math.log(2 * math.pi), rel=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_matches_dense(self, n):
        rng = np.random.default_rng(n)
        d = random_data(rng, n, d=2)
        hp = GPHyperparams((0.4, 0.9), 1.3, 1e-3)
        ref = dense_lml(d, hp)
        assert log_marginal_likelihood(d, hp) == pytest.approx(ref, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 20), seed=st.integers(0, 2**31), ls=st.floats(0.05, 0.5))
def test_noiseless_interpolation(n, seed, ls):
    rng = np.random.default_rng(seed)
    X = rng.permutation(np.linspace(0, 1, n))[:, None] + rng.uniform(-0.2 / n, 0.2 / n, (n, 1))
    d = Dataset(X, rng.normal(size=n))
    m = fit(d, hp1(ls=ls))
    mu, _ = m.predict_latent_many(d.X)
    np.testing.assert_allclose(mu, m._std_targets, atol=1e-6, rtol=0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 15), seed=st.integers(0, 2**31), sv=st.floats(0.1, 10), noise=st.floats(0, 0.1))
def test_posterior_variance_bounds(n, seed, sv, noise):
    rng = np.random.default_rng(seed)
    d = Dataset(rng.uniform(0, 1, (n, 2)), rng.normal(size=n))
    m = fit(d, GPHyperparams((0.3, 0.6), sv, noise + 1e-9))
    _, var = m.predict_latent_many(rng.uniform(-1, 2, (50, 2)))
    assert np.all(var >= 0) and np.all(var <= sv * (1 + 1e-8))


@pytest.mark.parametrize("n", [1, 8, 32, 64])
def test_cholesky_reconstruction(n):
    rng = np.random.default_rng(n)
    d = Dataset(rng.uniform(0, 1, (n, 2)), rng.normal(size=n))
    hp = GPHyperparams((0.3, 0.5), 1.0, 1e-6)
    m = fit(d, hp)
    K = kernel_matrix(d.X, d.X, hp) + (hp.noise_variance + m.jitter) * np.eye(n)
    assert np.linalg.norm(m.chol @ m.chol.T - K) / np.linalg.norm(K) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_lml_dense_property(n, seed):
    rng = np.random.default_rng(seed)
    d = random_data(rng, n, d=2)
    hp = GPHyperparams(tuple(rng.uniform(0.2, 2, 2)), float(rng.uniform(0.5, 2)), float(rng.uniform(1e-4, 0.1)))
    assert log_marginal_likelihood(d, hp) == pytest.approx(dense_lml(d, hp), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 2**31))
def test_log_targets_equals_prelogged(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 2))
    y = np.exp(rng.normal(size=n))
    hp = GPHyperparams((0.4, 0.7), 1.1, 1e-4)
    a = fit(Dataset(X, y), hp, log_targets=True)
    b = fit(Dataset(X, np.log(y)), hp, log_targets=False)
    Q = rng.uniform(-0.5, 1.5, (20, 2))
    for qa, qb in zip(a.predict_many(Q), b.predict_many(Q)):
        np.testing.assert_allclose(qa, qb, rtol=1e-12, atol=1e-12)
    assert log_marginal_likelihood(Dataset(X, y), hp, True) == log_marginal_likelihood(Dataset(X, np.log(y)), hp)


class TestTuning:
    def gp_draw(self, seed=0, n=15):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 1, (n, 1))
        hp = hp1(ls=0.25)
        K = kernel_matrix(X, X, hp) + 1e-8 * np.eye(n)
        return Dataset(X, np.linalg.cholesky(K) @ rng.standard_normal(n))

    def test_not_worse_than_default(self):
        d = self.gp_draw()
        tuned = tune_hyperparams(d, budget=6)
        assert log_marginal_likelihood(d, tuned) >= log_marginal_likelihood(d, default_hyperparams(d))

    def test_budget_one_refines_default_once(self):
        d = self.gp_draw(1)
        start = default_hyperparams(d)
        tuned = tune_hyperparams(d, budget=1)
        a = np.log([*start.length_scales, start.signal_variance, start.noise_variance])
        b = np.log([*tuned.length_scales, tuned.signal_variance, tuned.noise_variance])
        assert np.all(np.abs(a - b) <= 1.0 + 1e-12)
        assert log_marginal_likelihood(d, tuned) >= log_marginal_likelihood(d, start)

    def test_deterministic(self):
        d = self.gp_draw(2)
        assert tune_hyperparams(d, budget=4, seed=3) == tune_hyperparams(d, budget=4, seed=3)

    def test_sine_length_scale_matches_grid_scan(self):
        X = np.linspace(0, 1, 20)[:, None]
        d = Dataset(X, np.sin(2 * np.pi * 2 * X[:, 0]))
        tuned = tune_hyperparams(d, budget=10)
        grid = np.geomspace(0.01, 100, 801)
        scan = [
            log_marginal_likelihood(d, hp1(ls=g, sv=tuned.signal_variance, noise=tuned.noise_variance))
            for g in grid
        ]
        best = grid[int(np.argmax(scan))]
        ratio = tuned.length_scales[0] / best
        assert 1 / 3 <= ratio <= 3

    def test_budget_validation(self):
        with pytest.raises(DomainError):
            tune_hyperparams(self.gp_draw(), budget=0)

    def test_log_targets_error(self):
        with pytest.raises(DomainError, match="observation 0"):
            tune_hyperparams(Dataset([[0.0], [1.0]], [-1.0, 2.0]), log_targets=True)
