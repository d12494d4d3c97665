import math

import numpy as np
import pytest

from sparsekr import (
    Dataset,
    DegenerateDataError,
    InsufficientDataError,
    InvalidArgumentError,
    KernelConfig,
    MetricMatrix,
    TrainConfig,
    evaluate,
    fd_gradient_check,
    fit_standardizer,
    apply_standardizer,
    kr_train,
    krpca_train,
    krsml_gradient,
    krsml_train,
    loo_predictions,
    min_eigenvalue,
    mlkr_gradient,
    mlkr_train,
    numerical_rank,
    pca_fit,
    quadratic_loss,
)
from sparsekr.learners import frozen_neighbor_sets, loo_loss_frozen

from helpers import make_planted

SQRT2_INV = 1.0 / math.sqrt(2.0)


def random_instance(seed, n, d, k=5):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = rng.normal(size=n)
    return Dataset(x, y), KernelConfig(k_neighbors=k, sigma=SQRT2_INV)


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            TrainConfig(alpha=0.0)
        with pytest.raises(InvalidArgumentError):
            TrainConfig(mu=-1.0)
        with pytest.raises(InvalidArgumentError):
            TrainConfig(theta=0.0)
        with pytest.raises(InvalidArgumentError):
            TrainConfig(max_iters=-1)

    def test_zero_iterations_allowed(self):
        assert TrainConfig(max_iters=0).max_iters == 0


class TestKrsmlGradient:
    def test_constant_targets_zero_gradient(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.normal(size=(12, 3)), np.full(12, 2.5))
        cfg = TrainConfig(mu=0.0, kernel=KernelConfig(4, SQRT2_INV))
        g = krsml_gradient(data, MetricMatrix.identity(3), cfg)
        np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_constant_targets_keep_regularizer(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.normal(size=(10, 4)), np.full(10, -1.0))
        cfg = TrainConfig(mu=0.3, kernel=KernelConfig(4, SQRT2_INV))
        g = krsml_gradient(data, MetricMatrix.identity(4), cfg)
        np.testing.assert_allclose(g, 0.3 * np.eye(4), atol=1e-12)

    def test_finite_difference_oracle(self):
        data, kernel = random_instance(seed=2, n=15, d=4)
        cfg = TrainConfig(mu=0.1, kernel=kernel)
        m0 = MetricMatrix.identity(4)
        neighbors = frozen_neighbor_sets(data, m0, cfg)

        def loss(m):
            return loo_loss_frozen(data, m, kernel, neighbors) + cfg.mu * np.trace(m)

        g = krsml_gradient(data, m0, cfg)
        assert fd_gradient_check(loss, g, m0.entries, h=1e-5) < 1e-4

    def test_gradient_is_symmetric(self):
        data, kernel = random_instance(seed=3, n=20, d=5)
        g = krsml_gradient(data, MetricMatrix.identity(5),
                           TrainConfig(mu=0.2, kernel=kernel))
        np.testing.assert_array_equal(g, g.T)


class TestMlkrGradient:
    def test_constant_targets_zero(self):
        rng = np.random.default_rng(4)
        data = Dataset(rng.normal(size=(10, 3)), np.zeros(10) + 7.0)
        g = mlkr_gradient(data, np.eye(3), TrainConfig(kernel=KernelConfig(4)))
        np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_zero_factor_zero_gradient(self):
        data, kernel = random_instance(seed=5, n=12, d=3)
        g = mlkr_gradient(data, np.zeros((3, 3)), TrainConfig(kernel=kernel))
        np.testing.assert_array_equal(g, 0.0)

    def test_finite_difference_oracle(self):
        data, kernel = random_instance(seed=6, n=12, d=3)
        cfg = TrainConfig(kernel=kernel)
        rng = np.random.default_rng(7)
        a0 = np.eye(3) + 0.1 * rng.normal(size=(3, 3))

        def metric_of(a):
            m = a.T @ a
            return (m + m.T) / 2

        neighbors = frozen_neighbor_sets(data, metric_of(a0), cfg)

        def loss(a):
            return loo_loss_frozen(data, metric_of(a), kernel, neighbors)

        g = mlkr_gradient(data, a0, cfg)
        assert fd_gradient_check(loss, g, a0, h=1e-5) < 1e-4


class TestFdGradientCheck:
    def test_frobenius_quadratic(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(4, 4))
        err = fd_gradient_check(lambda m: float(np.sum(m * m)), 2.0 * x, x)
        assert err < 1e-8

    def test_trace_linear(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(3, 3))
        err = fd_gradient_check(lambda m: float(np.trace(m)), np.eye(3), x)
        assert err < 1e-8

    def test_rejects_bad_step(self):
        with pytest.raises(InvalidArgumentError):
            fd_gradient_check(lambda m: 0.0, np.eye(2), np.eye(2), h=0.0)


class TestKrsmlTrain:
    def test_zero_iterations_equals_euclidean(self):
        rng = np.random.default_rng(10)
        data = Dataset(rng.normal(size=(40, 3)), rng.normal(size=40))
        kernel = KernelConfig(8, SQRT2_INV)
        model, trace = krsml_train(data, TrainConfig(mu=0.0, max_iters=0, kernel=kernel))
        np.testing.assert_array_equal(model.metric.entries, np.eye(3))
        baseline = kr_train(data, kernel)
        queries = rng.normal(size=(30, 3))
        np.testing.assert_array_equal(model.predict(queries), baseline.predict(queries))
        assert len(trace.records) == 1

    def test_planted_sparse_recovers_low_rank(self):
        train = make_planted(400, seed=1)
        test = make_planted(200, seed=2)
        std = fit_standardizer(train)
        st = apply_standardizer(std, train)
        kernel = KernelConfig(30, SQRT2_INV)
        cfg = TrainConfig(alpha=0.001, mu=8.0, theta=1e-8, max_iters=150, kernel=kernel)
        model, trace = krsml_train(st, cfg, std)
        baseline = kr_train(st, kernel, std)
        assert numerical_rank(model.metric) < 10
        assert evaluate(model, test).rmse < evaluate(baseline, test).rmse

    def test_huge_mu_shrinks_trace_monotonically(self):
        rng = np.random.default_rng(11)
        data = Dataset(rng.normal(size=(40, 5)), rng.normal(size=40))
        cfg = TrainConfig(alpha=1e-5, mu=1e3, theta=1e-12, max_iters=30,
                          kernel=KernelConfig(8, SQRT2_INV))
        _, trace = krsml_train(data, cfg)
        traces = [r.trace_m for r in trace.records if r.accepted]
        assert all(b <= a + 1e-12 for a, b in zip(traces, traces[1:]))
        assert traces[-1] < traces[0]

    def test_iterates_stay_psd(self):
        data, _ = random_instance(seed=12, n=60, d=4, k=10)
        cfg = TrainConfig(alpha=0.002, mu=0.5, theta=1e-12, max_iters=60,
                          kernel=KernelConfig(10, SQRT2_INV))
        _, trace = krsml_train(data, cfg)
        assert all(r.min_eigenvalue >= -1e-10 for r in trace.records)

    def test_objective_identity(self):
        # reported objective equals an independent recomputation
        data, kernel = random_instance(seed=13, n=30, d=3, k=6)
        cfg = TrainConfig(alpha=0.002, mu=0.4, theta=1e-8, max_iters=25, kernel=kernel)
        model, trace = krsml_train(data, cfg)
        reported = trace.summary().final_loss
        recomputed = (quadratic_loss(data.targets,
                                     loo_predictions(data, model.metric, kernel))
                      + cfg.mu * float(np.trace(model.metric.entries)))
        assert reported == pytest.approx(recomputed, abs=1e-10)

    def test_permutation_invariant_objective(self):
        rng = np.random.default_rng(14)
        n = 50
        x = rng.normal(size=(n, 4))
        y = x[:, 0] - 0.5 * x[:, 1] ** 2 + rng.normal(scale=0.1, size=n)
        cfg = TrainConfig(alpha=0.002, mu=0.3, theta=1e-8, max_iters=40,
                          kernel=KernelConfig(8, SQRT2_INV))
        _, trace_a = krsml_train(Dataset(x, y), cfg)
        perm = rng.permutation(n)
        _, trace_b = krsml_train(Dataset(x[perm], y[perm]), cfg)
        assert trace_a.summary().final_loss == pytest.approx(
            trace_b.summary().final_loss, abs=1e-8)

    def test_matches_mlkr_without_regularizer(self):
        # same data term: converged losses agree on an easy instance
        rng = np.random.default_rng(5)
        n = 80
        x = rng.normal(size=(n, 2))
        y = 2.0 * x[:, 0] + rng.normal(scale=0.3, size=n)
        data = Dataset(x, y)
        kernel = KernelConfig(20, SQRT2_INV)
        _, trace_s = krsml_train(data, TrainConfig(alpha=0.005, mu=0.0, theta=1e-6,
                                                   max_iters=2000, kernel=kernel))
        _, trace_m = mlkr_train(data, TrainConfig(alpha=0.001, theta=1e-6,
                                                  max_iters=2000, kernel=kernel))
        ls, lm = trace_s.summary().final_loss, trace_m.summary().final_loss
        assert abs(ls - lm) / max(ls, lm) < 0.05

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            krsml_train(Dataset([[1.0]], [1.0]), TrainConfig())


class TestMlkrTrain:
    def test_zero_iterations_identity(self):
        data, kernel = random_instance(seed=15, n=20, d=3)
        model, _ = mlkr_train(data, TrainConfig(max_iters=0, kernel=kernel))
        np.testing.assert_array_equal(model.metric.entries, np.eye(3))

    def test_anisotropic_weighting(self):
        # y depends on feature 1 only; learned metric should reflect that
        rng = np.random.default_rng(16)
        n = 300
        x = rng.normal(size=(n, 2))
        y = 5.0 * x[:, 0] + rng.normal(scale=0.1, size=n)
        data = Dataset(x, y)
        kernel = KernelConfig(30, SQRT2_INV)
        cfg = TrainConfig(alpha=0.001, theta=1e-8, max_iters=80, kernel=kernel)
        model, trace = mlkr_train(data, cfg)
        m = model.metric.entries
        assert m[0, 0] / m[1, 1] > 1.0
        identity_loss = quadratic_loss(
            y, loo_predictions(data, MetricMatrix.identity(2), kernel))
        assert trace.summary().final_loss < identity_loss

    def test_accepted_losses_non_increasing(self):
        data, kernel = random_instance(seed=17, n=40, d=3, k=8)
        cfg = TrainConfig(alpha=0.01, theta=1e-10, max_iters=50, kernel=kernel)
        _, trace = mlkr_train(data, cfg)
        accepted = [r.loss for r in trace.records if r.accepted]
        assert all(b <= a for a, b in zip(accepted, accepted[1:]))


class TestPcaFit:
    def test_line_collapses_to_one_component(self):
        rng = np.random.default_rng(18)
        t = rng.normal(size=60)
        direction = np.array([1.0, -2.0, 0.5])
        data = Dataset(np.outer(t, direction), rng.normal(size=60))
        basis = pca_fit(data, 0.95)
        assert basis.shape == (3, 1)

    def test_full_threshold_keeps_everything(self):
        rng = np.random.default_rng(19)
        data = Dataset(rng.normal(size=(100, 4)), rng.normal(size=100))
        assert pca_fit(data, 1.0).shape == (4, 4)

    def test_exact_variance_ratios(self):
        # sample variances exactly (4, 1, 0.01): 4/5.01 < 0.95 <= 5/5.01
        rng = np.random.default_rng(20)
        z = rng.normal(size=(80, 3))
        z = (z - z.mean(axis=0)) / z.std(axis=0)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        x = (z * np.array([2.0, 1.0, 0.1])) @ q.T
        data = Dataset(x, rng.normal(size=80))
        assert pca_fit(data, 0.95).shape[1] == 2

    def test_orthonormal_columns(self):
        rng = np.random.default_rng(21)
        data = Dataset(rng.normal(size=(50, 5)) * [3, 2, 1, 0.5, 0.1],
                       rng.normal(size=50))
        basis = pca_fit(data, 0.9)
        np.testing.assert_allclose(basis.T @ basis, np.eye(basis.shape[1]),
                                   atol=1e-10)

    def test_deterministic_signs(self):
        rng = np.random.default_rng(22)
        data = Dataset(rng.normal(size=(40, 3)), rng.normal(size=40))
        np.testing.assert_array_equal(pca_fit(data, 0.9), pca_fit(data, 0.9))

    def test_zero_variance_degenerate(self):
        data = Dataset(np.ones((10, 3)), np.arange(10.0))
        with pytest.raises(DegenerateDataError):
            pca_fit(data, 0.95)

    def test_threshold_bounds(self):
        data = Dataset(np.random.default_rng(23).normal(size=(10, 2)), np.zeros(10))
        with pytest.raises(InvalidArgumentError):
            pca_fit(data, 0.0)
        with pytest.raises(InvalidArgumentError):
            pca_fit(data, 1.5)


class TestKrpcaTrain:
    def test_full_basis_is_isometry(self):
        rng = np.random.default_rng(24)
        data = Dataset(rng.normal(size=(60, 3)), rng.normal(size=60))
        kernel = KernelConfig(6, SQRT2_INV)
        cfg = TrainConfig(kernel=kernel)
        pca_model = krpca_train(data, cfg, variance_threshold=1.0)
        kr_model = kr_train(data, kernel)
        queries = rng.normal(size=(40, 3))
        np.testing.assert_allclose(pca_model.predict(queries),
                                   kr_model.predict(queries), atol=1e-10)

    def test_noise_dominant_variance_hurts(self):
        # the leading components miss the signal contrasts
        train = make_planted(300, seed=3)
        test = make_planted(150, seed=4)
        std = fit_standardizer(train)
        st = apply_standardizer(std, train)
        kernel = KernelConfig(30, SQRT2_INV)
        cfg = TrainConfig(alpha=0.001, mu=8.0, theta=1e-8, max_iters=150,
                          kernel=kernel)
        pca_model = krpca_train(st, cfg, 0.95, std)
        sml_model, _ = krsml_train(st, cfg, std)
        assert evaluate(pca_model, test).rmse > evaluate(sml_model, test).rmse

    def test_collapsed_projection_stays_convex(self):
        rng = np.random.default_rng(25)
        x = np.vstack([rng.normal(size=(30, 3)) - 4, rng.normal(size=(30, 3)) + 4])
        y = np.concatenate([np.zeros(30), np.ones(30)])
        data = Dataset(x, y)
        model = krpca_train(data, TrainConfig(kernel=KernelConfig(5)), 0.5)
        preds = model.predict(rng.normal(size=(20, 3)))
        assert np.all(preds >= 0.0) and np.all(preds <= 1.0)


class TestModel:
    def test_predict_checks_dimension(self):
        rng = np.random.default_rng(26)
        data = Dataset(rng.normal(size=(10, 3)), rng.normal(size=10))
        model = kr_train(data, KernelConfig(3))
        with pytest.raises(InvalidArgumentError):
            model.predict(rng.normal(size=(4, 2)))

    def test_standardizer_applied(self):
        rng = np.random.default_rng(27)
        raw = Dataset(rng.normal(loc=5.0, scale=8.0, size=(50, 2)),
                      rng.normal(size=50))
        std = fit_standardizer(raw)
        model = kr_train(apply_standardizer(std, raw), KernelConfig(5), std)
        direct = kr_train(apply_standardizer(std, raw), KernelConfig(5))
        queries = rng.normal(loc=5.0, scale=8.0, size=(10, 2))
        np.testing.assert_allclose(model.predict(queries),
                                   direct.predict(std.transform(queries)),
                                   atol=1e-12)
