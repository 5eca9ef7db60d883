import copy
import math

import numpy as np
import pytest

from fec.clustering import ClusterAssignment
from fec.contrastive import (
    Gradients,
    LOSS_LITERAL,
    LOSS_NEGLOG,
    adam_step,
    forward,
    init_adam,
    init_head,
    loss_and_grad,
    train_steps,
)
from fec.linalg import Metric
from fec.rng import SplitMix64
from oracles import finite_difference_grads, max_relative_gradient_error


def identity_head(dim):
    head = init_head(dim, dim, n_layers=1, seed=0)
    head.weights[0] = np.eye(dim)
    head.biases[0] = np.zeros(dim)
    return head


class TestInitHead:
    def test_deterministic_given_seed(self):
        a = init_head(6, 12, 2, seed=9)
        b = init_head(6, 12, 2, seed=9)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_seed_sensitivity(self):
        a = init_head(6, 12, 1, seed=9)
        b = init_head(6, 12, 1, seed=10)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_zero_input_zero_output_single_layer(self):
        head = init_head(4, 8, 1, seed=3)
        out = forward(head, np.zeros((2, 4)))
        assert np.all(out == 0.0)

    def test_shapes_and_scaling(self):
        head = init_head(100, 50, 2, seed=1)
        assert head.weights[0].shape == (100, 50)
        assert head.weights[1].shape == (50, 50)
        assert all(np.all(b == 0) for b in head.biases)
        # He-style scale: sample std close to sqrt(2/fan_in)
        assert head.weights[0].std() == pytest.approx(math.sqrt(2 / 100), rel=0.1)

    def test_layer_count_validation(self):
        with pytest.raises(ValueError, match="n_layers"):
            init_head(4, 8, 3, seed=0)


class TestForward:
    def test_identity_fixture(self):
        X = SplitMix64(4).normals(12).reshape(3, 4)
        assert np.allclose(forward(identity_head(4), X), X)

    def test_single_row_matches_batch(self):
        head = init_head(5, 7, 2, seed=2)
        X = SplitMix64(5).normals(20).reshape(4, 5)
        full = forward(head, X)
        for i in range(4):
            assert np.allclose(forward(head, X[i : i + 1]), full[i : i + 1])

    def test_finite_output(self):
        head = init_head(8, 16, 2, seed=6)
        X = SplitMix64(6).normals(80).reshape(10, 8)
        assert np.all(np.isfinite(forward(head, X)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="columns"):
            forward(init_head(4, 8, 1, seed=0), np.zeros((2, 5)))


class TestLoss:
    def test_equidistant_point_scores_ln2(self):
        # identical points in opposite clusters sit exactly on both centers
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        assign = ClusterAssignment.from_labels([0, 1])
        for metric in Metric:
            loss, _ = loss_and_grad(identity_head(2), X, assign, alpha=4.0, metric=metric)
            assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def test_alpha_to_zero_limit_is_ln_k(self):
        rng = SplitMix64(8)
        X = rng.normals(18).reshape(6, 3) + 2.0
        assign = ClusterAssignment.from_labels([0, 0, 1, 1, 2, 2])
        loss, _ = loss_and_grad(identity_head(3), X, assign, alpha=1e-30, metric=Metric.COSINE)
        assert loss == pytest.approx(math.log(3.0), abs=1e-12)

    def test_loss_nonnegative_and_permutation_invariant(self):
        rng = SplitMix64(9)
        X = rng.normals(24).reshape(8, 3)
        labels = [0, 1, 0, 1, 0, 1, 0, 1]
        head = init_head(3, 6, 1, seed=4)
        loss, _ = loss_and_grad(head, X, ClusterAssignment.from_labels(labels), 2.0, Metric.EUCLIDEAN)
        perm = [5, 2, 7, 0, 3, 6, 1, 4]
        loss_p, _ = loss_and_grad(
            head, X[perm], ClusterAssignment.from_labels([labels[i] for i in perm]), 2.0, Metric.EUCLIDEAN
        )
        assert loss >= 0.0
        assert loss == pytest.approx(loss_p, abs=1e-12)

    def test_validation(self):
        X = np.ones((4, 2))
        assign = ClusterAssignment.from_labels([0, 0, 1, 1])
        head = identity_head(2)
        with pytest.raises(ValueError, match="alpha"):
            loss_and_grad(head, X, assign, 0.0, Metric.EUCLIDEAN)
        with pytest.raises(ValueError, match="loss kind"):
            loss_and_grad(head, X, assign, 1.0, Metric.EUCLIDEAN, loss_kind="huh")
        with pytest.raises(ValueError, match="cover"):
            loss_and_grad(head, np.ones((5, 2)), assign, 1.0, Metric.EUCLIDEAN)


class TestGradients:
    @pytest.mark.parametrize("metric", list(Metric))
    @pytest.mark.parametrize("n_layers", [1, 2])
    @pytest.mark.parametrize("loss_kind", [LOSS_NEGLOG, LOSS_LITERAL])
    def test_matches_finite_differences(self, metric, n_layers, loss_kind):
        rng = SplitMix64(100)
        X = rng.normals(6 * 4).reshape(6, 4)
        for labels in ([0, 0, 0, 1, 1, 1], [0, 0, 0, 0, 0, 1]):
            assign = ClusterAssignment.from_labels(labels)
            seed = 17
            while True:
                head = init_head(4, 5, n_layers=n_layers, seed=seed)
                try:
                    _, grads = loss_and_grad(head, X, assign, 2.0, metric, loss_kind=loss_kind)
                    break
                except ValueError:
                    seed += 1  # tiny widths can hit the zero-norm rejection
            fd_w, fd_b = finite_difference_grads(head, X, assign, 2.0, metric, loss_kind)
            assert max_relative_gradient_error(grads, fd_w, fd_b) < 1e-5


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        head = identity_head(2)
        state = init_adam(head, lr=0.01)
        g = Gradients(weights=[np.array([[0.5, 0.0], [0.0, -2.0]])], biases=[np.zeros(2)])
        before = head.weights[0].copy()
        adam_step(head, state, g)
        moved = head.weights[0] - before
        # bias-corrected first step is -lr * sign(g) up to the eps term
        assert moved[0, 0] == pytest.approx(-0.01, rel=1e-4)
        assert moved[1, 1] == pytest.approx(0.01, rel=1e-4)
        assert moved[0, 1] == 0.0

    def test_zero_gradient_keeps_parameters(self):
        head = init_head(3, 4, 1, seed=1)
        state = init_adam(head)
        before = head.weights[0].copy()
        adam_step(head, state, Gradients(weights=[np.zeros((3, 4))], biases=[np.zeros(4)]))
        assert np.array_equal(head.weights[0], before)
        assert state.t == 1

    def test_deterministic(self):
        g = Gradients(weights=[np.full((2, 2), 0.3)], biases=[np.full(2, -0.1)])
        heads = []
        for _ in range(2):
            head = identity_head(2)
            state = init_adam(head)
            adam_step(head, state, g)
            adam_step(head, state, g)
            heads.append(copy.deepcopy(head))
        assert np.array_equal(heads[0].weights[0], heads[1].weights[0])
        assert np.array_equal(heads[0].biases[0], heads[1].biases[0])

    def test_shape_validation(self):
        head = identity_head(2)
        state = init_adam(head)
        bad = Gradients(weights=[np.zeros((3, 3))], biases=[np.zeros(2)])
        with pytest.raises(ValueError, match="shape"):
            adam_step(head, state, bad)


class TestTrainSteps:
    def fixture(self):
        rng = SplitMix64(14)
        X = np.vstack(
            [
                rng.normals(24).reshape(4, 6) + np.array([1, 0, 0, 0, 0, 0]),
                rng.normals(24).reshape(4, 6) + np.array([0, 1, 0, 0, 0, 0]),
            ]
        )
        return X, ClusterAssignment.from_labels([0] * 4 + [1] * 4)

    def test_separable_fixture_converges(self):
        X, assign = self.fixture()
        head = init_head(6, 16, 1, seed=2)
        trace = train_steps(head, X, assign, alpha=3.0, metric=Metric.COSINE, n_steps=200)
        assert len(trace.losses) == 200
        assert trace.losses[-1] < 0.05
        assert trace.losses[-1] < trace.losses[0]

    def test_single_step_trace(self):
        X, assign = self.fixture()
        head = init_head(6, 8, 1, seed=3)
        trace = train_steps(head, X, assign, alpha=3.0, metric=Metric.EUCLIDEAN, n_steps=1)
        assert len(trace.losses) == 1

    def test_reproducible(self):
        X, assign = self.fixture()
        traces = []
        for _ in range(2):
            head = init_head(6, 8, 1, seed=5)
            traces.append(
                train_steps(head, X, assign, alpha=3.0, metric=Metric.COSINE, n_steps=20).losses
            )
        assert traces[0] == traces[1]

    def test_descent_on_random_fixtures(self):
        # long-run minimum dips below the starting loss for small rates
        rng = SplitMix64(30)
        for trial in range(20):
            n, d, k = 6, 4, 2
            X = rng.normals(n * d).reshape(n, d) + 1.5
            labels = [i % k for i in range(n)]
            head = init_head(d, 8, 1, seed=trial)
            trace = train_steps(
                head,
                X,
                ClusterAssignment.from_labels(labels),
                alpha=5.0,
                metric=Metric.COSINE,
                n_steps=60,
                lr=3e-4,
            )
            assert min(trace.losses) <= trace.losses[0]

    def test_step_count_validation(self):
        X, assign = self.fixture()
        with pytest.raises(ValueError, match="n_steps"):
            train_steps(identity_head(6), X, assign, 1.0, Metric.EUCLIDEAN, n_steps=0)
