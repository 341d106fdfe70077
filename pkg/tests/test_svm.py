"""Tests for the linear (Pegasos) and RBF (SMO) SVM solvers."""

import numpy as np
import pytest

from oracles import bf_solve_svm_dual, rbf_kernel_matrix
from patentscape.errors import PatentscapeError, TrainingError
from patentscape.features.sparse import SparseVector
from patentscape.svm import (
    KernelSvmModel,
    LinearSvmModel,
    decision_value,
    decision_values,
    kkt_violations,
    load_model,
    margin_distance,
    model_from_json,
    model_to_json,
    objective,
    predict,
    save_model,
    train_linear,
    train_smo_rbf,
)


def sv(*coords):
    return SparseVector.from_dense(np.asarray(coords, dtype=np.float64))


def dataset(points, labels):
    return [(sv(*p), y) for p, y in zip(points, labels)]


XOR4 = dataset([(0, 0), (1, 1), (1, 0), (0, 1)], [1, 1, -1, -1])

# two scaled squares with XOR labeling; RBF-separable, linearly not
XOR8 = dataset(
    [(s * a, s * b) for s in (1, 2) for a, b in ((1, 1), (-1, -1), (1, -1), (-1, 1))],
    [1, 1, -1, -1] * 2,
)


def accuracy(model, data):
    hits = sum(1 for vec, y in data if predict(model, vec) == y)
    return hits / len(data)


def blob_data(rng_seed=7, n=40):
    rng = np.random.default_rng(rng_seed)
    pos = rng.normal((3.0, 3.0), 0.6, size=(n // 2, 2))
    neg = rng.normal((-3.0, -3.0), 0.6, size=(n // 2, 2))
    return dataset(np.vstack([pos, neg]), [1] * (n // 2) + [-1] * (n // 2))


class TestLinearTraining:
    def test_separable_pair_signs(self):
        data = dataset([(1, 0), (-1, 0)], [1, -1])
        model = train_linear(data)
        assert decision_value(model, data[0][0]) > 0
        assert decision_value(model, data[1][0]) < 0

    def test_xor_not_linearly_separable(self):
        model = train_linear(XOR4, epochs=200)
        assert accuracy(model, XOR4) <= 0.75

    def test_blobs_high_accuracy(self):
        data = blob_data()
        model = train_linear(data)
        assert accuracy(model, data) >= 0.95

    def test_beats_zero_model_objective(self):
        data = blob_data()
        model = train_linear(data)
        # the all-zero model has mean hinge exactly 1
        assert objective(model, data) < 1.0

    def test_deterministic_for_fixed_seed(self):
        data = blob_data()
        a = train_linear(data, rng_seed=3)
        b = train_linear(data, rng_seed=3)
        assert np.array_equal(a.weight, b.weight)
        assert a.bias == b.bias

    def test_seed_changes_trajectory(self):
        data = blob_data()
        a = train_linear(data, rng_seed=0, average=False, epochs=2)
        b = train_linear(data, rng_seed=1, average=False, epochs=2)
        assert not np.array_equal(a.weight, b.weight)

    def test_duplication_leaves_objective_unchanged(self):
        data = blob_data(rng_seed=11, n=20)
        lam, epochs = 1.0, 800
        single = train_linear(data, lam=lam, epochs=epochs)
        doubled = train_linear(data * 2, lam=lam, epochs=epochs)
        assert objective(single, data) == pytest.approx(objective(doubled, data), abs=1e-3)

    def test_single_class_rejected(self):
        with pytest.raises(TrainingError):
            train_linear(dataset([(1, 0), (2, 0)], [1, 1]))

    def test_empty_rejected(self):
        with pytest.raises(TrainingError):
            train_linear([])

    def test_bad_label_rejected(self):
        with pytest.raises(TrainingError):
            train_linear([(sv(1.0), 1), (sv(2.0), 0)])

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(TrainingError):
            train_linear([(sv(1.0), 1), (sv(1.0, 2.0), -1)])

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(TrainingError):
            train_linear(dataset([(1, 0), (-1, 0)], [1, -1]), lam=0.0)


class TestSharedInterface:
    def linear(self, w, b):
        return LinearSvmModel(
            weight=np.asarray(w, dtype=np.float64), bias=b, lam=1e-4, epochs=0, rng_seed=0
        )

    def test_hand_computed_margin(self):
        model = self.linear([2.0, 0.0], 0.0)
        assert decision_value(model, sv(1, 0)) == pytest.approx(2.0)
        assert margin_distance(model, sv(1, 0)) == pytest.approx(1.0)

    def test_point_on_hyperplane(self):
        model = self.linear([2.0, 0.0], -2.0)
        assert margin_distance(model, sv(1, 0)) == 0.0
        assert predict(model, sv(1, 0)) == -1  # ties go negative

    def test_margin_invariant_under_model_scaling(self):
        base = self.linear([1.5, -0.5], 0.25)
        scaled = self.linear([4.5, -1.5], 0.75)
        for point in [(0, 0), (1, 2), (-3, 0.5)]:
            assert margin_distance(base, sv(*point)) == pytest.approx(
                margin_distance(scaled, sv(*point))
            )
            assert predict(base, sv(*point)) == predict(scaled, sv(*point))

    def test_zero_weight_falls_back_to_decision(self):
        model = self.linear([0.0, 0.0], -0.5)
        assert margin_distance(model, sv(1, 1)) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        model = self.linear([1.0, 0.0], 0.0)
        with pytest.raises(PatentscapeError):
            decision_value(model, sv(1, 2, 3))

    def test_decision_values_vectorized_matches_scalar(self):
        data = blob_data(n=10)
        model = train_smo_rbf(data, C=10.0, gamma=0.3)
        points = [vec for vec, _ in data]
        batch = decision_values(model, points)
        singles = [decision_value(model, v) for v in points]
        assert np.allclose(batch, singles, atol=1e-12)

    def test_non_model_rejected(self):
        with pytest.raises(PatentscapeError):
            decision_value(object(), sv(1.0))


class TestSmo:
    def test_two_point_symmetry(self):
        data = dataset([(1, 0), (-1, 0)], [1, -1])
        model = train_smo_rbf(data, C=10.0, gamma=0.5)
        assert len(model.support_vectors) == 2
        assert abs(decision_value(model, sv(0, 0))) < 1e-6
        assert predict(model, data[0][0]) == 1
        assert predict(model, data[1][0]) == -1

    def test_xor8_fully_separated(self):
        model = train_smo_rbf(XOR8, C=10.0, gamma=1.0)
        assert accuracy(model, XOR8) == 1.0

    def test_alphas_respect_box(self):
        model = train_smo_rbf(blob_data(n=12), C=2.0, gamma=0.4)
        assert np.all(model.alphas >= 0.0)
        assert np.all(model.alphas <= 2.0 + 1e-12)

    def test_kkt_within_tolerance(self):
        data = blob_data(rng_seed=5, n=16)
        model = train_smo_rbf(data, C=1.0, gamma=0.5, tolerance=1e-3)
        assert kkt_violations(model, data).max() <= 1e-3

    def test_deterministic(self):
        data = blob_data(n=14)
        a = train_smo_rbf(data, C=1.0)
        b = train_smo_rbf(data, C=1.0)
        assert np.array_equal(a.coefficients, b.coefficients)
        assert a.bias == b.bias
        assert a.iterations == b.iterations

    def test_gamma_defaults_to_inverse_dimension(self):
        data = dataset([(1, 0, 0, 0), (-1, 0, 0, 0)], [1, -1])
        model = train_smo_rbf(data)
        assert model.gamma == pytest.approx(0.25)

    @pytest.mark.parametrize("seed", range(12))
    def test_dual_matches_qp_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 13))
        X = rng.normal(0.0, 1.5, size=(n, 3))
        labels = np.ones(n, dtype=int)
        labels[: n // 2] = -1
        rng.shuffle(labels)
        if len(set(labels.tolist())) < 2:
            labels[0] = -labels[0]
        C = float(rng.choice([0.5, 1.0, 10.0]))
        data = dataset(X, labels)
        model = train_smo_rbf(data, C=C, gamma=1.0, tolerance=1e-4)
        _, oracle_obj = bf_solve_svm_dual(rbf_kernel_matrix(X, 1.0), labels, C)
        assert model.dual_objective == pytest.approx(oracle_obj, abs=1e-3)
        assert kkt_violations(model, data).max() <= 1e-4

    def test_kernel_margin_is_abs_decision(self):
        data = blob_data(n=10)
        model = train_smo_rbf(data, C=5.0, gamma=0.3)
        probe = sv(0.7, -0.2)
        assert margin_distance(model, probe) == pytest.approx(
            abs(decision_value(model, probe))
        )

    def test_nonpositive_c_rejected(self):
        with pytest.raises(TrainingError):
            train_smo_rbf(dataset([(1, 0), (-1, 0)], [1, -1]), C=0.0)

    def test_single_class_rejected(self):
        with pytest.raises(TrainingError):
            train_smo_rbf(dataset([(1, 0), (2, 0)], [1, 1]))


class TestCheckpoints:
    def test_linear_roundtrip(self, tmp_path):
        data = blob_data(n=12)
        model = train_linear(data)
        path = tmp_path / "linear.json"
        save_model(model, path)
        loaded = load_model(path)
        assert isinstance(loaded, LinearSvmModel)
        assert np.array_equal(loaded.weight, model.weight)
        assert loaded.bias == model.bias
        assert loaded.lam == model.lam
        assert loaded.rng_seed == model.rng_seed

    def test_rbf_roundtrip_preserves_decisions(self, tmp_path):
        data = blob_data(n=12)
        model = train_smo_rbf(data, C=3.0, gamma=0.7)
        path = tmp_path / "rbf.json"
        save_model(model, path)
        loaded = load_model(path)
        assert isinstance(loaded, KernelSvmModel)
        for vec, _ in data:
            assert decision_value(loaded, vec) == pytest.approx(
                decision_value(model, vec), abs=1e-12
            )
        assert loaded.gamma == model.gamma
        assert loaded.dual_objective == model.dual_objective

    def test_loaded_model_has_no_alphas(self):
        data = dataset([(1, 0), (-1, 0)], [1, -1])
        model = model_from_json(model_to_json(train_smo_rbf(data, C=10.0)))
        with pytest.raises(PatentscapeError):
            kkt_violations(model, data)

    def test_unversioned_payload_rejected(self):
        with pytest.raises(PatentscapeError):
            model_from_json('{"kind": "linear-svm"}')

    def test_unknown_kind_rejected(self):
        payload = model_to_json(train_linear(dataset([(1, 0), (-1, 0)], [1, -1])))
        with pytest.raises(PatentscapeError):
            model_from_json(payload.replace("linear-svm", "poly-svm"))
