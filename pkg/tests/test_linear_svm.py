import numpy as np
import pytest

from ids_bench.errors import DomainError
from ids_bench.feature_store import FeatureMatrix
from ids_bench.linear_svm import LabeledFeatures, SvmConfig, decision_values, fit_svm
from ids_bench.rng import generator_from

from oracles import qp_dual_oracle


def labeled(x, y):
    return LabeledFeatures(
        FeatureMatrix(np.asarray(x, dtype=np.float32)), np.asarray(y, dtype=np.float64)
    )


def separable_blobs(n_per_side=100, d=2, margin=1.0, seed=0):
    rng = generator_from(seed)
    pos = rng.standard_normal((n_per_side, d)) * 0.2
    neg = rng.standard_normal((n_per_side, d)) * 0.2
    pos[:, 0] += 1.0 + margin / 2
    neg[:, 0] -= 1.0 + margin / 2
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n_per_side), -np.ones(n_per_side)])
    return x, y


class TestHandCases:
    def test_symmetric_1d_hard_margin(self):
        model = fit_svm(labeled([[-1.0], [1.0]], [-1.0, 1.0]), c_param=1000.0)
        assert model.weights[0] == pytest.approx(1.0, abs=1e-3)
        assert model.bias == pytest.approx(0.0, abs=1e-3)
        f = decision_values(model, FeatureMatrix(np.array([[-2.0], [0.0], [2.0]], dtype=np.float32)))
        assert f == pytest.approx([-2.0, 0.0, 2.0], abs=1e-3)

    def test_label_flip_negates_model(self):
        x, y = separable_blobs(20, 3, seed=5)
        a = fit_svm(labeled(x, y), seed=42)
        b = fit_svm(labeled(x, -y), seed=42)
        assert np.allclose(a.weights, -b.weights, atol=1e-6)
        assert a.bias == pytest.approx(-b.bias, abs=1e-6)

    def test_constant_decision_function(self):
        x, y = separable_blobs(4, 2)
        model = fit_svm(labeled(x, y))
        const = type(model)(
            weights=np.zeros(2),
            bias=0.7,
            c_param=1.0,
            epochs_run=0,
            converged=True,
            dual_objective=0.0,
            objective_history=np.zeros(0),
            alpha=np.zeros(0),
        )
        f = decision_values(const, FeatureMatrix(np.ones((5, 2), dtype=np.float32)))
        assert np.all(f == 0.7)


class TestDualOracle:
    def test_matches_projected_gradient_qp(self):
        rng = generator_from(123)
        x = rng.standard_normal((12, 2))
        y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0  # both classes present
        _, oracle_obj = qp_dual_oracle(x, y, c=1.0, tol=1e-8)
        model = fit_svm(labeled(x, y), c_param=1.0, tol=1e-7, max_epochs=20000, seed=3)
        assert model.dual_objective == pytest.approx(oracle_obj, abs=1e-4)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_oracle_on_random_instances(self, seed):
        rng = generator_from(1000 + seed)
        n = int(rng.integers(6, 21))
        x = rng.standard_normal((n, 3)) * 2.0
        y = np.concatenate([np.ones(n // 2 + 1), -np.ones(n - n // 2 - 1)])
        _, oracle_obj = qp_dual_oracle(x, y, c=0.5, tol=1e-8)
        model = fit_svm(labeled(x, y), c_param=0.5, tol=1e-7, max_epochs=20000, seed=seed)
        assert model.dual_objective == pytest.approx(oracle_obj, abs=1e-4)


class TestTrainingBehavior:
    def test_objective_monotone_nonincreasing(self):
        rng = generator_from(7)
        x = rng.standard_normal((80, 6))
        y = np.where(rng.random(80) < 0.5, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        model = fit_svm(labeled(x, y), seed=11, debug=True)
        hist = model.objective_history
        assert np.all(np.diff(hist) <= 1e-9 * np.maximum(1.0, np.abs(hist[:-1])))

    def test_separable_blobs_perfect_training_accuracy(self):
        x, y = separable_blobs(100, 2, margin=1.0, seed=2)
        model = fit_svm(labeled(x, y), seed=0)
        f = decision_values(model, FeatureMatrix(x.astype(np.float32)))
        assert np.all(np.sign(f) == y)

    def test_deterministic_bit_identical(self):
        rng = generator_from(9)
        x = rng.standard_normal((50, 4))
        y = np.where(rng.random(50) < 0.5, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        a = fit_svm(labeled(x, y), seed=77)
        b = fit_svm(labeled(x, y), seed=77)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias == b.bias
        assert a.dual_objective == b.dual_objective
        assert a.epochs_run == b.epochs_run

    def test_scaling_with_adjusted_c_keeps_sign_vector(self):
        x, y = separable_blobs(60, 2, margin=1.0, seed=4)
        scale = 4.0
        base = fit_svm(labeled(x, y), c_param=1.0, seed=0)
        scaled = fit_svm(labeled(x * scale, y), c_param=1.0 / scale**2, seed=0)
        f_base = decision_values(base, FeatureMatrix(x.astype(np.float32)))
        f_scaled = decision_values(scaled, FeatureMatrix((x * scale).astype(np.float32)))
        assert np.array_equal(np.sign(f_base), np.sign(f_scaled))

    def test_non_convergence_flagged_not_raised(self):
        rng = generator_from(15)
        x = rng.standard_normal((60, 8))
        y = np.where(rng.random(60) < 0.5, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        model = fit_svm(labeled(x, y), max_epochs=2, seed=1)
        assert model.epochs_run == 2
        assert not model.converged

    def test_alpha_within_box(self):
        rng = generator_from(31)
        x = rng.standard_normal((40, 3))
        y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
        y[:2] = [1.0, -1.0]
        model = fit_svm(labeled(x, y), c_param=0.3, seed=5, debug=True)
        assert model.alpha.min() >= 0.0
        assert model.alpha.max() <= 0.3


class TestValidation:
    def test_single_class_rejected(self):
        with pytest.raises(DomainError):
            labeled([[0.0], [1.0]], [1.0, 1.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            labeled([[np.inf], [1.0]], [1.0, -1.0])

    def test_bad_labels_rejected(self):
        with pytest.raises(DomainError):
            labeled([[0.0], [1.0]], [1.0, 0.0])

    def test_dimension_mismatch_in_decision(self):
        x, y = separable_blobs(4, 2)
        model = fit_svm(labeled(x, y))
        with pytest.raises(DomainError):
            decision_values(model, FeatureMatrix(np.ones((2, 3), dtype=np.float32)))

    def test_bad_config_rejected(self):
        with pytest.raises(DomainError):
            SvmConfig(c=-1.0)
        with pytest.raises(DomainError):
            SvmConfig(tol=0.0)
        with pytest.raises(DomainError):
            SvmConfig(max_epochs=0)

    def test_model_json_dump(self, tmp_path):
        x, y = separable_blobs(4, 2)
        model = fit_svm(labeled(x, y))
        path = tmp_path / "model.json"
        model.dump_json(path)
        import json

        loaded = json.loads(path.read_text())
        assert loaded["bias"] == model.bias
        assert loaded["weights"] == model.weights.tolist()
        assert loaded["converged"] == model.converged
