import numpy as np
import pytest

from dsquant.allocator import AllocationConfig, allocate
from dsquant.dataset import Dataset, SampleShape, synth_blobs, synth_half_noise
from dsquant.qds import write_qds
from dsquant.sensitivity import score_dataset
from dsquant.trainer import (
    EvalReport,
    TrainConfig,
    compare,
    evaluate,
    fit_scoring_model,
    initial_model,
    stratified_split,
    train,
    _fit,
)


@pytest.fixture(scope="module")
def blobs():
    return synth_blobs(3, 16, 100, 0.01, seed=2)


class TestTrain:
    def test_separable_blobs_fit_almost_perfectly(self, blobs):
        model = train(blobs, TrainConfig(epochs=10))
        assert evaluate(model, blobs) >= 0.99

    def test_zero_epochs_returns_initialization(self, blobs):
        config = TrainConfig(epochs=0, normalize=False)
        model = train(blobs, config)
        init = initial_model(3, 16, config.seed)
        np.testing.assert_array_equal(model.weights, init.weights)
        np.testing.assert_array_equal(model.bias, init.bias)

    def test_bitwise_deterministic(self, blobs):
        a = train(blobs, TrainConfig(epochs=3))
        b = train(blobs, TrainConfig(epochs=3))
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()

    def test_empty_dataset_rejected(self):
        empty = Dataset(SampleShape(1, 1, 2), 2,
                        np.zeros((0, 2), np.float32), np.zeros(0, np.int64))
        with pytest.raises(ValueError, match="empty"):
            train(empty, TrainConfig())

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reported(self, blobs):
        config = TrainConfig(epochs=3, learning_rate=1e200, weight_decay=1.0,
                             normalize=False)
        with pytest.raises(RuntimeError, match="diverged"):
            train(blobs, config)

    def test_loss_mostly_non_increasing(self, blobs):
        _, curve = _fit(blobs, TrainConfig(epochs=15))
        violations = sum(b > a for a, b in zip(curve, curve[1:]))
        assert violations <= 2

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestEvaluate:
    def test_uniform_logits_pick_class_zero(self):
        from dsquant.sensitivity import LogisticModel
        rng = np.random.default_rng(3)
        dset = Dataset(SampleShape(1, 1, 4), 2,
                       rng.standard_normal((10, 4)).astype(np.float32),
                       np.array([0] * 5 + [1] * 5))
        model = LogisticModel.zeros(2, 4)
        # argmax ties break to class 0, so accuracy is the class-0 share
        assert evaluate(model, dset) == 0.5

    def test_perfect_model_on_train_set(self, blobs):
        model = train(blobs, TrainConfig(epochs=10))
        assert evaluate(model, blobs) >= 0.99

    def test_order_invariant(self, blobs):
        model = train(blobs, TrainConfig(epochs=2))
        perm = np.random.default_rng(0).permutation(len(blobs))
        assert evaluate(model, blobs) == evaluate(model, blobs.subset(perm))

    def test_dimension_mismatch(self, blobs):
        from dsquant.sensitivity import LogisticModel
        with pytest.raises(ValueError, match="dimension"):
            evaluate(LogisticModel.zeros(3, 7), blobs)


class TestStratifiedSplit:
    def test_disjoint_and_covering(self, blobs):
        train_idx, test_idx = stratified_split(blobs, 0.2, seed=1)
        merged = np.sort(np.concatenate([train_idx, test_idx]))
        np.testing.assert_array_equal(merged, np.arange(len(blobs)))

    def test_per_class_proportions(self, blobs):
        _, test_idx = stratified_split(blobs, 0.2, seed=1)
        for c in range(3):
            assert np.sum(blobs.labels[test_idx] == c) == 20

    def test_seeded(self, blobs):
        a = stratified_split(blobs, 0.2, seed=5)
        b = stratified_split(blobs, 0.2, seed=5)
        np.testing.assert_array_equal(a[0], b[0])


class TestCompare:
    def test_16bit_uniform_preserves_accuracy(self, tmp_path):
        dset = synth_blobs(3, 64, 1000, 0.5, seed=0)
        cfg = AllocationConfig("fixed_uniform", (16,))
        plan = allocate(np.zeros(len(dset)), cfg)
        path = tmp_path / "u16.qds"
        write_qds(dset, plan, path)
        report = compare(dset, path, TrainConfig(epochs=10))
        assert isinstance(report, EvalReport)
        assert abs(report.accuracy_delta) <= 0.01
        assert len(report.loss_curve) == 10

    def test_everything_dropped_is_an_error(self, tmp_path):
        dset = synth_blobs(3, 8, 20, 0.5, seed=0)
        plan = allocate(np.zeros(len(dset)),
                        AllocationConfig("fixed_uniform", (8,), prune_ratio=0.0))
        assignments = np.zeros(len(dset), np.int32)
        from dsquant.allocator import AllocationPlan
        plan = AllocationPlan.from_assignments(assignments)
        path = tmp_path / "all0.qds"
        write_qds(dset, plan, path)
        with pytest.raises(ValueError, match="empty training set"):
            compare(dset, path, TrainConfig(epochs=1))

    def test_adaptive_beats_fixed_on_half_noise(self, tmp_path):
        # half the samples are label-free lattice noise: the adaptive
        # plan drops them (their gradients barely move under probing)
        # while the fixed plan keeps degraded versions of everything
        margins = []
        for seed in range(2):
            dset = synth_half_noise(3, 32, 150, 0.05, seed=seed)
            model = fit_scoring_model(dset, "trained", seed=42 + seed)
            scores = score_dataset(dset, model, 4)
            adaptive = allocate(scores, AllocationConfig("adaptive_two_group", (8, 0)))
            fixed = allocate(scores, AllocationConfig("fixed_uniform", (4,)))
            assert adaptive.b_avg == fixed.b_avg == 4.0
            config = TrainConfig(epochs=15, seed=100 + seed)
            deltas = {}
            for name, plan in (("adaptive", adaptive), ("fixed", fixed)):
                path = tmp_path / f"{name}{seed}.qds"
                write_qds(dset, plan, path)
                deltas[name] = compare(dset, path, config).accuracy_delta
            margins.append(deltas["adaptive"] - deltas["fixed"])
        assert np.mean(margins) > 0
