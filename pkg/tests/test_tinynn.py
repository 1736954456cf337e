import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tinytm.simulate import Dataset
from tinytm.tinynn import (
    MAX_FLOPS,
    MAX_PARAMS,
    REFERENCE,
    AdamState,
    BudgetError,
    PlateauScheduler,
    ShapeError,
    TrainConfig,
    WeightsFormatError,
    adam_step,
    backward,
    batch_loss,
    count_flops,
    count_params,
    forward,
    init_weights,
    iterations_per_epoch,
    load_weights,
    loss,
    normalize_params,
    plateau_scheduler,
    raw_to_params,
    save_weights,
    train,
    zero_weights,
)
from tinytm.tinynn.loss import batch_loss_and_grad, logistic
from tinytm.tinynn.model import Activation, Architecture, Conv1d, Dense, Flatten, Scale
from tinytm.tinynn.serialize import dumps, loads
from tinytm.tone_curve import ToneCurveParams

from gradcheck import gradient_checks, pick_weights, simulated_inputs


def closed_integral(g):
    return (1 + g) / g * (1 - math.log1p(g) / g)


def random_hists(rng, n):
    h = rng.dirichlet(np.full(256, 0.3), size=(n, 2))
    return h


def random_gts(rng, n):
    return np.column_stack(
        [
            rng.uniform(-20, 2, n),
            rng.uniform(2, 20, n),
            rng.uniform(0, 3, n),
            np.exp(rng.uniform(math.log(3), math.log(20000), n)),
        ]
    )


def toy_dataset(rng, n):
    return Dataset(random_hists(rng, n), random_gts(rng, n))


@pytest.fixture
def weights():
    return init_weights(REFERENCE, np.random.default_rng(0))


class TestBudgets:
    def test_reference_within_budget(self):
        assert count_params(REFERENCE) <= MAX_PARAMS
        assert count_flops(REFERENCE) <= MAX_FLOPS

    def test_reference_counts(self):
        # 2*4*8+4 + 4*8*4+8 + 64*10+10 + 10*4+4
        assert count_params(REFERENCE) == 898
        # root and scale on 512 inputs, then the layers
        assert count_flops(REFERENCE) == 1024 + 4224 + 128 + 2112 + 64 + 1290 + 10 + 84

    def test_budget_error_on_oversized_training(self):
        big = Architecture(
            (Scale(1.0), Conv1d("c", 2, 2, 1, 1), Flatten(), Dense("d", 512, 4))
        )
        assert count_params(big) > MAX_PARAMS
        rng = np.random.default_rng(0)
        with pytest.raises(BudgetError):
            train(toy_dataset(rng, 4), toy_dataset(rng, 4), TrainConfig(max_epochs=1), arch=big)

    def test_architecture_must_end_in_four_outputs(self):
        with pytest.raises(ShapeError):
            Architecture((Flatten(), Dense("d", 512, 3))).shapes()


class TestForward:
    def test_zero_weights_give_zero(self):
        rng = np.random.default_rng(1)
        out = forward(zero_weights(), random_hists(rng, 3))
        assert np.array_equal(out, np.zeros((3, 4)))

    def test_deterministic(self, weights):
        h = random_hists(np.random.default_rng(2), 5)
        assert np.array_equal(forward(weights, h), forward(weights, h.copy()))

    def test_batch_matches_single(self, weights):
        h = random_hists(np.random.default_rng(3), 4)
        batch = forward(weights, h)
        for i in range(4):
            np.testing.assert_allclose(forward(weights, h[i]), batch[i : i + 1], rtol=1e-12)

    def test_bad_input_shape(self, weights):
        with pytest.raises(ShapeError):
            forward(weights, np.zeros((2, 128)))

    def test_weights_reject_wrong_shape(self, weights):
        tensors = dict(weights.tensors)
        tensors["dense2.bias"] = np.zeros(5)
        with pytest.raises(ShapeError):
            type(weights)(tensors, REFERENCE)

    def test_weights_reject_nonfinite(self, weights):
        tensors = dict(weights.tensors)
        tensors["dense2.bias"] = np.array([0.0, np.nan, 0.0, 0.0])
        with pytest.raises(ValueError):
            type(weights)(tensors, REFERENCE)

    def test_relu_and_softplus_variants_run(self):
        for kind in ("relu", "softplus"):
            arch = Architecture(
                (Scale(256.0), Conv1d("c", 2, 2, 16, 16), Activation(kind), Flatten(), Dense("d", 32, 4))
            )
            w = init_weights(arch, np.random.default_rng(0))
            assert np.all(np.isfinite(forward(w, random_hists(np.random.default_rng(1), 2))))


class TestRawToParams:
    def test_zero_maps_to_midpoints(self):
        p = raw_to_params([0, 0, 0, 0])
        assert p.sigmoid_start == pytest.approx(-9)
        assert p.sigmoid_end == pytest.approx(11)
        assert p.gain1 == pytest.approx(1.5)
        assert p.gain2 == pytest.approx(math.sqrt(60000), rel=1e-12)

    def test_limits(self):
        assert raw_to_params([-np.inf] * 4).as_tuple() == pytest.approx((-20, 2, 0, 3))
        assert raw_to_params([np.inf] * 4).as_tuple() == pytest.approx((2, 20, 3, 20000))
        assert raw_to_params([-800] * 4).in_range()
        assert raw_to_params([800] * 4).in_range()

    @given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4))
    def test_always_in_range(self, raw):
        assert raw_to_params(raw).in_range()

    def test_normalize_round_trip(self):
        gts = random_gts(np.random.default_rng(4), 50)
        u = normalize_params(gts)
        assert np.all((u >= 0) & (u <= 1))
        for row, urow in zip(gts, u):
            back = raw_to_params(np.log(urow / (1 - urow))).as_tuple()
            np.testing.assert_allclose(back, row, rtol=1e-9, atol=1e-9)


class TestLoss:
    def test_equal_is_zero(self):
        p = ToneCurveParams(-3.0, 8.0, 1.0, 500.0)
        assert loss(p, p) == 0.0

    def test_full_range_sigmoid_start(self):
        a = ToneCurveParams(-20.0, 8.0, 1.0, 500.0)
        b = ToneCurveParams(2.0, 8.0, 1.0, 500.0)
        assert loss(a, b) == pytest.approx(0.25, abs=1e-12)

    def test_gain2_extremes(self):
        a = ToneCurveParams(-3.0, 8.0, 1.0, 3.0)
        b = ToneCurveParams(-3.0, 8.0, 1.0, 20000.0)
        cil = abs(closed_integral(3.0) - closed_integral(20000.0))
        assert loss(a, b, cil_weight=0.0) == pytest.approx(0.25, abs=1e-12)
        assert loss(a, b) - 0.25 == pytest.approx(cil, abs=1e-3)
        assert loss(a, b, cil_weight=2.0) - 0.25 == pytest.approx(2 * cil, abs=2e-3)

    def test_non_negative_and_symmetric(self):
        rng = np.random.default_rng(5)
        for a, b in zip(random_gts(rng, 30), random_gts(rng, 30)):
            pa, pb = ToneCurveParams(*a), ToneCurveParams(*b)
            assert loss(pa, pb) > 0
            assert loss(pa, pb) == pytest.approx(loss(pb, pa), rel=1e-12)


class TestGradients:
    def test_finite_differences(self):
        rng = np.random.default_rng(6)
        w = init_weights(REFERENCE, rng)
        hists, gts = simulated_inputs(10, seed=6)
        checks = []
        for hist, gt in zip(hists, gts):
            checks += gradient_checks(w, hist, gt, pick_weights(w, rng, 100))
        smooth = [c for c in checks if not c.crosses_kink]
        assert len(smooth) >= 990
        assert max(c.rel_err for c in smooth) < 1e-4

    def test_difference_error_shrinks_quadratically(self):
        # the residual is truncation error of the oracle, not a gradient bug
        rng = np.random.default_rng(16)
        w = init_weights(REFERENCE, rng)
        hists, gts = simulated_inputs(3, seed=16)
        for hist, gt in zip(hists, gts):
            picks = pick_weights(w, rng, 30)
            coarse = gradient_checks(w, hist, gt, picks, h=1e-3)
            fine = gradient_checks(w, hist, gt, picks, h=1e-4)
            for c, f in zip(coarse, fine):
                if c.crosses_kink or f.crosses_kink:
                    continue
                assert abs(f.analytic - f.numeric) <= max(abs(c.analytic - c.numeric) / 30, 1e-10)

    def test_kink_crossing_detected(self, weights):
        hist = random_hists(np.random.default_rng(17), 1)
        unit = logistic(forward(weights, hist))
        # put the target for output 0 a hair away from the prediction
        unit[0, 0] += 1e-9
        from tinytm.tinynn import denormalize_params

        gt = denormalize_params(unit)
        picks = [("dense2.bias", (0,))]
        assert gradient_checks(weights, hist[0], gt, picks)[0].crosses_kink

    def test_stationary_at_constructed_minimum(self, weights):
        hist = random_hists(np.random.default_rng(7), 3)
        targets = logistic(forward(weights, hist))
        value, grads = batch_loss_and_grad(weights, hist, targets)
        assert value == 0.0
        norm = math.sqrt(sum(float((g**2).sum()) for g in grads.values()))
        assert norm < 1e-6

    def test_batch_is_mean_of_samples(self, weights):
        rng = np.random.default_rng(8)
        hist, gts = random_hists(rng, 6), random_gts(rng, 6)
        batch = backward(weights, hist, gts)
        singles = [backward(weights, hist[i : i + 1], gts[i : i + 1]) for i in range(6)]
        for name in batch:
            mean = np.mean([s[name] for s in singles], axis=0)
            assert np.max(np.abs(batch[name] - mean)) < 1e-9

    def test_gradient_shapes(self, weights):
        rng = np.random.default_rng(9)
        grads = backward(weights, random_hists(rng, 2), random_gts(rng, 2))
        assert {k: g.shape for k, g in grads.items()} == {k: v.shape for k, v in weights.tensors.items()}


class TestAdam:
    def test_first_step(self, weights):
        grads = {k: np.ones_like(v) for k, v in weights.tensors.items()}
        new, state = adam_step(weights, grads, AdamState(), lr=1e-4)
        for k in weights.tensors:
            np.testing.assert_allclose(new[k] - weights[k], -1e-4, rtol=1e-7)
        assert state.t == 1

    def test_zero_gradient_keeps_weights_and_decays_moments(self, weights):
        ones = {k: np.ones_like(v) for k, v in weights.tensors.items()}
        zeros = {k: np.zeros_like(v) for k, v in weights.tensors.items()}
        w1, s1 = adam_step(weights, ones, AdamState(), lr=1e-4)
        frozen = init_weights(REFERENCE, np.random.default_rng(0))
        w0, s0 = adam_step(frozen, zeros, AdamState(), lr=1e-4)
        assert w0 == frozen
        w2, s2 = adam_step(w1, zeros, s1, lr=0.0)
        assert w2 == w1
        for k in s1.m:
            np.testing.assert_allclose(s2.m[k], 0.9 * s1.m[k])
            np.testing.assert_allclose(s2.v[k], 0.999 * s1.v[k])

    def test_shape_mismatch(self, weights):
        grads = {k: np.ones(3) for k in weights.tensors}
        with pytest.raises(ShapeError):
            adam_step(weights, grads, AdamState(), lr=1e-4)
        with pytest.raises(ShapeError):
            adam_step(weights, {}, AdamState(), lr=1e-4)

    def test_identical_trajectories(self):
        def run():
            rng = np.random.default_rng(10)
            w = init_weights(REFERENCE, rng)
            state = AdamState()
            hist, gts = random_hists(rng, 8), random_gts(rng, 8)
            for _ in range(5):
                w, state = adam_step(w, backward(w, hist, gts), state, lr=1e-3)
            return w

        assert run() == run()


class TestPlateauScheduler:
    def test_decreasing_history_keeps_rate(self):
        assert plateau_scheduler([1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2], 1e-4) == 1e-4

    def test_flat_history(self):
        assert plateau_scheduler([1.0] * 7, 1e-4) == 1e-4
        assert plateau_scheduler([1.0] * 8, 1e-4) == pytest.approx(3e-5)

    def test_resets_after_reduction(self):
        assert plateau_scheduler([1.0] * 9, 1e-4) == pytest.approx(3e-5)
        assert plateau_scheduler([1.0] * 16, 1e-4) == pytest.approx(9e-6)

    def test_floor(self):
        assert plateau_scheduler([1.0] * 50, 1e-8) == 1e-8
        assert plateau_scheduler([1.0] * 50, 2e-8) == 1e-8

    def test_empty_history(self):
        with pytest.raises(ValueError):
            plateau_scheduler([], 1e-4)

    def test_stateful_matches_replay(self):
        vals = [1.0, 0.9, 0.95, 0.95, 0.95, 0.92, 0.93, 0.91, 0.96, 0.9, 0.8]
        s = PlateauScheduler(1e-3)
        for i, v in enumerate(vals):
            assert s.step(v) == plateau_scheduler(vals[: i + 1], 1e-3)


class TestTrainConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.learning_rate, c.batch_size, c.plateau_factor, c.plateau_patience, c.min_lr) == (
            1e-4,
            16,
            0.3,
            6,
            1e-8,
        )
        assert c.cil_weight == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [{"learning_rate": 0}, {"batch_size": 0}, {"plateau_factor": 1.0}, {"max_epochs": -1}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestTrain:
    def test_iterations_per_epoch(self):
        assert iterations_per_epoch(30000, 16) == 1875
        assert iterations_per_epoch(17, 16) == 2

    def test_deterministic_history(self):
        rng = np.random.default_rng(11)
        tr, va = toy_dataset(rng, 40), toy_dataset(rng, 10)
        cfg = TrainConfig(learning_rate=1e-3, max_epochs=4, seed=3)
        w1, h1 = train(tr, va, cfg)
        w2, h2 = train(tr, va, cfg)
        assert h1.epochs == h2.epochs
        assert w1 == w2

    def test_history_and_best_weights(self):
        rng = np.random.default_rng(12)
        tr, va = toy_dataset(rng, 40), toy_dataset(rng, 10)
        w, h = train(tr, va, TrainConfig(learning_rate=1e-3, max_epochs=5))
        assert [r.epoch for r in h.epochs] == [1, 2, 3, 4, 5]
        assert h.best_val_loss == min([h.initial_val_loss] + [r.val_loss for r in h.epochs])
        assert all(v.dtype == np.float32 for v in w.tensors.values())
        # best weights reproduce the recorded validation loss up to float32 rounding
        from tinytm.tinynn import dataset_loss

        assert dataset_loss(w, va) == pytest.approx(h.best_val_loss, abs=1e-5)

    def test_empty_dataset(self):
        rng = np.random.default_rng(13)
        empty = Dataset(np.zeros((0, 2, 256)), np.zeros((0, 4)))
        with pytest.raises(ValueError):
            train(empty, toy_dataset(rng, 4), TrainConfig(max_epochs=1))

    def test_zero_epochs_returns_init(self):
        rng = np.random.default_rng(14)
        w, h = train(toy_dataset(rng, 8), toy_dataset(rng, 4), TrainConfig(max_epochs=0, seed=5))
        assert h.epochs == [] and h.best_epoch == 0
        assert w == init_weights(REFERENCE, np.random.default_rng(5)).astype(np.float32)


class TestSerialization:
    def test_round_trip(self, tmp_path, weights):
        w32 = weights.astype(np.float32)
        save_weights(w32, tmp_path / "w.txt")
        assert load_weights(tmp_path / "w.txt") == w32

    def test_lossless_for_awkward_floats(self, weights):
        rng = np.random.default_rng(15)
        w = weights.map(lambda v: (rng.standard_normal(v.shape) * 10.0 ** rng.integers(-30, 30)).astype(np.float32))
        assert loads(dumps(w)) == w

    def test_header(self, weights):
        assert dumps(weights).splitlines()[0] == "TGTM-WEIGHTS v1"
        assert dumps(weights).splitlines()[1] == "layer conv1.weight 4 2 8"

    def test_version_mismatch(self, weights):
        text = dumps(weights).replace("v1", "v2", 1)
        with pytest.raises(WeightsFormatError, match="version"):
            loads(text)

    def test_truncated_names_layer(self, weights):
        text = dumps(weights)
        cut = text[: text.index("layer dense1.weight") + 200]
        with pytest.raises(WeightsFormatError, match="dense1.weight"):
            loads(cut)

    def test_garbage_value_names_layer(self, weights):
        lines = dumps(weights).splitlines()
        lines[4] = "1.0 nope"
        with pytest.raises(WeightsFormatError, match="conv1.bias"):
            loads("\n".join(lines))

    def test_over_budget(self, weights):
        text = dumps(weights) + "layer extra 300\n" + " ".join(["0"] * 300) + "\n"
        with pytest.raises(BudgetError):
            loads(text)

    def test_shape_mismatch(self, weights):
        text = dumps(weights).replace("layer dense2.bias 4", "layer dense2.bias 2 2")
        with pytest.raises(ShapeError):
            loads(text)

    def test_missing_header(self):
        with pytest.raises(WeightsFormatError):
            loads("layer conv1.weight 1\n0\n")
