"""Objective function identities and oracle values."""

import math

import numpy as np
import pytest

import nver.tensor as T
from nver.errors import ConfigError, LabelError, ShapeError
from nver.losses import (
    LossConfig,
    cross_entropy,
    joint_loss,
    renyi_divergence_from_distributions,
    renyi_divergence_loss,
)
from nver.tensor import Tensor


def scalar(x):
    return Tensor(np.asarray(x, dtype=np.float64))


class TestLossConfig:
    def test_defaults(self):
        cfg = LossConfig()
        assert (cfg.beta, cfg.delta, cfg.lambda_) == (2.0, 0.2, 0.4)

    @pytest.mark.parametrize(
        "kwargs", [{"beta": 1.0}, {"beta": 0.5}, {"delta": 0.0}, {"lambda_": 1.5}, {"lambda_": -0.1}]
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            LossConfig(**kwargs)

    def test_json_round_trip_uses_lambda_key(self):
        cfg = LossConfig(beta=3.0, delta=0.05, lambda_=0.7)
        d = cfg.to_json_dict()
        assert d == {"beta": 3.0, "delta": 0.05, "lambda": 0.7}
        assert LossConfig.from_json_dict(d) == cfg


class TestCrossEntropy:
    def test_one_hot_correct_is_near_zero(self):
        probs = np.zeros((2, 4))
        probs[0, 1] = 1.0
        probs[1, 3] = 1.0
        loss = cross_entropy(Tensor(probs), np.array([1, 3]))
        assert float(loss.data) <= 1e-7

    def test_uniform_prediction_is_log_c(self):
        probs = np.full((3, 6), 1.0 / 6)
        loss = cross_entropy(Tensor(probs), np.array([0, 2, 5]))
        assert float(loss.data) == pytest.approx(math.log(6), abs=1e-9)

    def test_two_sample_oracle(self):
        # -(ln 0.5 + ln 0.25) / 2 = (ln 2 + ln 4) / 2
        probs = np.array([[0.5, 0.5], [0.25, 0.75]])
        loss = cross_entropy(Tensor(probs), np.array([0, 0]))
        assert float(loss.data) == pytest.approx((math.log(2) + math.log(4)) / 2, abs=1e-9)

    def test_label_out_of_range_names_index(self):
        probs = np.full((3, 4), 0.25)
        with pytest.raises(LabelError, match="index 1"):
            cross_entropy(Tensor(probs), np.array([0, 7, 1]))

    def test_rejects_rows_off_simplex(self):
        with pytest.raises(ConfigError, match="sum to 1"):
            cross_entropy(Tensor(np.ones((2, 3))), np.array([0, 1]))

    def test_gradient_reaches_logits_through_softmax(self):
        rng = np.random.default_rng(0)
        logits = Tensor(rng.standard_normal((4, 5)))
        loss = cross_entropy(T.softmax(logits), np.array([0, 1, 2, 3]))
        loss.backward()
        assert logits.grad is not None and np.any(logits.grad != 0)


class TestRenyiDivergence:
    @pytest.mark.parametrize("m", [2, 16, 128, 1024, 4096])
    @pytest.mark.parametrize("beta", [1.5, 2.0, 3.0])
    @pytest.mark.parametrize("delta", [0.05, 0.2])
    def test_self_divergence_identity(self, m, beta, delta):
        cfg = LossConfig(beta=beta, delta=delta)
        logits = np.random.default_rng(m + int(10 * beta)).standard_normal((3, m))
        loss = renyi_divergence_loss(Tensor(logits), Tensor(logits.copy()), cfg)
        assert float(loss.data) == pytest.approx(cfg.self_divergence(m), abs=1e-6)

    def test_direct_injection_oracle(self):
        # sum = 0.9^2/0.5 + 0.5^2/0.9; loss = ln(sum)/(2-1)
        cfg = LossConfig(beta=2.0, delta=0.2)
        zx = Tensor(np.array([[0.7, 0.3]]))
        zy = Tensor(np.array([[0.3, 0.7]]))
        loss = renyi_divergence_from_distributions(zx, zy, cfg)
        expected = math.log(0.9**2 / 0.5 + 0.5**2 / 0.9)
        assert float(loss.data) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(0.6407, abs=5e-5)

    def test_lower_bound_over_random_pairs(self):
        # brute-force sweep: loss >= ln(1 + M*delta)/(beta-1) for normalized rows
        cfg = LossConfig(beta=2.0, delta=0.2)
        rng = np.random.default_rng(42)
        m = 8
        floor = cfg.self_divergence(m)
        for _ in range(1000):
            zx = rng.dirichlet(np.ones(m)).reshape(1, -1)
            zy = rng.dirichlet(np.ones(m)).reshape(1, -1)
            loss = float(renyi_divergence_from_distributions(Tensor(zx), Tensor(zy), cfg).data)
            assert loss >= floor - 1e-9

    def test_equality_only_at_identical_inputs(self):
        cfg = LossConfig()
        rng = np.random.default_rng(1)
        z = rng.dirichlet(np.ones(6)).reshape(1, -1)
        same = float(renyi_divergence_from_distributions(Tensor(z), Tensor(z.copy()), cfg).data)
        other = rng.dirichlet(np.ones(6)).reshape(1, -1)
        diff = float(renyi_divergence_from_distributions(Tensor(z), Tensor(other), cfg).data)
        assert same == pytest.approx(cfg.self_divergence(6), abs=1e-9)
        assert diff > same + 1e-6

    def test_asymmetry_is_permitted(self):
        # recorded, not asserted: the divergence need not be symmetric
        cfg = LossConfig()
        rng = np.random.default_rng(2)
        x = Tensor(rng.standard_normal((4, 8)))
        y = Tensor(rng.standard_normal((4, 8)))
        forward = float(renyi_divergence_loss(x, y, cfg).data)
        backward = float(renyi_divergence_loss(y, x, cfg).data)
        print(f"asymmetry record: L(x,y)={forward:.6f} L(y,x)={backward:.6f}")

    def test_dimension_mismatch(self):
        cfg = LossConfig()
        with pytest.raises(ShapeError, match="differ"):
            renyi_divergence_loss(Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 5))), cfg)

    def test_gradients_match_finite_differences(self):
        cfg = LossConfig()
        rng = np.random.default_rng(3)
        fx = rng.standard_normal((3, 6))
        fy = rng.standard_normal((3, 6))

        def value(a, b):
            return float(renyi_divergence_loss(Tensor(a), Tensor(b), cfg).data)

        tx, ty = Tensor(fx), Tensor(fy)
        renyi_divergence_loss(tx, ty, cfg).backward()
        h = 1e-6
        for arr, tensor_ in ((fx, tx), (fy, ty)):
            flat = arr.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = value(fx, fy)
                flat[i] = orig - h
                down = value(fx, fy)
                flat[i] = orig
                numeric = (up - down) / (2 * h)
                analytic = tensor_.grad.reshape(-1)[i]
                denom = max(abs(analytic), abs(numeric), 1e-8)
                assert abs(analytic - numeric) / denom < 1e-4


class TestJointLoss:
    def test_lambda_one_is_pure_ce(self):
        out = joint_loss(scalar(1.25), scalar(9.0), 1.0)
        assert float(out.data) == pytest.approx(1.25, abs=1e-12)

    def test_lambda_zero_is_pure_rd(self):
        out = joint_loss(scalar(1.25), scalar(9.0), 0.0)
        assert float(out.data) == pytest.approx(9.0, abs=1e-12)

    def test_weighted_combination(self):
        out = joint_loss(scalar(1.0), scalar(0.5), 0.4)
        assert float(out.data) == pytest.approx(0.7, abs=1e-7)

    def test_linearity(self):
        for a in (0.5, 2.0, 7.5):
            lhs = float(joint_loss(scalar(a * 1.3), scalar(a * 0.2), 0.4).data)
            rhs = a * float(joint_loss(scalar(1.3), scalar(0.2), 0.4).data)
            assert lhs == pytest.approx(rhs, abs=1e-7)

    def test_lambda_out_of_range(self):
        with pytest.raises(ConfigError):
            joint_loss(scalar(1.0), scalar(1.0), 1.2)

    def test_gradient_distributes_linearly(self):
        ce, rd = scalar(1.0), scalar(2.0)
        joint_loss(ce, rd, 0.4).backward()
        assert float(ce.grad) == pytest.approx(0.4)
        assert float(rd.grad) == pytest.approx(0.6)
