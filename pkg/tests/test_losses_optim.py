import math

import numpy as np
import pytest

from dreamdrive.errors import PoisonedGradientError
from dreamdrive.numerics import Hyperparams, bce, l1_loss, sgd_momentum_step, softmax_xent
from dreamdrive.numerics.tensor import LayerParams, Tensor
from dreamdrive.rng import Prng


class TestSoftmaxXent:
    def test_uniform_logits_is_ln3(self):
        loss, _ = softmax_xent(np.zeros((4, 3)), [0, 1, 2, 0])
        assert loss == pytest.approx(math.log(3), abs=1e-12)

    def test_saturated_correct(self):
        loss, _ = softmax_xent(np.array([[10.0, -10.0, -10.0]]), [0])
        assert loss < 1e-4

    def test_grad_rows_sum_to_zero(self):
        logits = Prng(0).normal((8, 3), dtype=np.float64)
        _, grad = softmax_xent(logits, [0, 1, 2, 0, 1, 2, 0, 1])
        assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_extreme_logits_stable(self):
        loss, grad = softmax_xent(np.array([[1e4, -1e4, 0.0]]), [1])
        assert np.isfinite(loss) and np.all(np.isfinite(grad))


class TestBce:
    def test_half_is_ln2(self):
        for t in (0.0, 1.0):
            loss, _ = bce(np.array([0.5]), t)
            assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_saturated_correct(self):
        loss, _ = bce(np.array([1 - 1e-7]), 1.0)
        assert loss <= 1.1e-7

    def test_symmetric_pair(self):
        l0, _ = bce(np.array([0.25]), 0.0)
        l1, _ = bce(np.array([0.75]), 1.0)
        assert l0 == pytest.approx(l1, abs=1e-12)

    def test_clamped_input_finite(self):
        loss, grad = bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert np.isfinite(loss) and np.all(np.isfinite(grad))


class TestL1:
    def test_zero_at_equality(self):
        x = Prng(1).normal((4, 4), dtype=np.float64)
        loss, grad = l1_loss(x, x.copy())
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros_like(x))

    def test_known_value(self):
        loss, grad = l1_loss(np.array([1.0, -1.0]), np.array([0.0, 0.0]))
        assert loss == 1.0
        assert np.array_equal(grad, np.array([0.5, -0.5]))


def make_param(value: float, shape=(2, 2)) -> LayerParams:
    return LayerParams("p", Tensor(np.full(shape, value, dtype=np.float64)))


class TestSgdMomentum:
    def test_first_step(self):
        # momentum 0.9, v=0, g=1, lr=0.1 -> v=-0.1, p decreases by 0.1
        lp = make_param(1.0)
        lp.weight.add_grad(np.ones((2, 2)))
        sgd_momentum_step([lp], Hyperparams(learning_rate=0.1, momentum=0.9))
        assert np.allclose(lp.weight.data, 0.9)
        assert np.allclose(lp.velocity["weight"], -0.1)
        assert lp.weight.grad is None

    def test_zero_momentum_is_plain_sgd(self):
        lp = make_param(1.0)
        lp.weight.add_grad(np.full((2, 2), 2.0))
        sgd_momentum_step([lp], Hyperparams(learning_rate=0.1, momentum=0.0))
        assert np.allclose(lp.weight.data, 0.8)

    def test_two_steps_unrolled(self):
        # constant g=1: second delta is -(0.9*0.1 + 0.1) = -0.19
        lp = make_param(0.0)
        hp = Hyperparams(learning_rate=0.1, momentum=0.9)
        lp.weight.add_grad(np.ones((2, 2)))
        sgd_momentum_step([lp], hp)
        before = lp.weight.data.copy()
        lp.weight.add_grad(np.ones((2, 2)))
        sgd_momentum_step([lp], hp)
        assert np.allclose(lp.weight.data - before, -0.19)

    def test_nan_gradient_names_parameter(self):
        lp = make_param(0.0)
        g = np.ones((2, 2))
        g[0, 0] = np.nan
        lp.weight.add_grad(g)
        with pytest.raises(PoisonedGradientError, match="p.weight"):
            sgd_momentum_step([lp], Hyperparams(learning_rate=0.1))

    def test_shared_params_updated_once(self):
        lp = make_param(1.0)
        lp.weight.add_grad(np.ones((2, 2)))
        sgd_momentum_step([lp, lp], Hyperparams(learning_rate=0.1, momentum=0.0))
        assert np.allclose(lp.weight.data, 0.9)

    def test_param_without_grad_skipped(self):
        lp = make_param(1.0)
        sgd_momentum_step([lp], Hyperparams(learning_rate=0.1))
        assert np.allclose(lp.weight.data, 1.0)
