"""Forward values and gradients of the tensor primitives.

Gradients are compared against an in-test central-difference helper that
knows nothing about the library's own checker.
"""

import numpy as np
import pytest

import nver.tensor as T
from nver.errors import ShapeError
from nver.tensor import Tensor


def numeric_grad(f, x, h=1e-6):
    """Central differences of scalar f w.r.t. every coordinate of x."""
    g = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = g.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        up = f()
        flat_x[i] = orig - h
        down = f()
        flat_x[i] = orig
        flat_g[i] = (up - down) / (2 * h)
    return g


def check_op_gradients(build_loss, arrays, atol=1e-7):
    """Analytic vs numeric gradients for every input array of an op chain."""
    tensors = [Tensor(a) for a in arrays]
    loss = build_loss(*tensors)
    loss.backward()
    for arr, t in zip(arrays, tensors):
        numeric = numeric_grad(lambda: float(build_loss(*[Tensor(a) for a in arrays]).data), arr)
        np.testing.assert_allclose(t.grad, numeric, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class TestMatmul:
    def test_plain_2d(self, rng):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 5))
        out = T.matmul(Tensor(a), Tensor(b))
        np.testing.assert_allclose(out.data, a @ b)

    def test_inner_dim_mismatch_names_both_shapes(self, rng):
        with pytest.raises(ShapeError, match=r"\(3, 4\).*\(3, 5\)"):
            T.matmul(Tensor(rng.standard_normal((3, 4))), Tensor(rng.standard_normal((3, 5))))

    def test_gradients_weight_case(self, rng):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        check_op_gradients(lambda x, y: T.mean_all(T.matmul(x, y)), [a, b])

    def test_gradients_batched_case(self, rng):
        a = rng.standard_normal((2, 2, 3, 4))
        b = rng.standard_normal((2, 2, 4, 3))
        check_op_gradients(lambda x, y: T.mean_all(T.matmul(x, y)), [a, b])

    def test_batched_times_weight(self, rng):
        a = rng.standard_normal((2, 5, 4))
        b = rng.standard_normal((4, 3))
        out = T.matmul(Tensor(a), Tensor(b))
        assert out.shape == (2, 5, 3)
        check_op_gradients(lambda x, y: T.mean_all(T.matmul(x, y)), [a, b])


class TestElementwise:
    def test_add_bias_broadcast_and_grad(self, rng):
        x = rng.standard_normal((4, 3))
        b = rng.standard_normal(3)
        out = T.add_bias(Tensor(x), Tensor(b))
        np.testing.assert_allclose(out.data, x + b)
        check_op_gradients(lambda t, u: T.mean_all(T.add_bias(t, u)), [x, b])

    def test_relu_and_grad(self, rng):
        x = rng.standard_normal((5, 5)) + 0.05  # keep clear of the kink
        out = T.relu(Tensor(x))
        np.testing.assert_allclose(out.data, np.maximum(x, 0))
        check_op_gradients(lambda t: T.mean_all(T.relu(t)), [x])

    def test_mul_log_power(self, rng):
        x = np.abs(rng.standard_normal((3, 4))) + 0.5
        y = np.abs(rng.standard_normal((3, 4))) + 0.5
        check_op_gradients(lambda a, b: T.mean_all(T.mul(a, b)), [x, y])
        check_op_gradients(lambda a: T.mean_all(T.log(a)), [x])
        check_op_gradients(lambda a: T.mean_all(T.power(a, 2.7)), [x])

    def test_scale_add_const(self, rng):
        x = rng.standard_normal((2, 3))
        np.testing.assert_allclose(T.scale(Tensor(x), -2.5).data, -2.5 * x)
        np.testing.assert_allclose(T.add_const(Tensor(x), 0.7).data, x + 0.7)


class TestSoftmax:
    def test_rows_on_simplex(self, rng):
        x = rng.standard_normal((6, 9)) * 3
        s = T.softmax(Tensor(x)).data
        assert np.all(s >= 0)
        np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-6)

    def test_stable_at_large_magnitudes(self, rng):
        x = rng.uniform(-1e4, 1e4, size=(8, 5)).astype(np.float32)
        s = T.softmax(Tensor(x)).data
        assert np.all(np.isfinite(s))
        np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-6)

    def test_shift_invariance(self, rng):
        x = rng.standard_normal((4, 6))
        np.testing.assert_allclose(
            T.softmax(Tensor(x)).data, T.softmax(Tensor(x + 123.0)).data, atol=1e-12
        )

    def test_constant_vector_uniform(self):
        s = T.softmax(Tensor(np.full((1, 8), 3.3))).data
        np.testing.assert_allclose(s, 1.0 / 8)

    def test_two_logits_closed_form(self):
        # e^0 / (e^0 + e^ln2) = 1/3
        s = T.softmax(Tensor(np.array([[0.0, np.log(2.0)]]))).data
        np.testing.assert_allclose(s, [[1 / 3, 2 / 3]], atol=1e-12)

    def test_gradient(self, rng):
        x = rng.standard_normal((3, 5))
        w = rng.standard_normal((3, 5))
        check_op_gradients(lambda t: T.mean_all(T.mul_array(T.softmax(t), w)), [x])


class TestShapeOps:
    def test_reshape_transpose_concat_grads(self, rng):
        x = rng.standard_normal((2, 3, 4))
        y = rng.standard_normal((2, 3, 4))
        w = rng.standard_normal((2, 4, 6))

        def build(a, b):
            joined = T.concat([T.transpose(a, (0, 2, 1)), T.transpose(b, (0, 2, 1))], axis=2)
            return T.mean_all(T.mul_array(joined, w))

        check_op_gradients(build, [x, y])

    def test_pick(self, rng):
        x = rng.standard_normal((4, 3))
        idx = np.array([2, 0, 1, 1])
        out = T.pick(Tensor(x), idx)
        np.testing.assert_allclose(out.data, x[np.arange(4), idx])
        check_op_gradients(lambda t: T.mean_all(T.pick(t, idx)), [x])

    def test_sum_last(self, rng):
        x = rng.standard_normal((3, 7))
        np.testing.assert_allclose(T.sum_last(Tensor(x)).data, x.sum(axis=-1))
        check_op_gradients(lambda t: T.mean_all(T.sum_last(t)), [x])

    def test_mean_all_is_scalar(self, rng):
        out = T.mean_all(Tensor(rng.standard_normal((3, 3))))
        assert out.shape == ()


class TestConv1d:
    def test_hand_convolution_and_pool(self):
        # [1,2,3,4,5] * [1,1,1] -> [6,9,12]; pool(2,2) keeps max(6,9), drops 12
        x = Tensor(np.array([[[1.0, 2.0, 3.0, 4.0, 5.0]]]))
        w = Tensor(np.ones((1, 1, 3)))
        b = Tensor(np.zeros(1))
        conv = T.conv1d(x, w, b)
        np.testing.assert_allclose(conv.data, [[[6.0, 9.0, 12.0]]])
        pooled = T.maxpool1d(conv, window=2, stride=2)
        np.testing.assert_allclose(pooled.data, [[[9.0]]])

    def test_all_zero_input_zero_bias(self, rng):
        x = Tensor(np.zeros((2, 3, 10)))
        w = Tensor(rng.standard_normal((4, 3, 3)))
        b = Tensor(np.zeros(4))
        np.testing.assert_allclose(T.conv1d(x, w, b).data, 0.0)

    def test_too_short_input(self, rng):
        with pytest.raises(ShapeError, match="shorter than kernel"):
            T.conv1d(Tensor(np.zeros((1, 1, 2))), Tensor(np.zeros((1, 1, 3))), Tensor(np.zeros(1)))

    def test_gradients(self, rng):
        x = rng.standard_normal((2, 2, 9))
        w = rng.standard_normal((3, 2, 3))
        b = rng.standard_normal(3)
        wt = rng.standard_normal((2, 3, 7))
        check_op_gradients(
            lambda a, ww, bb: T.mean_all(T.mul_array(T.conv1d(a, ww, bb), wt)), [x, w, b]
        )


class TestPooling:
    def test_maxpool_routes_gradient_to_argmax_only(self):
        x = Tensor(np.array([[[1.0, 5.0, 2.0, 3.0, 9.0, 0.0]]]))
        out = T.maxpool1d(x, window=2, stride=2)
        np.testing.assert_allclose(out.data, [[[5.0, 3.0, 9.0]]])
        out.backward(np.array([[[1.0, 2.0, 3.0]]]))
        np.testing.assert_allclose(x.grad, [[[0.0, 1.0, 0.0, 2.0, 3.0, 0.0]]])

    def test_pool_gradient_sum_preserved(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.standard_normal((3, 4, 17)))
        out = T.maxpool1d(x)
        seed = rng.standard_normal(out.shape)
        out.backward(seed)
        assert abs(x.grad.sum() - seed.sum()) < 1e-6

    def test_adaptive_pool_shapes(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.standard_normal((2, 3, 190)))
        assert T.adaptive_maxpool1d(x, 16).shape == (2, 3, 16)
        # upsampling case: more outputs than inputs repeats segments
        short = Tensor(rng.standard_normal((1, 2, 2)))
        up = T.adaptive_maxpool1d(short, 8)
        assert up.shape == (1, 2, 8)
        np.testing.assert_allclose(up.data[..., 0], short.data[..., 0])
        np.testing.assert_allclose(up.data[..., -1], short.data[..., -1])

    def test_adaptive_pool_segments_tile_input(self):
        # every input position is covered by at least one segment
        x = Tensor(np.arange(11, dtype=np.float64).reshape(1, 1, 11))
        out = T.adaptive_maxpool1d(x, 4)
        np.testing.assert_allclose(out.data, [[[2.0, 5.0, 8.0, 10.0]]])

    def test_adaptive_pool_gradients(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((2, 3, 13))
        w = rng.standard_normal((2, 3, 5))
        check_op_gradients(
            lambda t: T.mean_all(T.mul_array(T.adaptive_maxpool1d(t, 5), w)), [x]
        )


class TestBackwardTraversal:
    def test_diamond_graph_accumulates_once(self):
        # z = x*y + x: dz/dx = y + 1, dz/dy = x
        x = Tensor(np.array(3.0))
        y = Tensor(np.array(4.0))
        z = T.add(T.mul(x, y), x)
        z.backward()
        assert x.grad == pytest.approx(5.0)
        assert y.grad == pytest.approx(3.0)

    def test_all_values_finite_after_forward(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((4, 8)).astype(np.float32) * 100
        out = T.softmax(T.relu(Tensor(x)))
        assert np.all(np.isfinite(out.data))

    def test_dtype_preserved(self):
        x32 = Tensor(np.ones((2, 2), dtype=np.float32))
        assert T.softmax(x32).dtype == np.float32
        x64 = Tensor(np.ones((2, 2), dtype=np.float64))
        assert T.softmax(x64).dtype == np.float64
