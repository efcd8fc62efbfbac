import numpy as np
import pytest

from abcas import nn
from abcas.nn import (
    NetworkSpec,
    ParamStore,
    ShapeError,
    backward,
    conv2d,
    convtranspose2d,
    dense,
    forward,
    layernorm,
    lrelu,
    pixelnorm,
    relu,
    shape_plan,
    tanh,
)

from helpers import (
    central_diff_grad,
    conv2d_naive,
    convtranspose2d_naive,
    gradcheck_layer as _gradcheck_layer,
    nudge_off_kinks as _away_from_kinks,
    rel_err,
)


def _store64(spec, seed=0):
    return ParamStore(spec, seed=seed, dtype=np.float64)


class TestForwardBasics:
    def test_dense_identity_passthrough(self):
        spec = NetworkSpec((3,), [dense(3, 3)])
        store = _store64(spec)
        store.params[0]["W"][...] = np.eye(3)
        store.params[0]["b"][...] = 0.0
        x = np.array([[1.0, -2.0, 0.5]])
        y, _ = forward(spec, store, x)
        assert np.allclose(y, x)

    def test_lrelu_definition(self):
        spec = NetworkSpec((2,), [lrelu(0.2)])
        store = _store64(spec)
        y, _ = forward(spec, store, np.array([[-1.0, 2.0]]))
        assert np.allclose(y, [[-0.2, 2.0]])

    def test_lrelu_slope_validation(self):
        with pytest.raises(ValueError):
            lrelu(0.0)
        with pytest.raises(ValueError):
            lrelu(1.5)

    def test_pixelnorm_constant_channels(self):
        # constant value c across channels maps to c / sqrt(c^2 + eps)
        spec = NetworkSpec((4,), [pixelnorm()])
        store = _store64(spec)
        c = 3.0
        y, _ = forward(spec, store, np.full((1, 4), c))
        expected = c / np.sqrt(c * c + 1e-8)
        assert np.allclose(y, expected, atol=1e-12)
        assert abs(y[0, 0] - 1.0) < 1e-8  # |c| >> sqrt(eps)

    def test_pixelnorm_zero_input(self):
        spec = NetworkSpec((4,), [pixelnorm()])
        y, _ = forward(spec, _store64(spec), np.zeros((2, 4)))
        assert np.array_equal(y, np.zeros((2, 4)))

    def test_layernorm_two_features(self):
        spec = NetworkSpec((2,), [layernorm()])
        store = _store64(spec)
        y, _ = forward(spec, store, np.array([[1.0, 3.0]]))
        # mean 2, population variance 1
        assert np.allclose(y, [[-1.0, 1.0]], atol=1e-4)

    def test_layernorm_constant_input_gives_bias(self):
        spec = NetworkSpec((5,), [layernorm()])
        store = _store64(spec)
        store.params[0]["b"][...] = 7.0
        y, _ = forward(spec, store, np.full((3, 5), 2.5))
        assert np.allclose(y, 7.0)

    def test_forward_deterministic_bitwise(self):
        spec = nn.mlp_discriminator(4, [8, 8])
        store = ParamStore(spec, seed=5)
        x = np.random.default_rng(1).standard_normal((6, 4)).astype(np.float32)
        y1, _ = forward(spec, store, x)
        y2, _ = forward(spec, store, x)
        assert np.array_equal(y1, y2)

    def test_shape_mismatch_names_layer(self):
        spec = NetworkSpec((3,), [dense(3, 4), dense(5, 2)])
        with pytest.raises(ShapeError, match="layer 1"):
            shape_plan(spec)

    def test_input_shape_checked(self):
        spec = NetworkSpec((3,), [dense(3, 4)])
        with pytest.raises(ShapeError):
            forward(spec, _store64(spec), np.zeros((2, 5)))

    def test_tape_reuse_raises(self):
        spec = NetworkSpec((3,), [dense(3, 2)])
        store = _store64(spec)
        y, tape = forward(spec, store, np.ones((1, 3)))
        backward(tape, np.ones_like(y))
        with pytest.raises(RuntimeError):
            backward(tape, np.ones_like(y))

    def test_zero_grad(self):
        spec = NetworkSpec((3,), [dense(3, 2)])
        store = _store64(spec)
        y, tape = forward(spec, store, np.ones((1, 3)))
        backward(tape, np.ones_like(y))
        assert np.any(store.grads[0]["W"] != 0)
        store.zero_grad()
        assert np.all(store.grads[0]["W"] == 0)
        assert np.all(store.grads[0]["b"] == 0)

    def test_grad_shapes_mirror_params(self):
        spec = nn.conv_discriminator(1, [4, 6], 16)
        store = ParamStore(spec, seed=0)
        for i, layer_params in enumerate(store.params):
            for name, arr in layer_params.items():
                assert store.grads[i][name].shape == arr.shape
                assert store.grads[i][name].dtype == arr.dtype


class TestConvShapes:
    def test_conv_shape_rule(self):
        spec = NetworkSpec((3, 16, 16), [conv2d(3, 5, kernel=4, stride=2, padding=1)])
        assert shape_plan(spec) == [(5, 8, 8)]

    def test_convtranspose_shape_rule(self):
        spec = NetworkSpec((3, 8, 8), [convtranspose2d(3, 5, kernel=4, stride=2, padding=1)])
        assert shape_plan(spec) == [(5, 16, 16)]
        spec = NetworkSpec((7, 1, 1), [convtranspose2d(7, 5, kernel=4, stride=1, padding=0)])
        assert shape_plan(spec) == [(5, 4, 4)]

    def test_non_integer_extent_rejected(self):
        spec = NetworkSpec((3, 15, 15), [conv2d(3, 5, kernel=4, stride=2, padding=1)])
        with pytest.raises(ShapeError, match="conv2d"):
            shape_plan(spec)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
    def test_conv_forward_matches_naive(self, stride, padding):
        rng = np.random.default_rng(21)
        size = 7 if stride == 2 else 6
        x = rng.standard_normal((2, 3, size, size))
        spec = NetworkSpec((3, size, size),
                           [conv2d(3, 4, kernel=3, stride=stride, padding=padding)])
        store = _store64(spec, seed=3)
        W, b = store.params[0]["W"], store.params[0]["b"]
        b[...] = rng.standard_normal(b.shape)
        y, _ = forward(spec, store, x)
        assert rel_err(y, conv2d_naive(x, W, b, stride, padding)) < 1e-12

    @pytest.mark.parametrize("stride,padding", [(1, 0), (2, 1), (2, 0)])
    def test_convtranspose_forward_matches_naive(self, stride, padding):
        rng = np.random.default_rng(22)
        x = rng.standard_normal((2, 3, 4, 4))
        spec = NetworkSpec((3, 4, 4),
                           [convtranspose2d(3, 2, kernel=3, stride=stride, padding=padding)])
        store = _store64(spec, seed=4)
        W, b = store.params[0]["W"], store.params[0]["b"]
        b[...] = rng.standard_normal(b.shape)
        y, _ = forward(spec, store, x)
        assert rel_err(y, convtranspose2d_naive(x, W, b, stride, padding)) < 1e-12


class TestGradients:
    def test_dense_grad_identity(self):
        # dL/dW = g x^T for y = W x
        spec = NetworkSpec((3,), [dense(3, 2)])
        store = _store64(spec)
        x = np.array([[1.0, 2.0, -1.0]])
        y, tape = forward(spec, store, x)
        g = np.array([[0.5, -2.0]])
        backward(tape, g)
        assert np.allclose(store.grads[0]["W"], g.T @ x)
        assert np.allclose(store.grads[0]["b"], g[0])

    def test_tanh_derivative_at_zero(self):
        spec = NetworkSpec((1,), [tanh()])
        store = _store64(spec)
        y, tape = forward(spec, store, np.zeros((1, 1)))
        dx = backward(tape, np.ones((1, 1)))
        assert dx[0, 0] == 1.0

    def test_dense_fd(self):
        x = np.random.default_rng(0).standard_normal((4, 3))
        _gradcheck_layer(NetworkSpec((3,), [dense(3, 5)]), x)

    def test_conv2d_fd(self):
        x = np.random.default_rng(1).standard_normal((2, 2, 5, 5))
        _gradcheck_layer(NetworkSpec((2, 5, 5), [conv2d(2, 3, kernel=3, stride=2, padding=1)]), x)

    def test_convtranspose2d_fd(self):
        x = np.random.default_rng(2).standard_normal((2, 3, 3, 3))
        _gradcheck_layer(
            NetworkSpec((3, 3, 3), [convtranspose2d(3, 2, kernel=4, stride=2, padding=1)]), x)

    def test_lrelu_fd(self):
        x = _away_from_kinks(np.random.default_rng(3).standard_normal((4, 6)))
        _gradcheck_layer(NetworkSpec((6,), [lrelu(0.2)]), x)

    def test_relu_fd(self):
        x = _away_from_kinks(np.random.default_rng(4).standard_normal((4, 6)))
        _gradcheck_layer(NetworkSpec((6,), [relu()]), x)

    def test_tanh_fd(self):
        x = np.random.default_rng(5).standard_normal((4, 6))
        _gradcheck_layer(NetworkSpec((6,), [tanh()]), x)

    def test_layernorm_fd(self):
        x = np.random.default_rng(6).standard_normal((4, 6))
        _gradcheck_layer(NetworkSpec((6,), [layernorm()]), x)

    def test_layernorm_fd_conv_shape(self):
        x = np.random.default_rng(7).standard_normal((2, 3, 4, 4))
        _gradcheck_layer(NetworkSpec((3, 4, 4), [layernorm()]), x)

    def test_pixelnorm_fd(self):
        x = np.random.default_rng(8).standard_normal((4, 6))
        _gradcheck_layer(NetworkSpec((6,), [pixelnorm()]), x)

    def test_pixelnorm_fd_conv_shape(self):
        x = np.random.default_rng(9).standard_normal((2, 3, 4, 4))
        _gradcheck_layer(NetworkSpec((3, 4, 4), [pixelnorm()]), x)

    def test_composite_mlp_generator_fd(self):
        x = np.random.default_rng(10).standard_normal((3, 4))
        _gradcheck_layer(nn.mlp_generator(4, [6], 2), x, seed=2)

    def test_composite_conv_discriminator_fd(self):
        x = np.random.default_rng(11).standard_normal((2, 1, 8, 8))
        _gradcheck_layer(nn.conv_discriminator(1, [3], 8), x, seed=3)

    def test_composite_conv_generator_fd(self):
        x = np.random.default_rng(12).standard_normal((2, 3, 1, 1))
        _gradcheck_layer(nn.conv_generator(3, [4], 1, 8), x, seed=4)


class TestArchitectures:
    def test_mlp_shapes(self):
        g = nn.mlp_generator(8, [32, 32], 2)
        assert nn.output_shape(g) == (2,)
        d = nn.mlp_discriminator(2, [32, 32])
        assert nn.output_shape(d) == (1,)
        assert sum(1 for L in d.layers if L.normalized) == 3

    def test_conv_shapes(self):
        g = nn.conv_generator(16, [12, 8], 1, 16)
        assert nn.output_shape(g) == (1, 16, 16)
        d = nn.conv_discriminator(1, [8, 12], 16)
        assert nn.output_shape(d) == (1, 1, 1)
        assert all(L.normalized for L in d.layers if L.kind == "conv2d")

    def test_full_scale_ladder_is_expressible(self):
        # 256x256 generator/discriminator with the production channel ladder
        g = nn.conv_generator(140, [384, 192, 96, 96, 48, 24], 3, 256)
        assert nn.output_shape(g) == (3, 256, 256)
        d = nn.conv_discriminator(3, [24, 48, 96, 96, 192, 384], 256)
        assert nn.output_shape(d) == (1, 1, 1)

    def test_channel_count_validation(self):
        with pytest.raises(ValueError):
            nn.conv_generator(8, [4], 1, 16)  # needs 2 entries
        with pytest.raises(ValueError):
            nn.conv_discriminator(1, [4, 4, 4], 16)
