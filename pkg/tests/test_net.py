import numpy as np
import pytest

from ssvep_bench import net
from ssvep_bench.params import ModelParams, load_params, params_from_bytes, params_to_bytes, save_params

def fd_check(spec, params, x, y, training=False, eps=1e-5, tol=1e-4, probes=10):
    """Central finite differences vs analytic gradients on params and input.

    The relative error denominator is floored at 1e-6: below that the FD
    quotient is dominated by floating-point roundoff, not by the gradient.
    """
    probe_rng = np.random.default_rng(424242)

    def evaluate():
        rng = np.random.default_rng(777)  # fixed dropout masks per call
        logits, caches = net.forward(spec, params, x, training=training, rng=rng)
        return net.loss_xent(logits, y), caches, logits

    loss, caches, logits = evaluate()
    grads, gx = net.backward(spec, params, caches, net.xent_gradient(logits, y))

    worst = 0.0
    for name in params.names():
        flat = params[name].value.ravel()
        ana = grads[name].ravel()
        for k in probe_rng.choice(flat.size, size=min(probes, flat.size), replace=False):
            orig = flat[k]
            flat[k] = orig + eps
            lp = evaluate()[0]
            flat[k] = orig - eps
            lm = evaluate()[0]
            flat[k] = orig
            num = (lp - lm) / (2 * eps)
            worst = max(worst, abs(num - ana[k]) / max(abs(num), abs(ana[k]), 1e-6))
    xflat = x.ravel()
    gxflat = gx.ravel()
    for k in probe_rng.choice(xflat.size, size=min(probes, xflat.size), replace=False):
        orig = xflat[k]
        xflat[k] = orig + eps
        lp = evaluate()[0]
        xflat[k] = orig - eps
        lm = evaluate()[0]
        xflat[k] = orig
        num = (lp - lm) / (2 * eps)
        worst = max(worst, abs(num - gxflat[k]) / max(abs(num), abs(gxflat[k]), 1e-6))
    assert worst < tol, f"finite-difference mismatch {worst:.3e}"
    return worst


class TestShapes:
    def test_default_network_geometry(self):
        spec = net.default_cnn_spec()
        shapes = net.layer_shapes(spec)
        # four pools: 96x64 -> 48x32 -> 24x16 -> 12x8 -> 6x4
        assert shapes[-7] == (512, 6, 4)
        assert shapes[-6] == (12288,)  # flatten width
        assert shapes[-3] == (512,)
        assert shapes[-1] == (2,)

    def test_dense_before_flatten_rejected(self):
        with pytest.raises(ValueError):
            net.NetworkSpec(layers=(net.dense(4),), input_shape=(1, 8, 8))

    def test_forward_shape_mismatch_names_layer(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        params = net.init_params(spec, 0)
        with pytest.raises(ValueError, match="input shape"):
            net.forward(spec, params, np.zeros((2, 1, 6, 6)))

    def test_parameter_count_closed_form(self):
        spec = net.default_cnn_spec()
        # independent sum: conv 9*cin*cout+cout, dense (fin+1)*units
        convs = [(1, 64), (64, 128), (128, 256), (256, 256), (256, 512), (512, 512)]
        expect = sum(9 * cin + 1 for cin, cout in convs for _ in range(cout))
        expect += (12288 + 1) * 512 + (512 + 1) * 2
        assert net.count_parameters(spec) == expect == 10_792_706
        params = net.init_params(net.tiny_cnn_spec(input_shape=(1, 8, 8)), 0)
        assert params.n_values() == net.count_parameters(net.tiny_cnn_spec(input_shape=(1, 8, 8)))


class TestLayerExamples:
    def test_maxpool_takes_block_max(self):
        spec = net.NetworkSpec(layers=(net.maxpool2x2(),), input_shape=(1, 2, 2))
        out, _ = net.forward(spec, ModelParams(), np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
        assert out.shape == (1, 1, 1, 1) and out[0, 0, 0, 0] == 4.0

    def test_dropout_rate_zero_is_identity(self):
        spec = net.NetworkSpec(layers=(net.dropout(0.0),), input_shape=(1, 4, 4))
        rng = np.random.default_rng(101)
        x = rng.standard_normal((3, 1, 4, 4))
        for training in (False, True):
            out, _ = net.forward(spec, ModelParams(), x, training=training,
                                 rng=np.random.default_rng(0))
            assert np.array_equal(out, x)

    def test_dropout_inverted_scaling(self):
        spec = net.NetworkSpec(layers=(net.dropout(0.5),), input_shape=(1, 16, 16))
        x = np.ones((2, 1, 16, 16))
        out, _ = net.forward(spec, ModelParams(), x, training=True,
                             rng=np.random.default_rng(5))
        kept = out[out != 0.0]
        assert np.allclose(kept, 2.0)  # 1 / (1 - rate)
        assert abs((out != 0).mean() - 0.5) < 0.1

    def test_identity_kernel_conv_passes_gradient_through(self):
        c = 3
        spec = net.NetworkSpec(layers=(net.conv3x3(c),), input_shape=(c, 5, 5))
        params = net.init_params(spec, 0)
        w = np.zeros((c, c, 3, 3))
        for i in range(c):
            w[i, i, 1, 1] = 1.0
        params["conv1.weight"].value = w
        params["conv1.bias"].value = np.zeros(c)
        rng = np.random.default_rng(102)
        x = rng.standard_normal((2, c, 5, 5))
        out, caches = net.forward(spec, params, x)
        assert np.allclose(out, x)
        rng = np.random.default_rng(103)
        upstream = rng.standard_normal(out.shape)
        _, gx = net.backward(spec, params, caches, upstream)
        assert np.allclose(gx, upstream)

    def test_zero_upstream_gradient_zeroes_parameter_gradients(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        params = net.init_params(spec, 1)
        rng = np.random.default_rng(104)
        x = rng.standard_normal((2, 1, 8, 8))
        _, caches = net.forward(spec, params, x)
        grads, gx = net.backward(spec, params, caches, np.zeros((2, 2)))
        assert all(np.all(g == 0.0) for g in grads.values())
        assert np.all(gx == 0.0)


class TestGradients:
    def test_conv_layer(self):
        spec = net.NetworkSpec(
            layers=(net.conv3x3(3), net.flatten(), net.dense(2)), input_shape=(2, 5, 6)
        )
        params = net.init_params(spec, 3)
        rng = np.random.default_rng(105)
        fd_check(spec, params, rng.standard_normal((3, 2, 5, 6)), np.array([0, 1, 0]))

    def test_maxpool_layer(self):
        spec = net.NetworkSpec(
            layers=(net.maxpool2x2(), net.flatten(), net.dense(2)), input_shape=(2, 6, 6)
        )
        params = net.init_params(spec, 4)
        # block entries spaced apart keep the pool away from argmax ties
        rng = np.random.default_rng(106)
        x = rng.permuted(np.arange(2 * 2 * 6 * 6, dtype=np.float64)).reshape(2, 2, 6, 6) * 0.01
        fd_check(spec, params, x, np.array([1, 0]))

    def test_relu_layer(self):
        spec = net.NetworkSpec(
            layers=(net.relu(), net.flatten(), net.dense(2)), input_shape=(1, 4, 5)
        )
        params = net.init_params(spec, 5)
        rng = np.random.default_rng(107)
        x = rng.standard_normal((3, 1, 4, 5))
        x[np.abs(x) < 0.05] = 0.2  # keep clear of the kink
        fd_check(spec, params, x, np.array([0, 0, 1]))

    def test_dense_layer(self):
        spec = net.NetworkSpec(
            layers=(net.flatten(), net.dense(7), net.relu(), net.dense(2)),
            input_shape=(1, 3, 4),
        )
        params = net.init_params(spec, 6)
        rng = np.random.default_rng(108)
        x = rng.standard_normal((4, 1, 3, 4))
        fd_check(spec, params, x, np.array([0, 1, 1, 0]))

    def test_dropout_layer_training_mode(self):
        spec = net.NetworkSpec(
            layers=(net.flatten(), net.dropout(0.4), net.dense(2)), input_shape=(1, 4, 4)
        )
        params = net.init_params(spec, 7)
        rng = np.random.default_rng(109)
        x = rng.standard_normal((3, 1, 4, 4))
        fd_check(spec, params, x, np.array([1, 0, 1]), training=True)

    def test_composed_tiny_network(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        params = net.init_params(spec, 8)
        rng = np.random.default_rng(110)
        x = rng.standard_normal((4, 1, 8, 8))
        fd_check(spec, params, x, np.array([0, 1, 0, 1]))

    def test_xent_gradient_is_softmax_minus_onehot(self):
        rng = np.random.default_rng(111)
        logits = rng.standard_normal((6, 2))
        y = np.array([0, 1, 1, 0, 1, 0])
        z = logits - logits.max(axis=1, keepdims=True)
        softmax = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        onehot = np.eye(2)[y]
        np.testing.assert_allclose(
            net.xent_gradient(logits, y), (softmax - onehot) / 6, rtol=1e-12
        )


class TestCrossEntropy:
    def test_uniform_logits(self):
        assert abs(net.loss_xent(np.zeros(2), 0) - np.log(2.0)) < 1e-12

    def test_saturated_logits(self):
        assert net.loss_xent(np.array([20.0, -20.0]), 0) < 1e-8

    def test_matches_extended_precision_oracle(self):
        import mpmath

        mpmath.mp.dps = 50
        rng = np.random.default_rng(112)
        logits = rng.standard_normal((5, 2)) * 4
        y = np.array([0, 1, 0, 0, 1])
        total = mpmath.mpf(0)
        for row, cls in zip(logits, y):
            denom = sum(mpmath.e ** mpmath.mpf(v) for v in row)
            total += -mpmath.log(mpmath.e ** mpmath.mpf(row[cls]) / denom)
        oracle = float(total / len(y))
        assert abs(net.loss_xent(logits, y) - oracle) < 1e-12


class TestSgdStep:
    def one_param(self, value):
        params = ModelParams()
        params.add("w", np.array(value, dtype=np.float64))
        return params

    def test_plain_gradient_descent(self):
        params = self.one_param([1.0, 2.0])
        cfg = net.TrainConfig(lr=0.1, momentum=0.0, weight_decay=0.0)
        net.sgd_step(params, {"w": np.array([0.5, -0.5])}, cfg)
        np.testing.assert_allclose(params["w"].value, [0.95, 2.05])

    def test_pure_decay(self):
        params = self.one_param([2.0])
        cfg = net.TrainConfig(lr=0.1, momentum=0.0, weight_decay=0.5)
        net.sgd_step(params, {"w": np.zeros(1)}, cfg)
        np.testing.assert_allclose(params["w"].value, [2.0 * (1.0 - 0.1 * 0.5)])

    def test_momentum_unrolls_over_two_steps(self):
        params = self.one_param([0.0])
        cfg = net.TrainConfig(lr=0.1, momentum=0.9, weight_decay=0.0)
        g = {"w": np.array([1.0])}
        net.sgd_step(params, g, cfg)
        np.testing.assert_allclose(params["w"].value, [-0.1])  # lr * g
        net.sgd_step(params, g, cfg)
        np.testing.assert_allclose(params["w"].value, [-0.1 - 0.1 * 1.9])  # lr * 1.9 * g

    def test_frozen_tensor_untouched(self):
        params = self.one_param([1.0])
        params.set_frozen(["w"])
        net.sgd_step(params, {"w": np.array([5.0])},
                     net.TrainConfig(lr=0.1, momentum=0.0, weight_decay=0.1))
        assert params["w"].value[0] == 1.0
        assert params["w"].momentum[0] == 0.0


def labeled_batch(n=24, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 1, 8, 8))
    y = (np.arange(n) % 2).astype(np.int64)
    x[y == 1, :, :4, :] += 1.5  # learnable difference
    return x, y


class TestTraining:
    def test_inference_forward_is_pure(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        params = net.init_params(spec, 0)
        rng = np.random.default_rng(113)
        x = rng.standard_normal((3, 1, 8, 8))
        a, _ = net.forward(spec, params, x)
        b, _ = net.forward(spec, params, x)
        assert np.array_equal(a, b)

    def test_training_is_deterministic(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        x, y = labeled_batch()
        cfg = net.TrainConfig(lr=0.01, weight_decay=0.001, batch_size=8,
                              patience=5, max_epochs=12, seed=3)
        p1, log1 = net.train(spec, net.init_params(spec, 1), x, y, x, y, cfg)
        p2, log2 = net.train(spec, net.init_params(spec, 1), x, y, x, y, cfg)
        for name in p1.names():
            assert np.array_equal(p1[name].value, p2[name].value)
        assert [(r.train_loss, r.val_loss, r.val_acc) for r in log1.records] == [
            (r.train_loss, r.val_loss, r.val_acc) for r in log2.records
        ]

    def test_all_frozen_keeps_validation_loss_constant(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        params = net.init_params(spec, 2)
        params.set_frozen(lambda n: True)
        x, y = labeled_batch(seed=1)
        cfg = net.TrainConfig(lr=0.1, patience=3, max_epochs=6, seed=0)
        best, log = net.train(spec, params, x, y, x, y, cfg)
        losses = {r.val_loss for r in log.records}
        assert len(losses) == 1
        for name in params.names():
            assert np.array_equal(best[name].value, params[name].value)

    def test_frozen_prefix_survives_training(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        params = net.init_params(spec, 4)
        params.set_frozen(lambda n: n.startswith("conv"))
        before = {n: params[n].value.copy() for n in net.conv_param_names(params)}
        x, y = labeled_batch(seed=2)
        cfg = net.TrainConfig(lr=0.05, weight_decay=0.01, batch_size=8,
                              patience=10, max_epochs=10, seed=5)
        best, _ = net.train(spec, params, x, y, x, y, cfg)
        for name, value in before.items():
            assert np.array_equal(best[name].value, value)
        # the dense head did move
        assert not np.array_equal(best["dense1.weight"].value, params["dense1.weight"].value)

    def test_single_class_training_rejected(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        rng = np.random.default_rng(114)
        x = rng.standard_normal((6, 1, 8, 8))
        y = np.zeros(6, dtype=np.int64)
        with pytest.raises(ValueError):
            net.train(spec, net.init_params(spec, 0), x, y, x, y, net.TrainConfig())


class TestTransferMechanics:
    def test_replace_head_copies_prefix_bit_exactly(self, tmp_path):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        source = net.init_params(spec, 11)
        path = tmp_path / "src.ssvt"
        save_params(source, path)
        grafted = net.replace_head(load_params(path), spec, seed=99)
        loaded = load_params(path)
        for name in net.conv_param_names(grafted):
            assert np.array_equal(grafted[name].value, loaded[name].value)

    def test_new_head_depends_on_seed(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        source = net.init_params(spec, 11)
        a = net.replace_head(source, spec, seed=1)
        b = net.replace_head(source, spec, seed=2)
        assert not np.array_equal(a["dense1.weight"].value, b["dense1.weight"].value)

    def test_missing_prefix_lists_tensor_names(self):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        with pytest.raises(ValueError, match="conv1.weight"):
            net.replace_head(ModelParams(), spec, seed=0)

    def test_frozen_prefix_bit_identical_after_training(self, tmp_path):
        spec = net.tiny_cnn_spec(input_shape=(1, 8, 8))
        path = tmp_path / "pre.ssvt"
        save_params(net.init_params(spec, 21), path)
        loaded = load_params(path)
        params = net.replace_head(loaded, spec, seed=5)
        params.set_frozen(lambda n: n.startswith("conv"))
        x, y = labeled_batch(seed=3)
        cfg = net.TrainConfig(lr=0.05, batch_size=8, patience=10, max_epochs=10, seed=6)
        best, _ = net.train(spec, params, x, y, x, y, cfg)
        for name in net.conv_param_names(best):
            assert np.array_equal(best[name].value, loaded[name].value)

    def test_params_file_round_trip_byte_stable(self):
        spec = net.small_cnn_spec()
        params = net.init_params(spec, 13)
        raw = params_to_bytes(params)
        assert params_to_bytes(params_from_bytes(raw)) == raw
