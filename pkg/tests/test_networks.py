"""Network bundles against a layer-by-layer numpy reference."""

import numpy as np
import pytest

import ganens.autodiff as ad
from ganens.autodiff import Tensor
from ganens.errors import ShapeError, VariantError
from ganens.networks import (
    DiscriminatorBundle,
    GeneratorBundle,
    Mlp,
    MlpSpec,
    as_batch,
    concat_sample_encoding,
)
from ganens.training import TrainConfig, build_ensemble, train


def ref_forward(x_rows, mlp):
    """Independent forward pass: plain numpy, no shared kernel code."""
    h = np.asarray(x_rows, dtype=np.float64)
    spec = mlp.spec
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        pre = h @ w.values + b.values
        if spec.hidden_activation == "leaky_relu":
            h = np.where(pre > 0, pre, spec.leaky_slope * pre)
        elif spec.hidden_activation == "relu":
            h = np.maximum(pre, 0.0)
        else:
            h = np.tanh(pre)
    pre = h @ mlp.weights[-1].values + mlp.biases[-1].values
    if spec.output_activation == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre)), h
    if spec.output_activation == "tanh":
        return np.tanh(pre), h
    return pre, h


def make_generator(d=3, dprime=2, hidden=4, seed=0, second=False):
    rng = np.random.default_rng(seed)
    enc = Mlp(MlpSpec((d, hidden, dprime)), rng, name="enc")
    dec = Mlp(MlpSpec((dprime, hidden, d)), rng, name="dec")
    enc2 = Mlp(MlpSpec((d, hidden, dprime)), rng, name="enc2") if second else None
    return GeneratorBundle(enc, dec, enc2)


def make_discriminator(width=3, hidden=(5, 4), kind="gan", seed=1):
    act = "identity" if kind == "wgan" else "sigmoid"
    rng = np.random.default_rng(seed)
    return DiscriminatorBundle(
        Mlp(MlpSpec((width, *hidden, 1), output_activation=act), rng, name="disc"),
        kind=kind,
    )


class TestMlpSpec:
    def test_requires_hidden_layer(self):
        with pytest.raises(ShapeError):
            MlpSpec((3, 1))

    def test_rejects_bad_widths(self):
        with pytest.raises(ShapeError):
            MlpSpec((3, 0, 1))

    def test_roundtrip_dict(self):
        spec = MlpSpec((2, 8, 3), hidden_activation="tanh", output_activation="sigmoid")
        assert MlpSpec.from_dict(spec.to_dict()) == spec


class TestEncode:
    def test_zero_final_layer_yields_bias(self):
        gen = make_generator()
        gen.encoder.weights[-1].values[:] = 0.0
        gen.encoder.biases[-1].values[:] = [0.5, -1.5]
        z = gen.encode(as_batch([[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]]))
        np.testing.assert_array_equal(z.values, [[0.5, -1.5], [0.5, -1.5]])

    def test_hand_set_sum_of_coordinates(self):
        rng = np.random.default_rng(0)
        enc = Mlp(MlpSpec((2, 2, 1)), rng, name="enc")
        dec = Mlp(MlpSpec((1, 2, 2)), rng, name="dec")
        enc.weights[0].values[:] = np.eye(2)
        enc.biases[0].values[:] = 0.0
        enc.weights[1].values[:] = [[1.0], [1.0]]
        enc.biases[1].values[:] = 0.0
        gen = GeneratorBundle(enc, dec)
        z = gen.encode(as_batch([2.0, 3.0]))
        assert z.values[0, 0] == 5.0

    def test_matches_reference_forward(self):
        gen = make_generator(seed=9)
        x = np.random.default_rng(4).uniform(-2, 2, size=(6, 3))
        z = gen.encode(as_batch(x))
        expect, _ = ref_forward(x, gen.encoder)
        np.testing.assert_allclose(z.values, expect, rtol=1e-12, atol=1e-15)

    def test_width_mismatch(self):
        gen = make_generator()
        with pytest.raises(ShapeError):
            gen.encode(as_batch(np.zeros((2, 5))))


class TestDecode:
    def test_zero_weights_yield_bias(self):
        gen = make_generator()
        for w in gen.decoder.weights:
            w.values[:] = 0.0
        gen.decoder.biases[-1].values[:] = [1.0, 2.0, 3.0]
        out = gen.decode(as_batch(np.zeros((1, 2))))
        np.testing.assert_array_equal(out.values, [[1.0, 2.0, 3.0]])

    def test_width_contract(self):
        gen = make_generator()
        x = as_batch(np.random.default_rng(1).uniform(-1, 1, size=(4, 3)))
        assert gen.reconstruct(x).shape == (4, 3)

    def test_matches_reference_forward(self):
        gen = make_generator(seed=13)
        z = np.random.default_rng(2).uniform(-2, 2, size=(5, 2))
        out = gen.decode(as_batch(z))
        expect, _ = ref_forward(z, gen.decoder)
        np.testing.assert_allclose(out.values, expect, rtol=1e-12, atol=1e-15)


class TestReconstruct:
    def test_equals_composition_exactly(self):
        gen = make_generator(seed=21)
        x = as_batch(np.random.default_rng(3).uniform(-1, 1, size=(7, 3)))
        via_parts = gen.decode(gen.encode(x))
        np.testing.assert_array_equal(gen.reconstruct(x).values, via_parts.values)

    def test_training_improves_line_segment_reconstruction(self):
        t = np.linspace(0.0, 1.0, 256)
        data = np.column_stack([t, t])

        def recon_mse(model):
            x = as_batch(data)
            rec = model.generators[0].reconstruct(x)
            return float(np.mean((rec.values - data) ** 2))

        untrained = build_ensemble(
            "ganomaly", d=2, dprime=1, n_generators=1, n_discriminators=1,
            seed=5, enc_hidden=(8,), dec_hidden=(8,), disc_hidden=(8, 4),
        )
        before = recon_mse(untrained)
        trained = build_ensemble(
            "ganomaly", d=2, dprime=1, n_generators=1, n_discriminators=1,
            seed=5, enc_hidden=(8,), dec_hidden=(8,), disc_hidden=(8, 4),
        )
        cfg = TrainConfig(max_iter=400, batch_size=32, lr_gen=2e-3, lr_disc=2e-3,
                          seed=6, convergence_tol=0.0)
        train(trained, data, cfg)
        after = recon_mse(trained)
        assert after < before


class TestDiscriminate:
    def test_sigmoid_output_in_unit_interval(self):
        disc = make_discriminator(kind="gan")
        x = as_batch(np.random.default_rng(8).uniform(-5, 5, size=(50, 3)))
        u, _ = disc.discriminate(x)
        assert np.all(u.values > 0.0) and np.all(u.values < 1.0)

    def test_deterministic(self):
        disc = make_discriminator(kind="wgan")
        x = as_batch(np.random.default_rng(9).uniform(-2, 2, size=(4, 3)))
        u1, h1 = disc.discriminate(x)
        u2, h2 = disc.discriminate(x)
        np.testing.assert_array_equal(u1.values, u2.values)
        np.testing.assert_array_equal(h1.values, h2.values)

    @pytest.mark.parametrize("kind", ["gan", "wgan", "bigan"])
    def test_output_is_affine_map_of_hidden_vector(self, kind):
        width = 5 if kind == "bigan" else 3
        disc = make_discriminator(width=width, kind=kind, seed=17)
        x = as_batch(np.random.default_rng(10).uniform(-2, 2, size=(6, width)))
        u, h = disc.discriminate(x)
        pre = h.values @ disc.mlp.weights[-1].values + disc.mlp.biases[-1].values
        expect = pre if kind == "wgan" else 1.0 / (1.0 + np.exp(-pre))
        np.testing.assert_allclose(u.values, expect, rtol=1e-12, atol=1e-15)

    def test_wgan_requires_identity_output(self):
        rng = np.random.default_rng(0)
        mlp = Mlp(MlpSpec((3, 4, 1), output_activation="sigmoid"), rng)
        with pytest.raises(VariantError):
            DiscriminatorBundle(mlp, kind="wgan")


class TestConcat:
    def test_basic(self):
        out = concat_sample_encoding(Tensor([1.0, 2.0]), Tensor([3.0]))
        np.testing.assert_array_equal(out.values, [1.0, 2.0, 3.0])

    def test_widths_add(self):
        out = concat_sample_encoding(
            as_batch(np.zeros((4, 3))), as_batch(np.ones((4, 2)))
        )
        assert out.shape == (4, 5)

    def test_order_is_sample_first(self):
        a, b = Tensor([1.0, 2.0]), Tensor([3.0, 4.0])
        ab = concat_sample_encoding(a, b).values
        ba = concat_sample_encoding(b, a).values
        assert not np.array_equal(ab, ba)

    def test_gradient_flows_through_both_sides(self):
        a = Tensor([1.0, 2.0])
        b = Tensor([3.0])
        with ad.Tape() as tape:
            joined = concat_sample_encoding(a, b)
            loss = ad.lp_power_norm(joined, 2)
        tape.backward(loss)
        np.testing.assert_array_equal(a.grad, [2.0, 4.0])
        np.testing.assert_array_equal(b.grad, [6.0])


class TestParameterArithmetic:
    def test_counts_match_width_arithmetic(self):
        gen = make_generator(d=7, dprime=3, hidden=16)
        expect_enc = 7 * 16 + 16 + 16 * 3 + 3
        expect_dec = 3 * 16 + 16 + 16 * 7 + 7
        assert gen.encoder.parameter_count() == expect_enc
        assert gen.decoder.parameter_count() == expect_dec
        disc = make_discriminator(width=7, hidden=(16, 8))
        assert disc.mlp.parameter_count() == 7 * 16 + 16 + 16 * 8 + 8 + 8 * 1 + 1

    def test_second_encoder_is_independent(self):
        gen = make_generator(second=True)
        assert gen.second_encoder.spec == gen.encoder.spec
        assert not np.array_equal(
            gen.second_encoder.weights[0].values, gen.encoder.weights[0].values
        )
