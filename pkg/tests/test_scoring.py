"""Anomaly scores: pair formula, ensemble averaging, report plumbing."""

import dataclasses

import numpy as np
import pytest

from _reference import (
    loop_pair_score,
    make_discriminator,
    make_identity_generator,
)
from ganens.autodiff import Tensor
from ganens.losses import LossWeights, disc_loss, recon_loss
from ganens.scoring import (
    ensemble_score,
    pair_score,
    read_report,
    score_dataset,
    write_report,
)
from ganens.training import TrainConfig, build_ensemble, train

RNG = np.random.default_rng(99)


def trained_model(variant="f-anogan", size=3, seed=0, iters=25):
    model = build_ensemble(
        variant, d=2, dprime=2, n_generators=size, n_discriminators=size,
        seed=seed, enc_hidden=(4,), dec_hidden=(4,), disc_hidden=(5, 3),
    )
    rng = np.random.default_rng(seed + 1)
    theta = rng.uniform(0, 2 * np.pi, 96)
    data = np.column_stack([np.cos(theta), np.sin(theta)])
    cfg = TrainConfig(max_iter=iters, batch_size=8, lr_gen=1e-3, lr_disc=1e-3,
                      seed=seed + 2, convergence_tol=0.0)
    train(model, data, cfg)
    return model


class TestPairScore:
    def test_zero_weight_reduces_to_reconstruction(self):
        model = trained_model(size=1, iters=5)
        gen, disc = model.generators[0], model.discriminators[0]
        weights = dataclasses.replace(model.weights, score_weight=0.0)
        x = RNG.uniform(-1, 1, size=2)
        score = pair_score(x, gen, disc, weights, model.variant)
        recon = recon_loss(Tensor(x[None, :]), gen, weights.norm_order).item()
        assert score == pytest.approx(recon, abs=1e-15)

    def test_perfect_reconstruction_scores_zero(self):
        gen = make_identity_generator(d=2)
        disc = make_discriminator(width=2, kind="gan")
        weights = LossWeights(adversarial=1.0, score_weight=3.0)
        assert pair_score(np.array([0.5, 1.5]), gen, disc, weights, "f-anogan") == 0.0

    def test_matches_component_losses(self):
        model = trained_model(size=1, iters=10)
        gen, disc = model.generators[0], model.discriminators[0]
        weights = dataclasses.replace(model.weights, score_weight=2.5)
        x = RNG.uniform(-1, 1, size=2)
        score = pair_score(x, gen, disc, weights, model.variant)
        batch = Tensor(x[None, :])
        expect = (
            recon_loss(batch, gen, weights.norm_order).item()
            + 2.5 * disc_loss(batch, gen, disc, weights.norm_order).item()
        )
        assert score == pytest.approx(expect, rel=1e-12, abs=1e-12)

    def test_matches_loop_oracle_per_variant(self):
        for variant, size in (("f-anogan", 1), ("egbad", 1), ("ganomaly", 1)):
            model = trained_model(variant, size=size, iters=8)
            gen, disc = model.generators[0], model.discriminators[0]
            x = np.random.default_rng(5).uniform(-1, 1, size=2)
            mine = pair_score(x, gen, disc, model.weights, variant)
            ref = loop_pair_score(x, gen, disc, model.weights, variant)
            assert mine == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_monotone_in_score_weight(self):
        model = trained_model(size=1, iters=10)
        gen, disc = model.generators[0], model.discriminators[0]
        x = RNG.uniform(-1, 1, size=2)
        values = []
        for beta in (0.0, 0.5, 1.0, 4.0):
            w = dataclasses.replace(model.weights, score_weight=beta)
            values.append(pair_score(x, gen, disc, w, model.variant))
        assert all(b > a for a, b in zip(values, values[1:]))


class TestEnsembleScore:
    def test_single_pair_equals_pair_score(self):
        model = trained_model(size=1, iters=10)
        x = RNG.uniform(-1, 1, size=2)
        direct = pair_score(x, model.generators[0], model.discriminators[0],
                            model.weights, model.variant)
        assert ensemble_score(x, model) == pytest.approx(direct, abs=1e-15)

    def test_identical_pairs_average_to_common_value(self):
        model = trained_model(size=2, iters=10)
        # Force every generator and discriminator to share one set of values.
        for gen in model.generators[1:]:
            for p, q in zip(gen.parameters(), model.generators[0].parameters()):
                p.values[:] = q.values
        for disc in model.discriminators[1:]:
            for p, q in zip(disc.parameters(), model.discriminators[0].parameters()):
                p.values[:] = q.values
        x = RNG.uniform(-1, 1, size=2)
        common = pair_score(x, model.generators[0], model.discriminators[0],
                            model.weights, model.variant)
        assert ensemble_score(x, model) == pytest.approx(common, abs=1e-15)

    def test_three_by_three_mean_of_pairs(self):
        model = trained_model(size=3, iters=15)
        x = RNG.uniform(-1, 1, size=2)
        pairs = [
            pair_score(x, gen, disc, model.weights, model.variant)
            for gen in model.generators
            for disc in model.discriminators
        ]
        assert ensemble_score(x, model) == pytest.approx(float(np.mean(pairs)), abs=1e-12)


class TestScoreDataset:
    def test_single_sample_report(self):
        model = trained_model(size=2, iters=5)
        report = score_dataset(RNG.uniform(-1, 1, size=(1, 2)), model)
        assert report.scores.shape == (1,)
        assert report.pair_scores.shape == (4, 1)
        assert report.pair_labels == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_row_permutation_permutes_report(self):
        model = trained_model(size=2, iters=5)
        samples = RNG.uniform(-1, 1, size=(20, 2))
        perm = np.random.default_rng(3).permutation(20)
        base = score_dataset(samples, model)
        shuffled = score_dataset(samples[perm], model)
        np.testing.assert_allclose(shuffled.scores, base.scores[perm], rtol=1e-15)
        np.testing.assert_allclose(shuffled.pair_scores, base.pair_scores[:, perm], rtol=1e-15)

    def test_ensemble_row_matches_per_sample_calls(self):
        model = trained_model(size=2, iters=10)
        samples = RNG.uniform(-1, 1, size=(7, 2))
        report = score_dataset(samples, model)
        singles = [ensemble_score(row, model) for row in samples]
        np.testing.assert_allclose(report.scores, singles, rtol=1e-12, atol=1e-15)

    def test_ensemble_row_is_pair_mean(self):
        model = trained_model(size=3, iters=10)
        samples = RNG.uniform(-1, 1, size=(11, 2))
        report = score_dataset(samples, model)
        np.testing.assert_allclose(
            report.scores, report.pair_scores.mean(axis=0), rtol=0, atol=0
        )

    def test_scoring_never_mutates_parameters(self):
        model = trained_model(size=2, iters=10)
        before = [p.values.copy() for p in model.parameters()]
        score_dataset(RNG.uniform(-1, 1, size=(30, 2)), model)
        for a, p in zip(before, model.parameters()):
            np.testing.assert_array_equal(a, p.values)

    def test_scores_nonnegative(self):
        for variant in ("f-anogan", "egbad", "ganomaly"):
            model = trained_model(variant, size=2, iters=8)
            report = score_dataset(RNG.uniform(-1, 1, size=(10, 2)), model)
            assert np.all(report.pair_scores >= 0.0)

    def test_report_file_roundtrip(self, tmp_path):
        model = trained_model(size=2, iters=5)
        samples = RNG.uniform(-1, 1, size=(6, 2))
        labels = np.array([0, 1, 0, 0, 1, 0])
        report = score_dataset(samples, model, labels=labels)
        path = tmp_path / "scores.csv"
        write_report(report, path)
        scores, read_labels, pair_matrix = read_report(path)
        np.testing.assert_array_equal(scores, report.scores)
        np.testing.assert_array_equal(read_labels, labels)
        np.testing.assert_array_equal(pair_matrix, report.pair_scores)

    def test_report_without_labels(self, tmp_path):
        model = trained_model(size=1, iters=5)
        report = score_dataset(RNG.uniform(-1, 1, size=(3, 2)), model)
        path = tmp_path / "scores.csv"
        write_report(report, path)
        _, labels, _ = read_report(path)
        assert labels is None
