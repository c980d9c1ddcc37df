"""Training objective, exact gradients and the optimization loop."""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import one_word_tree, root_model
from oracles import finite_difference, rel_err, with_all_features
from punctmodel.attach import AttachWeights, feature_name
from punctmodel.channel import L2R, R2L, ChannelParams
from punctmodel.corpus import EPS, AnnotatedSentence
from punctmodel.forest import inside
from punctmodel.synthetic import planted_corpus, planted_model, random_instance
from punctmodel.train import (TrainConfig, TrainingError, gradient, objective, sentence_rng,
                              train)

DOT = (".",)


class TestObjective:
    def test_loglik_only(self):
        s, model = random_instance(np.random.default_rng(0))
        batch = [s, s]
        expect = sum(inside(b, model).log_likelihood for b in batch)
        assert objective(batch, model, TrainConfig(l2=0, pr=0)) == pytest.approx(expect)

    def test_l2_vanishes_at_zero(self):
        s, model = random_instance(np.random.default_rng(1))
        model.theta = AttachWeights()
        a = objective([s], model, TrainConfig(l2=3.0, pr=0))
        b = objective([s], model, TrainConfig(l2=0.0, pr=0))
        assert a == b

    def test_forced_example(self):
        model = root_model([(EPS, DOT)], [800.0])
        s = AnnotatedSentence(one_word_tree(), [EPS, DOT])
        assert objective([s], model, TrainConfig(l2=0, pr=10)) == 0.0

    def test_pr_term(self):
        s, model = random_instance(np.random.default_rng(2))
        e = inside(s, model).expected_unmatched
        base = objective([s], model, TrainConfig(l2=0, pr=0))
        assert objective([s], model, TrainConfig(l2=0, pr=2.0)) == pytest.approx(base - 2.0 * e)
        assert objective([s], model, TrainConfig(l2=0, pr=2.0, square_pr=True)) == \
            pytest.approx(base - 2.0 * e * e)

    def test_batch_order_invariant(self):
        rng = np.random.default_rng(3)
        s, model = random_instance(rng)
        batch = [s, s, s]
        a = objective(batch, model, TrainConfig())
        b = objective(batch[::-1], model, TrainConfig())
        assert a == pytest.approx(b, rel=1e-12)

    def test_unexplainable_skipped(self):
        model = root_model([(EPS, DOT)], [800.0], alphabet=(",", "."))
        good = AnnotatedSentence(one_word_tree("a"), [EPS, DOT])
        bad = AnnotatedSentence(one_word_tree("b"), [EPS, (",",)])
        assert objective([good, bad], model, TrainConfig(l2=0, pr=0)) == 0.0


class TestGradient:
    def test_l2_only(self):
        model = root_model([(EPS, EPS)])
        name = feature_name("N", EPS, EPS, "VERB", "root")
        model.theta = AttachWeights({name: 1.5, "unused": -0.5})
        s = AnnotatedSentence(one_word_tree(), [EPS, EPS])
        g = gradient([s], model, TrainConfig(l2=0.3, pr=0))
        assert g.theta[name] == pytest.approx(-2 * 0.3 * 1.5)
        assert g.theta["unused"] == pytest.approx(-2 * 0.3 * -0.5)

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("config", [TrainConfig(l2=0.5, pr=0.0), TrainConfig(l2=0.5, pr=2.0),
                                        TrainConfig(l2=0.0, pr=1.0, square_pr=True)],
                             ids=["xi0", "xi2", "squared"])
    def test_finite_differences(self, seed, config):
        s, model = random_instance(np.random.default_rng(40 + seed))
        model = with_all_features(s, model)
        g = gradient([s], model, config)
        fd_theta, fd_phi = finite_difference([s], model, config)
        for name, v in fd_theta.items():
            assert rel_err(g.theta[name], v) < 1e-4, name
        for idx in np.ndindex(fd_phi.shape):
            assert rel_err(g.phi[idx], fd_phi[idx]) < 1e-4, idx

    def test_untouched_bigram(self):
        model = root_model([(EPS, DOT)], [1.0], alphabet=(",", "."),
                           phi=ChannelParams.random((",", "."), np.random.default_rng(0)))
        s = AnnotatedSentence(one_word_tree(), [EPS, DOT])
        g = gradient([s], model, TrainConfig(l2=0, pr=0))
        assert np.all(g.phi == 0.0)


class TestTrainLoop:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(l2=-1)
        with pytest.raises(ValueError):
            TrainConfig(direction="up")

    def test_defaults(self):
        c = TrainConfig()
        assert (c.learning_rate, c.batch_size, c.sentences_per_epoch, c.epochs) == (0.07, 5, 400, 30)

    def test_empty_treebank(self):
        with pytest.raises(TrainingError):
            train([])

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        data = planted_corpus(planted_model(), 40, rng)
        config = TrainConfig(epochs=2, sentences_per_epoch=20, seed=7)
        a = train(data, config).model
        b = train(data, config).model
        assert a.theta.weights == b.theta.weights
        np.testing.assert_array_equal(a.phi.scores, b.phi.scores)

    def test_softmax_regression_optimum(self):
        """Identity channel, no regularization: the optimum is the empirical rate."""
        data = [AnnotatedSentence(one_word_tree(f"s{i}"), [EPS, DOT if i % 4 else EPS])
                for i in range(8)]
        config = TrainConfig(epochs=150, batch_size=8, sentences_per_epoch=8, l2=0, pr=0,
                             channel="identity", learning_rate=0.1)
        model = train(data, config).model
        assert inside(data[1], model).likelihood == pytest.approx(0.75, abs=2e-3)
        assert model.phi.identity

    def test_dev_likelihood_improves(self):
        rng = np.random.default_rng(1)
        model = planted_model()
        data = planted_corpus(model, 150, rng)
        dev = planted_corpus(model, 40, rng, "d")
        log = train(data, TrainConfig(epochs=4, sentences_per_epoch=150, seed=0), dev=dev).log
        assert log[-1].dev_loglik > log[0].dev_loglik
        assert all(r.skipped == 0 for r in log)

    def test_auto_direction(self):
        rng = np.random.default_rng(2)
        model = planted_model()
        data = planted_corpus(model, 30, rng)
        dev = planted_corpus(model, 10, rng, "d")
        res = train(data, TrainConfig(epochs=1, sentences_per_epoch=30, direction="auto"), dev=dev)
        assert set(res.direction_scores) == {L2R, R2L}
        assert res.model.phi.direction == min(res.direction_scores, key=res.direction_scores.get)

    def test_log_tsv(self):
        rng = np.random.default_rng(3)
        data = planted_corpus(planted_model(), 10, rng)
        res = train(data, TrainConfig(epochs=2, sentences_per_epoch=10), dev=data[:3])
        rows = res.log_tsv().splitlines()
        assert rows[0].split("\t") == ["epoch", "objective", "dev_loglik", "dev_perplexity",
                                       "skipped"]
        assert len(rows) == 3
        assert 1 <= res.best_epoch <= 2

    def test_on_step_sees_normalized_channel(self):
        rng = np.random.default_rng(4)
        data = planted_corpus(planted_model(), 20, rng)
        sums = []
        train(data, TrainConfig(epochs=1, sentences_per_epoch=20),
              on_step=lambda st: sums.append(float(st.flat_probs().detach()[:-1].reshape(-1, 4)
                                                   .sum(-1).sub(1).abs().max())))
        assert len(sums) == 4 and max(sums) < 1e-12

    def test_sentence_rng(self):
        a = sentence_rng(1, "s").random()
        assert a == sentence_rng(1, "s").random()
        assert a != sentence_rng(2, "s").random()
        assert math.isfinite(a)
