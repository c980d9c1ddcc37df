"""ATTACH: feature templates, the log-linear pair distribution, unmatched counting."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from punctmodel.attach import (AttachConfigError, AttachWeights, attach_distribution, attach_prob,
                               correction_features, count_unmatched, extract_features,
                               feature_name, node_context, width_bucket)
from punctmodel.corpus import EPS, DepNode, DepTree, PunctemeVocab

LQ, RQ = ("“",), ("”",)
COMMA = (",",)


def dale_tree() -> DepTree:
    return DepTree([DepNode(1, "Dale", "NOUN", 2, "nsubj"), DepNode(2, "means", "VERB", 0, "root"),
                    DepNode(3, "river", "NOUN", 4, "compound"),
                    DepNode(4, "valley", "NOUN", 2, "obj")])


def conj_tree() -> DepTree:
    return DepTree([DepNode(1, "tea", "NOUN", 0, "root"), DepNode(2, "and", "CCONJ", 3, "cc"),
                    DepNode(3, "milk", "NOUN", 1, "conj")])


PUNCT = st.sampled_from([",", ".", "(", ")", "“", "”", "¿", "?", "-", ";"])
PUNCTEME = st.lists(PUNCT, max_size=3).map(tuple)


class TestFeatures:
    def test_nsubj_feature_set(self):
        ctx = node_context(dale_tree(), 1)
        feats = extract_features(LQ, RQ, ctx)
        expect = {"N.“.”.NOUN.←nsubj", "W.1.“.”.NOUN.←nsubj", "S.NOUN.←nsubj",
                  "A.“.”.NOUN.←nsubj.root", "L.“.BOS.NOUN", "R.”.NOUN.VERB"}
        assert expect <= feats

    def test_conj_cc_feature(self):
        ctx = node_context(conj_tree(), 3)
        assert "C.ε.ε.conj.cc" in extract_features(EPS, EPS, ctx)

    def test_empty_pair_has_no_symmetry_feature(self):
        ctx = node_context(dale_tree(), 3)
        feats = extract_features(EPS, EPS, ctx)
        prefixes = {f.split(".")[0] for f in feats}
        assert {"N", "W", "A", "L", "R"} <= prefixes
        assert "S" not in prefixes and "C" not in prefixes

    def test_comma_pair_is_symmetric(self):
        ctx = node_context(conj_tree(), 3)
        assert "S.NOUN.→conj" in extract_features(COMMA, COMMA, ctx)

    def test_dots_are_escaped(self):
        assert feature_name("N", (".",), EPS, "X", "root") == "N.\\..ε.X.root"

    def test_internal_punctuation_key(self):
        tree = dale_tree()
        slots = [("^",), (",",), ("(",), (")",), (".",)]
        ctx = node_context(tree, 2, slots)
        assert ctx.inner == ("(", ")", ",")
        assert "N.ε.{( ) ,}.\\..root" in extract_features(EPS, (".",), ctx)

    @pytest.mark.parametrize("width, bucket", [(1, "1"), (3, "3"), (4, "4-5"), (5, "4-5"),
                                               (6, "6-10"), (10, "6-10"), (11, "11+")])
    def test_width_buckets(self, width, bucket):
        assert width_bucket(width) == bucket

    def test_pure(self):
        ctx = node_context(dale_tree(), 4)
        assert extract_features(LQ, RQ, ctx) == extract_features(LQ, RQ, ctx)


class TestCorrectionFeatures:
    def test_copy_evidence(self):
        ctx = node_context(dale_tree(), 4)
        feats = correction_features(COMMA, EPS, ctx, COMMA, EPS)
        assert "N.,.ε.NOUN.→obj.,.ε" in feats
        assert "W.2.,.ε.NOUN.→obj.,.ε" in feats
        assert extract_features(COMMA, EPS, ctx) < feats

    def test_insertion_evidence(self):
        ctx = node_context(dale_tree(), 4)
        assert "N.,.,.ε.ε" in correction_features(COMMA, COMMA, ctx, EPS, EPS)

    def test_backoffs(self):
        ctx = node_context(dale_tree(), 4)
        feats = correction_features(COMMA, COMMA, ctx, EPS, EPS)
        assert "N.,.,.NOUN.→obj.ε.ε" in feats
        assert "N.,.,.→obj.ε.ε" in feats
        assert "N.,.,.NOUN.ε.ε" in feats


class TestAttachProb:
    def setup_method(self):
        self.ctx = node_context(dale_tree(), 4)

    def test_singleton(self):
        assert attach_prob(EPS, EPS, self.ctx, AttachWeights(), [(EPS, EPS)]) == 1.0

    def test_uniform(self):
        pairs = [(EPS, EPS), (COMMA, COMMA), (LQ, RQ), (COMMA, EPS), (EPS, COMMA)]
        for l, r in pairs:
            assert attach_prob(l, r, self.ctx, AttachWeights(), pairs) == pytest.approx(0.2)

    def test_hand_softmax(self):
        pairs = [(EPS, EPS), (COMMA, COMMA)]
        theta = AttachWeights({feature_name("N", COMMA, COMMA, "NOUN", "→obj"): math.log(3)})
        assert attach_prob(EPS, EPS, self.ctx, theta, pairs) == pytest.approx(0.25)
        assert attach_prob(COMMA, COMMA, self.ctx, theta, pairs) == pytest.approx(0.75)

    def test_outside_inventory(self):
        assert attach_prob(LQ, RQ, self.ctx, AttachWeights(), [(EPS, EPS)]) == 0.0

    def test_vocab_inventory(self):
        vocab = PunctemeVocab(frozenset({COMMA}), {"obj": [(COMMA, COMMA)]})
        assert attach_prob(COMMA, COMMA, self.ctx, AttachWeights(), vocab) == pytest.approx(0.5)

    def test_empty_inventory(self):
        with pytest.raises(AttachConfigError):
            attach_prob(EPS, EPS, self.ctx, AttachWeights(), [])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-50, 50))
    def test_normalized_and_shift_invariant(self, seed, shift):
        rng = np.random.default_rng(seed)
        pairs = [(EPS, EPS), (COMMA, COMMA), (LQ, RQ), (COMMA, EPS)]
        names = set()
        for l, r in pairs:
            names |= extract_features(l, r, self.ctx)
        theta = AttachWeights({n: float(rng.normal()) for n in names})
        p = attach_distribution(pairs, self.ctx, theta)
        assert abs(p.sum() - 1.0) < 1e-12
        # every pair fires exactly one A feature, so shifting those shifts each score equally
        shifted = AttachWeights({n: w + (shift if n.startswith("A.") else 0.0)
                                 for n, w in theta.weights.items()})
        np.testing.assert_allclose(attach_distribution(pairs, self.ctx, shifted), p, atol=1e-9)


class TestUnmatched:
    @pytest.mark.parametrize("l, r, c", [
        (("(",), (")",), 0), (("(",), EPS, 1), ((",",), (".",), 0), (LQ, RQ, 0),
        (("(", "“"), ("”", ")"), 0), (("(", "“"), (")", "”"), 1), (EPS, (")",), 1),
        (("¿",), ("?",), 0), (("-",), EPS, 0),
    ])
    def test_examples(self, l, r, c):
        assert count_unmatched(l, r) == c

    @given(PUNCTEME, PUNCTEME, st.sampled_from([",", ".", "-", ";", ":"]))
    def test_filter_stability(self, l, r, tok):
        assert count_unmatched(l + (tok,), r + (tok,)) == count_unmatched(l, r)

    @given(PUNCTEME, PUNCTEME)
    def test_binary(self, l, r):
        assert count_unmatched(l, r) in (0, 1)
