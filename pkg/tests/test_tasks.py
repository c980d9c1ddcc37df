"""Perplexity, MBR restoration, metrics, correction, rephrasing and CoNLL-U output."""
from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dale_sentence, one_word_tree, root_model
from oracles import edit_distance
from punctmodel.attach import AttachWeights, feature_name
from punctmodel.channel import LEFT_ABSORB, R2L, RIGHT_ABSORB, ChannelParams, simulate
from punctmodel.corpus import (EPS, START_MARK, AnnotatedSentence, DepNode, DepTree,
                               PunctemeVocab, depunctuate, load_treebank, parse_conllu,
                               write_conllu)
from punctmodel.model import PunctuationModel
from punctmodel.synthetic import (king_sentence, planted_corpus, planted_model,
                                  random_projective_tree)
from punctmodel.tasks import (EditSet, FilePermutation, MbrConfig, ShufflePermutation,
                              TrigramLM, aed, channel_report, corpus_f_half, correct, f_half,
                              identity_order, linearize, mbr_select, permute_tree, perplexity,
                              rephrase, rephrase_base, rephrase_corpus, restore, slot_distance,
                              surface_tokens, to_raw_sentence, token_edit_distance, trigram_ppl,
                              trivial_baseline, underlying_misc)

COMMA, DOT = (",",), (".",)
BIG = 800.0  # pushes the always-present (ε, ε) pair to probability 0


def outcome_model(outcomes):
    """1-word tree whose root picks ``(l, r)`` with the given probabilities;
    identity channel, so each pair is a surface outcome."""
    pairs = list(outcomes)
    scores = [BIG + math.log(p) for p in outcomes.values()]
    return root_model(pairs, scores, alphabet=(",", "."))


def expected_loss(candidate, dist):
    return sum(p * sum(edit_distance(a, b) for a, b in zip(candidate, y)) for y, p in dist.items())


def sentence_for(model, pt):
    x = [simulate(u, model.phi, argmax=True) for u in pt.underlying_slots()]
    return AnnotatedSentence(pt.tree, x)


def by_form(order):
    """Permutation keyed by head form: ``{head form: [forms in new order]}``."""
    def fn(tree, h):
        forms = order.get(tree.node(h).form)
        if forms is None:
            return None
        nd = tree.node(h)
        ids = {tree.node(t).form: t for t in list(nd.kids) + [h]}
        return [ids[f] for f in forms]
    return fn


class TestPerplexity:
    def test_deterministic_model(self):
        model = outcome_model({(EPS, DOT): 1.0})
        s = AnnotatedSentence(one_word_tree(), [EPS, DOT])
        assert perplexity([s, s], model).perplexity == pytest.approx(1.0)

    def test_uniform_outcomes(self):
        model = outcome_model({(l, r): 0.25 for l in (COMMA, DOT) for r in (COMMA, DOT)})
        data = [AnnotatedSentence(one_word_tree(f"s{i}"), [COMMA, DOT]) for i in range(3)]
        assert perplexity(data, model).perplexity == pytest.approx(2.0)

    def test_hand_computed(self):
        model = outcome_model({(EPS, DOT): 0.7, (EPS, COMMA): 0.3})
        a = AnnotatedSentence(one_word_tree("a"), [EPS, DOT])
        b = AnnotatedSentence(one_word_tree("b"), [EPS, COMMA])
        rep = perplexity([a, b], model)
        assert rep.perplexity == pytest.approx(math.exp(-(math.log(0.7) + math.log(0.3)) / 4))
        assert rep.slots == 4 and rep.sentences == 2

    def test_excluded_and_undefined(self):
        model = outcome_model({(EPS, DOT): 1.0})
        bad = AnnotatedSentence(one_word_tree("bad"), [EPS, COMMA])
        rep = perplexity([bad], model)
        assert rep.excluded == ["bad"] and math.isnan(rep.perplexity)


class TestMbr:
    def test_point_mass(self):
        model = outcome_model({(EPS, DOT): 1.0})
        assert restore(one_word_tree(), model, MbrConfig(50, 0)) == [EPS, DOT]

    def test_two_outcomes_mode_wins(self):
        model = outcome_model({(EPS, DOT): 0.8, (EPS, COMMA): 0.2})
        assert restore(one_word_tree(), model, MbrConfig(500, 3)) == [EPS, DOT]

    def test_centroid_beats_mode(self):
        dist = {(COMMA, COMMA): 0.36, (DOT, DOT): 0.34, (COMMA, DOT): 0.30}
        model = outcome_model(dist)
        got = restore(one_word_tree(), model, MbrConfig(2000, 1))
        truth = {tuple(k): v for k, v in dist.items()}
        best = min(truth, key=lambda c: expected_loss(c, truth))
        assert best == (COMMA, DOT) != max(truth, key=truth.get)
        assert tuple(got) == best

    def test_single_sample(self):
        model = outcome_model({(EPS, DOT): 0.5, (EPS, COMMA): 0.5})
        from punctmodel.tasks import sample_surfaces
        from punctmodel.train import sentence_rng
        tree = one_word_tree()
        draw = sample_surfaces(tree, model, 1, sentence_rng(4, tree.sent_id))[0]
        assert restore(tree, model, MbrConfig(1, 4)) == draw

    def test_select_ties_to_first(self):
        a, b = [EPS, DOT], [EPS, COMMA]
        res = mbr_select([a, b])
        assert res.slots == a and res.risk == pytest.approx(0.5)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.sampled_from([EPS, COMMA, DOT, (",", ".")]), min_size=2,
                             max_size=2), min_size=1, max_size=12))
    def test_select_is_brute_force_argmin(self, samples):
        res = mbr_select(samples)
        dist = Counter(tuple(s) for s in samples)
        dist = {k: v / len(samples) for k, v in dist.items()}
        assert expected_loss(res.slots, dist) == pytest.approx(min(expected_loss(c, dist) for c in dist))

    def test_reproducible(self):
        model = outcome_model({(EPS, DOT): 0.5, (EPS, COMMA): 0.5})
        a = restore(one_word_tree(), model, MbrConfig(7, 9))
        assert all(restore(one_word_tree(), model, MbrConfig(7, 9)) == a for _ in range(3))

    def test_config(self):
        with pytest.raises(ValueError):
            MbrConfig(samples=0)


class TestAed:
    def test_identical(self):
        x = [[EPS, COMMA, DOT]]
        assert aed(x, x) == 0.0

    def test_missing_comma(self):
        assert aed([[EPS, EPS, EPS, DOT]], [[EPS, COMMA, EPS, DOT]]) == 0.25

    def test_transposed_pair(self):
        assert token_edit_distance((".", "”"), ("”", ".")) == 2

    def test_corpus_level(self):
        pred = [[EPS, DOT], [EPS, EPS, EPS]]
        gold = [[EPS, COMMA], [EPS, EPS, DOT]]
        assert aed(pred, gold) == pytest.approx(2 / 5)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            slot_distance([EPS], [EPS, EPS])

    TOKS = st.lists(st.sampled_from([",", ".", "(", ")"]), max_size=4).map(tuple)

    @given(TOKS, TOKS)
    def test_matches_table_oracle(self, a, b):
        assert token_edit_distance(a, b) == edit_distance(a, b)

    @given(TOKS, TOKS, TOKS)
    def test_triangle(self, a, b, c):
        assert token_edit_distance(a, c) <= token_edit_distance(a, b) + token_edit_distance(b, c)


class TestTrivialBaseline:
    def test_english(self):
        tree = random_projective_tree(np.random.default_rng(0), 3)
        assert trivial_baseline(tree) == [EPS, EPS, EPS, DOT]

    def test_hindi(self):
        assert trivial_baseline(one_word_tree(), final_mark="|") == [EPS, ("|",)]

    def test_one_word(self):
        assert trivial_baseline(one_word_tree()) == [EPS, DOT]

    def test_start_mark(self):
        assert trivial_baseline(one_word_tree(), start_mark=START_MARK) == [(START_MARK,), DOT]


class TestFHalf:
    def gold(self):
        return EditSet.between([EPS, EPS, EPS], [COMMA, EPS, DOT])

    def test_equal(self):
        assert f_half(self.gold(), self.gold()) == 1.0

    def test_disjoint(self):
        system = EditSet.between([EPS, EPS, EPS], [EPS, COMMA, EPS])
        assert f_half(system, self.gold()) == 0.0

    def test_precision_one_recall_half(self):
        system = EditSet.between([EPS, EPS, EPS], [COMMA, EPS, EPS])
        assert f_half(system, self.gold()) == pytest.approx(0.8333333333333334)

    def test_empty(self):
        assert f_half(EditSet(), EditSet()) == 1.0

    def test_one_edit_per_slot(self):
        with pytest.raises(ValueError):
            EditSet(frozenset({(0, EPS, COMMA), (0, EPS, DOT)}))

    def test_corpus_pooling(self):
        src = [[EPS, EPS], [EPS, EPS]]
        out = [[COMMA, EPS], [EPS, EPS]]
        gold = [[COMMA, EPS], [EPS, DOT]]
        assert corpus_f_half(src, out, gold) == pytest.approx(1.25 * 0.5 / (0.25 + 0.5))

    def test_monotone_in_correct_edits(self):
        gold = EditSet.between([EPS] * 4, [COMMA, DOT, COMMA, DOT])
        records = sorted(gold.records)
        scores = [f_half(EditSet(frozenset(records[:k])), gold) for k in range(4, -1, -1)]
        assert scores == sorted(scores, reverse=True)


class TestTrigram:
    def test_closed_form(self):
        lam = 0.001
        corpus = [["a", "b"], ["a", "c"]]
        v = 5  # a, b, c, </s>, UNK
        p_a = (2 + lam) / (2 + v * lam)
        p_b = (1 + lam) / (2 + v * lam)
        p_end = (1 + lam) / (1 + v * lam)
        expect = math.exp(-2 * math.log(p_a * p_b * p_end) / 6)
        assert trigram_ppl(corpus, corpus, lam) == pytest.approx(expect, rel=1e-12)

    def test_memorization_limit(self):
        corpus = [["x", "y", "z"]] * 3
        assert trigram_ppl(corpus, corpus, 1e-9) == pytest.approx(1.0, abs=1e-6)

    def test_unknown_words(self):
        lm = TrigramLM.fit([["a"]])
        lp, k = lm.score(["zzz"])
        assert k == 2 and math.isfinite(lp)

    def test_empty_eval(self):
        with pytest.raises(ValueError):
            trigram_ppl([["a"]], [])

    def test_full_beats_base(self):
        rng = np.random.default_rng(5)
        model = planted_model()
        data = planted_corpus(model, 150, rng)
        held = [surface_tokens(s) for s in planted_corpus(model, 150, rng, "h")]
        full = trigram_ppl(rephrase_corpus(data, "full", model, seed=0), held)
        base = trigram_ppl(rephrase_corpus(data, "base", model, seed=0), held)
        assert full < base


class TestCorrection:
    def test_copy_weights_keep_correct_input(self):
        pairs = [(EPS, DOT), (EPS, COMMA)]
        esl = outcome_model({(EPS, DOT): 0.5, (EPS, COMMA): 0.5})
        weights = {feature_name("N", l, r, l, r): 20.0 for l, r in pairs}
        weights[feature_name("N", EPS, DOT, "VERB", "root")] = 3.0
        cesl = PunctuationModel(esl.vocab, AttachWeights(weights), esl.phi)
        s = AnnotatedSentence(one_word_tree(), [EPS, COMMA])
        res = correct(s, esl, cesl, MbrConfig(100, 0))
        assert res.slots == [EPS, COMMA] and not res.fallback
        assert res.recovered.punctemes == {1: (EPS, COMMA)}
        # without copy evidence the preference for "." takes over
        plain = PunctuationModel(esl.vocab, AttachWeights(
            {feature_name("N", EPS, DOT, "VERB", "root"): 3.0}), esl.phi)
        assert correct(s, esl, plain, MbrConfig(100, 0)).slots == [EPS, DOT]

    def test_appositive_commas_restored(self):
        tree = DepTree([DepNode(1, "Arthur", "NOUN", 3, "nsubj"),
                        DepNode(2, "king", "NOUN", 1, "appos"),
                        DepNode(3, "rules", "VERB", 0, "root")], "appos")
        errorful = AnnotatedSentence(tree, [(START_MARK,), EPS, EPS, DOT])
        res = correct(errorful, planted_model(), planted_model(appos_comma=0.99), MbrConfig(200, 0))
        assert res.slots == [(START_MARK,), COMMA, COMMA, DOT]

    def test_unexplainable_falls_back(self):
        esl = outcome_model({(EPS, DOT): 1.0})
        s = AnnotatedSentence(one_word_tree(), [EPS, COMMA])
        res = correct(s, esl, esl, MbrConfig(20, 0))
        assert res.fallback and res.slots == [EPS, DOT]


class TestRephrase:
    def king(self):
        model, pt = king_sentence(R2L)
        return model, sentence_for(model, pt)

    def test_identity_round_trip(self):
        model, s = self.king()
        out = rephrase(s, model, identity_order, argmax=True)
        assert out.sentence.slots == s.slots and not out.flagged

    def test_idempotent(self):
        model, s = self.king()
        once = rephrase(s, model, identity_order, argmax=True).sentence
        twice = rephrase(once, model, identity_order, argmax=True).sentence
        assert twice.slots == once.slots

    def test_clause_swap_moves_commas(self):
        model, s = self.king()
        swap = by_form({"king": ["the", "king", "wields", "Pendragon"]})
        out = rephrase(s, model, swap, argmax=True).sentence
        toks = surface_tokens(out)
        assert toks[-1] == "." and toks[-2] == "Pendragon"
        assert toks[toks.index("king") + 1] == ","
        assert all(slot.count(",") <= 1 for slot in out.slots)

    def test_base_moves_punctuation_as_words(self):
        model, s = self.king()
        # the punctuated tree attaches both commas to "king" (tokens 4 and 7)
        swap = lambda t, h: [2, 3, 7, 9, 4, 6] if h == 3 else None  # noqa: E731
        forms = [nd.form for nd in rephrase_base(s, swap).nodes]
        assert " ".join(forms) == "Hail the king , who wields “ Excalibur , Arthur Pendragon . ”"

    def test_unexplainable_passes_through(self):
        model = outcome_model({(EPS, DOT): 1.0})
        s = AnnotatedSentence(one_word_tree(), [EPS, COMMA])
        out = rephrase(s, model, identity_order, argmax=True)
        assert out.flagged and out.sentence is s

    def test_needs_rng_when_sampling(self):
        model, s = self.king()
        with pytest.raises(ValueError):
            rephrase(s, model, identity_order)

    def test_half_orders_words_like_base(self):
        rng = np.random.default_rng(6)
        model = planted_model()
        data = planted_corpus(model, 20, rng)
        base = rephrase_corpus(data, "base", model, seed=3)
        half = rephrase_corpus(data, "half", model, seed=3)
        words = lambda toks: [t for t in toks if t not in (",", ".", START_MARK)]  # noqa: E731
        assert [words(b) for b in base] == [words(h) for h in half]

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            rephrase_corpus([dale_sentence()], "quarter")
        assert rephrase_corpus([], "full") == []


class TestPermutation:
    def test_file_parse(self):
        perm = FilePermutation.parse("# comment\ns1\t2\t3 2 1\n")
        tree = DepTree([DepNode(1, "a", "NOUN", 2, "nsubj"), DepNode(2, "b", "VERB", 0, "root"),
                        DepNode(3, "c", "NOUN", 2, "obj")], "s1")
        assert linearize(tree, perm) == [3, 2, 1]

    def test_file_parse_error(self):
        with pytest.raises(ValueError):
            FilePermutation.parse("s1\tx\n")

    def test_invalid_ordering(self):
        tree = DepTree([DepNode(1, "a", "NOUN", 2, "nsubj"), DepNode(2, "b", "VERB", 0, "root")])
        with pytest.raises(ValueError):
            linearize(tree, lambda t, h: [2] if h == 2 else None)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 10_000))
    def test_shuffle_keeps_projectivity(self, n, seed):
        rng = np.random.default_rng(seed)
        tree = random_projective_tree(rng, n)
        seq = linearize(tree, ShufflePermutation(rng, pos=("NOUN", "VERB", "ADJ", "DET")))
        assert sorted(seq) == list(range(1, n + 1))
        new, mapping = permute_tree(tree, seq)
        for nd in tree.nodes:
            assert new.node(mapping[nd.index]).head == mapping[nd.head]


class TestConlluOutput:
    def test_dale_round_trip(self):
        s = dale_sentence()
        raw = to_raw_sentence(s, drop=())
        back = depunctuate(parse_conllu(write_conllu([raw]))[0])
        assert back.slots == s.slots
        assert [nd.head for nd in back.tree.nodes] == [nd.head for nd in s.tree.nodes]

    def test_attach_to_shallowest(self):
        s = dale_sentence()
        raw = to_raw_sentence(s)
        final = raw.tokens[-1]
        assert final.form == "." and raw.tokens[final.head - 1].form == "means"

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 10_000))
    def test_round_trip_random(self, n, seed):
        rng = np.random.default_rng(seed)
        tree = random_projective_tree(rng, n, sent_id="r")
        marks = [EPS, COMMA, DOT, ("(",), (",", ")")]
        slots = [marks[int(rng.integers(len(marks)))] for _ in range(n + 1)]
        s = AnnotatedSentence(tree, slots)
        kept, rejected = load_treebank(parse_conllu(write_conllu([to_raw_sentence(s)])))
        assert not rejected
        assert kept[0].slots == s.slots

    def test_underlying_misc(self):
        _, pt = king_sentence()
        misc = underlying_misc(pt)
        assert misc[1] == "LPunct=∅|RPunct=."
        assert misc[8] == "LPunct=“|RPunct=”"


class TestChannelReport:
    def test_doubled_comma_row(self):
        model, pt = king_sentence(R2L)
        rows = channel_report(model, [sentence_for(model, pt)])
        row = next(r for r in rows if (r.a, r.b) == (",", ","))
        # ", ," collapses to a single comma; which one is absorbed is immaterial
        assert row.probs[LEFT_ABSORB] + row.probs[RIGHT_ABSORB] == pytest.approx(1.0)
        assert row.count == 1
        assert rows[0].count >= rows[-1].count

    def test_uniform(self):
        vocab = PunctemeVocab(frozenset({COMMA, DOT}), {})
        model = PunctuationModel(vocab, AttachWeights(), ChannelParams.uniform((",", ".")))
        for r in channel_report(model):
            np.testing.assert_allclose(r.probs, 0.25)
            assert r.count == 0
