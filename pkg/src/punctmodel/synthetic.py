"""Synthetic trees, random small models and a planted English-like grammar.

Used by the test suite, the acceptance checks and the demo scripts.
"""
from __future__ import annotations

import itertools
import zlib
from typing import Sequence

import numpy as np

from .attach import AttachWeights, feature_name
from .channel import KEEP, LEFT_ABSORB, L2R, R2L, RIGHT_ABSORB, ChannelParams
from .corpus import (ABBREV_DOT, EPS, START_MARK, AnnotatedSentence, DepNode, DepTree,
                     PunctemeVocab)
from .forest import PunctTree, generate
from .model import PunctuationModel

POS_TAGS = ("NOUN", "VERB", "ADJ", "DET")
RELATIONS = ("nsubj", "obj", "amod", "conj")


class SeededWeights(dict):
    """Feature weights drawn from N(0, scale²) on first lookup, keyed by a hash
    of the feature name, so any feature set gets reproducible weights."""

    def __init__(self, seed: int, scale: float = 1.0):
        super().__init__()
        self.seed = seed
        self.scale = scale

    def get(self, key, default=None):
        if key not in self:
            rng = np.random.default_rng([self.seed, zlib.crc32(key.encode("utf-8"))])
            self[key] = float(rng.standard_normal() * self.scale)
        return self[key]


def random_projective_tree(rng: np.random.Generator, n: int,
                           pos_tags: Sequence[str] = POS_TAGS,
                           relations: Sequence[str] = RELATIONS,
                           sent_id: str = "") -> DepTree:
    """A uniformly-built random projective tree over ``n`` words."""
    heads = [0] * (n + 1)

    def build(lo: int, hi: int, parent: int):
        if lo > hi:
            return
        h = int(rng.integers(lo, hi + 1))
        heads[h] = parent
        for a, b in _chunks(rng, lo, h - 1) + _chunks(rng, h + 1, hi):
            build(a, b, h)

    build(1, n, 0)
    nodes = []
    for i in range(1, n + 1):
        rel = "root" if heads[i] == 0 else str(rng.choice(list(relations)))
        nodes.append(DepNode(i, f"w{i}", str(rng.choice(list(pos_tags))), heads[i], rel))
    return DepTree(nodes, sent_id)


def _chunks(rng: np.random.Generator, lo: int, hi: int) -> list:
    """Split ``lo..hi`` into consecutive non-empty runs."""
    if lo > hi:
        return []
    cuts = [c for c in range(lo + 1, hi + 1) if rng.random() < 0.5]
    bounds = [lo] + cuts + [hi + 1]
    return [(bounds[t], bounds[t + 1] - 1) for t in range(len(bounds) - 1)]


def random_vocab(rng: np.random.Generator, alphabet: Sequence[str], relations: Sequence[str],
                 max_pairs: int = 4, max_len: int = 1) -> PunctemeVocab:
    """Random puncteme inventory over ``alphabet`` with at most ``max_pairs`` pairs per relation."""
    punctemes = [EPS] + [p for m in range(1, max_len + 1)
                         for p in itertools.product(alphabet, repeat=m)]
    all_pairs = [(l, r) for l in punctemes for r in punctemes if (l, r) != (EPS, EPS)]
    pairs = {}
    for d in relations:
        k = int(rng.integers(0, max_pairs))
        pick = rng.choice(len(all_pairs), size=min(k, len(all_pairs)), replace=False)
        pairs[d] = [all_pairs[t] for t in pick]
    used = {p for ps in pairs.values() for pair in ps for p in pair}
    # every alphabet token must occur in V so the channel alphabet is stable
    used |= {(a,) for a in alphabet}
    return PunctemeVocab(frozenset(used), pairs)


def random_instance(rng: np.random.Generator, max_nodes: int = 4, max_alphabet: int = 3,
                    max_pairs: int = 4, max_slot: int = 2, direction: str | None = None,
                    weight_scale: float = 1.0, attempts: int = 200) -> tuple:
    """A random ``(sentence, model)`` small enough for brute-force enumeration.

    The surface slots are drawn from the model itself, so the likelihood is
    positive; draws with a slot longer than ``max_slot`` are rejected.
    """
    symbols = (",", ".", "(", ")")
    for _ in range(attempts):
        n = int(rng.integers(1, max_nodes + 1))
        s = int(rng.integers(1, max_alphabet + 1))
        alphabet = tuple(sorted(rng.choice(symbols, size=s, replace=False).tolist()))
        relations = ("root",) + RELATIONS[:2]
        tree = random_projective_tree(rng, n, relations=relations[1:])
        vocab = random_vocab(rng, alphabet, relations, max_pairs=max_pairs, max_len=1)
        d = direction or (L2R if rng.random() < 0.5 else "r2l")
        phi = ChannelParams.random(vocab.alphabet, rng, d)
        theta = AttachWeights(SeededWeights(int(rng.integers(1 << 30)), weight_scale))
        model = PunctuationModel(vocab, theta, phi)
        _, _, x = generate(tree, model, rng)
        if max(len(t) for t in x) <= max_slot:
            return AnnotatedSentence(tree, x), model
    raise RuntimeError("could not draw a small instance")


# ---------------------------------------------------------------------------
# Planted English-like grammar
# ---------------------------------------------------------------------------

PLANTED_ALPHABET = (",", ".", START_MARK)


def planted_tree(rng: np.random.Generator, sent_id: str = "", max_depth: int = 2) -> DepTree:
    """VERB root with a subject, an optional object, and noun phrases that may
    carry determiners, adjectives, nominal modifiers and appositives."""
    counter = itertools.count(1)

    def noun_phrase(rel: str, parent: int, depth: int) -> list:
        me = next(counter)
        words = []
        if rng.random() < 0.5:
            words.append(("DET", "det", next(counter), me))
        if rng.random() < 0.3:
            words.append(("ADJ", "amod", next(counter), me))
        words.append(("NOUN", rel, me, parent))
        if depth < max_depth and rng.random() < 0.2:
            words += noun_phrase("nmod", me, depth + 1)
        if depth < max_depth and rng.random() < 0.35:
            words += noun_phrase("appos", me, depth + 1)
        return words

    root = next(counter)
    seq = noun_phrase("nsubj", root, 0) + [("VERB", "root", root, 0)]
    if rng.random() < 0.6:
        seq += noun_phrase("obj", root, 0)
    position = {me: i for i, (_, _, me, _) in enumerate(seq, start=1)}
    position[0] = 0
    nodes = [DepNode(i, f"{pos.lower()}{i}", pos, position[parent], rel)
             for i, (pos, rel, _, parent) in enumerate(seq, start=1)]
    return DepTree(nodes, sent_id)


def planted_model(absorb: float = 0.95, appos_comma: float = 0.9,
                  direction: str = L2R) -> PunctuationModel:
    """Root attaches ``^ … .``; appositives are flanked by commas; the channel
    right-absorbs the window ``, .`` with probability ``absorb``."""
    relations = ("root", "nsubj", "obj", "det", "amod", "nmod", "appos")
    pairs = {d: [] for d in relations}
    pairs["root"] = [((START_MARK,), (".",))]
    pairs["appos"] = [((",",), (",",))]
    vocab = PunctemeVocab(frozenset({EPS, (",",), (".",), (START_MARK,)}), pairs)
    phi = ChannelParams.uniform(vocab.alphabet, direction)
    for a in vocab.alphabet:
        for b in vocab.alphabet:
            phi.set_rule(a, b, KEEP, 0.97)
    phi.set_rule(",", ",", LEFT_ABSORB, 0.9)
    phi.set_rule(",", ".", RIGHT_ABSORB, absorb)
    logit = float(np.log(appos_comma / (1.0 - appos_comma)))
    theta = AttachWeights({
        feature_name("N", (",",), (",",), "NOUN", "→appos"): logit,
        feature_name("N", (START_MARK,), (".",), "VERB", "root"): 12.0,
    })
    return PunctuationModel(vocab, theta, phi, {"planted": "english"})


def planted_corpus(model: PunctuationModel, count: int, rng: np.random.Generator,
                   prefix: str = "s") -> list:
    out = []
    for t in range(count):
        tree = planted_tree(rng, f"{prefix}{t}")
        _, _, x = generate(tree, model, rng)
        out.append(AnnotatedSentence(tree, x))
    return out


# ---------------------------------------------------------------------------
# Hand-written English rules
# ---------------------------------------------------------------------------

# (a, b) -> output, in reading order: point absorption, quote transposition,
# period absorption and bracket absorption
ENGLISH_RULES = (
    ((",", ","), (",",)), ((",", "."), (".",)), (("-", ","), ("-",)),
    (("-", ";"), (";",)), ((";", "."), (".",)),
    (("”", ","), (",", "”")), (("”", "."), (".", "”")),
    ((".", "?"), ("?",)), ((".", "!"), ("!",)), ((ABBREV_DOT, "."), (ABBREV_DOT,)),
    ((",", ")"), (")",)), (("-", ")"), (")",)), (("(", ","), ("(",)), (("“", ","), ("“",)),
)
ENGLISH_ALPHABET = tuple(sorted({t for (a, b), _ in ENGLISH_RULES for t in (a, b)}))


def english_channel(direction: str = R2L, alphabet: Sequence[str] = ENGLISH_ALPHABET
                    ) -> ChannelParams:
    """Deterministic channel: the rules above, and ``keep`` for every other window."""
    phi = ChannelParams.uniform(tuple(alphabet), direction)
    for a in phi.alphabet:
        for b in phi.alphabet:
            phi.set_rule(a, b, KEEP)
    for (a, b), out in ENGLISH_RULES:
        if a in phi.index and b in phi.index:
            phi.set_surface_rule(a, b, out)
    return phi


def king_sentence(direction: str = R2L) -> tuple:
    """The appositive/relative-clause example as ``(model, underlying tree)``.

    Hail the king [, Arthur Pendragon ,] [, who wields [“ Excalibur ”] ,] .
    """
    words = [("Hail", "VERB", 0, "root"), ("the", "DET", 3, "det"),
             ("king", "NOUN", 1, "obj"), ("Arthur", "PROPN", 5, "flat"),
             ("Pendragon", "PROPN", 3, "appos"), ("who", "PRON", 7, "nsubj"),
             ("wields", "VERB", 3, "acl:relcl"), ("Excalibur", "PROPN", 7, "obj")]
    tree = DepTree([DepNode(i, f, pos, h, rel) for i, (f, pos, h, rel) in enumerate(words, 1)],
                   "king")
    comma, quotes = ((",",), (",",)), (("“",), ("”",))
    pairs = {
        "root": [(EPS, (".",))],
        "appos": [comma, (EPS, (",",))],
        "acl:relcl": [comma, (EPS, (",",))],
        "obj": [quotes],
        "det": [], "flat": [], "nsubj": [],
    }
    vocab = PunctemeVocab(frozenset({EPS, (",",), (".",), ("“",), ("”",)}), pairs)
    alphabet = vocab.alphabet
    phi = english_channel(direction, alphabet)
    theta = AttachWeights({
        feature_name("S", "PROPN", "→appos"): 2.0,
        feature_name("S", "VERB", "→acl:relcl"): 2.0,
        feature_name("S", "PROPN", "→obj"): 2.0,
        feature_name("N", EPS, (".",), "VERB", "root"): 5.0,
    })
    model = PunctuationModel(vocab, theta, phi, {"example": "king"})
    underlying = PunctTree(tree, {1: (EPS, (".",)), 2: (EPS, EPS), 3: (EPS, EPS), 4: (EPS, EPS),
                                  5: comma, 6: (EPS, EPS), 7: comma, 8: quotes})
    return model, underlying
