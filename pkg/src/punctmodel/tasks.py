"""Downstream uses of a trained model and their metrics.

Restoration and correction decode by minimum Bayes risk over sampled surface
strings; rephrasing recovers the underlying punctuation, permutes the tree and
regenerates the surface.  Metrics: per-slot perplexity, average edit distance,
F0.5 over slot edits and an add-λ trigram language model.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .channel import R2L, edit_distribution, simulate
from .corpus import (EPS, START_MARK, UNK, AnnotatedSentence, DepNode, DepTree, RawSentence,
                     Token, format_puncteme)
from .forest import (PunctTree, Unexplainable, generate, inside_plan, plan_sentence,
                     underlying_slots, viterbi_underlying)
from .model import PunctuationModel
from .train import TrainConfig, TrainResult, sentence_rng, train

log = logging.getLogger(__name__)

PERMUTABLE_POS = ("NOUN", "VERB")


# ---------------------------------------------------------------------------
# Perplexity
# ---------------------------------------------------------------------------

@dataclass
class PerplexityReport:
    perplexity: float
    log_likelihood: float
    slots: int
    sentences: int
    excluded: list = field(default_factory=list)  # ids of zero-likelihood sentences


def perplexity(treebank: Iterable[AnnotatedSentence], model: PunctuationModel) -> PerplexityReport:
    """Per-slot perplexity exp(−Σ log p(x|T) / Σ (n + 1)).

    Sentences the model cannot explain are left out and listed; if none
    remain the perplexity is NaN.
    """
    total, slots, used, excluded = 0.0, 0, 0, []
    for s in treebank:
        plan = plan_sentence(s, model.vocab, model.phi.direction)
        res = inside_plan(plan, model.theta, model.phi)
        if not res.explainable:
            excluded.append(s.sent_id)
            continue
        total += res.log_likelihood
        slots += s.n + 1
        used += 1
    if excluded:
        log.warning("%d sentences have zero likelihood and were excluded", len(excluded))
    ppl = math.exp(-total / slots) if slots else math.nan
    return PerplexityReport(ppl, total, slots, used, excluded)


# ---------------------------------------------------------------------------
# Edit distance, AED, trivial baseline
# ---------------------------------------------------------------------------

def token_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance over tokens with unit costs."""
    prev = list(range(len(b) + 1))
    for i, ta in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ta != tb))
        prev = cur
    return prev[-1]


def slot_distance(x: Sequence[tuple], y: Sequence[tuple]) -> int:
    """Total token edit distance summed over aligned slots."""
    if len(x) != len(y):
        raise ValueError(f"slot count mismatch: {len(x)} vs {len(y)}")
    return sum(token_edit_distance(a, b) for a, b in zip(x, y))


def aed(predicted: Sequence[Sequence[tuple]], gold: Sequence[Sequence[tuple]]) -> float:
    """Average edit distance per slot over a corpus of slot sequences."""
    if len(predicted) != len(gold):
        raise ValueError(f"sentence count mismatch: {len(predicted)} vs {len(gold)}")
    edits = sum(slot_distance(p, g) for p, g in zip(predicted, gold))
    slots = sum(len(g) for g in gold)
    if slots == 0:
        raise ValueError("no slots to score")
    return edits / slots


def trivial_baseline(tree: DepTree, final_mark: str = ".", start_mark: str | None = None) -> list:
    """A final mark after the last word and nothing else (plus the start mark
    if the data carries one)."""
    slots = [EPS] * tree.n + [(final_mark,)]
    if start_mark:
        slots[0] = (start_mark,)
    return slots


# ---------------------------------------------------------------------------
# Minimum Bayes risk decoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MbrConfig:
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("MBR needs at least one sample")


@dataclass
class MbrResult:
    slots: list
    risk: float
    support: dict  # unique sample -> empirical probability, in first-seen order


def mbr_select(samples: Sequence[Sequence[tuple]]) -> MbrResult:
    """The sampled value with least expected slot edit distance to the sample.

    Ties go to the value seen first.  Runs in O(|S|²) distance evaluations
    over the distinct values S.
    """
    if not samples:
        raise ValueError("no samples")
    counts = Counter(tuple(tuple(s) for s in x) for x in samples)
    total = len(samples)
    support = {x: c / total for x, c in counts.items()}
    uniq = list(support)
    best, best_risk = None, math.inf
    for x in uniq:
        risk = sum(p * slot_distance(x, y) for y, p in support.items())
        if risk < best_risk - 1e-12:
            best, best_risk = x, risk
    return MbrResult(list(best), best_risk, support)


def sample_surfaces(tree: DepTree, model: PunctuationModel, count: int,
                    rng: np.random.Generator, original: Mapping[int, tuple] | None = None) -> list:
    """``count`` ancestral draws of the surface slots given the tree alone."""
    cache: dict = {}
    return [generate(tree, model, rng, cache, original=original)[2] for _ in range(count)]


def restore(tree: DepTree, model: PunctuationModel, mbr: MbrConfig = MbrConfig()) -> list:
    """Punctuate an unpunctuated tree by MBR over ``mbr.samples`` generated outputs.

    With no observed punctuation the posterior over ``(T′, x)`` is the
    generative distribution itself, so the samples are ancestral draws.
    """
    rng = sentence_rng(mbr.seed, tree.sent_id)
    return mbr_select(sample_surfaces(tree, model, mbr.samples, rng)).slots


# ---------------------------------------------------------------------------
# Correction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EditSet:
    """Slot-level edits ``(slot, before, after)``; at most one per slot."""

    records: frozenset = frozenset()

    def __post_init__(self):
        slots = [r[0] for r in self.records]
        if len(slots) != len(set(slots)):
            raise ValueError("more than one edit for a slot")

    @classmethod
    def between(cls, source: Sequence[tuple], target: Sequence[tuple]) -> "EditSet":
        if len(source) != len(target):
            raise ValueError(f"slot count mismatch: {len(source)} vs {len(target)}")
        return cls(frozenset((i, tuple(a), tuple(b))
                             for i, (a, b) in enumerate(zip(source, target)) if tuple(a) != tuple(b)))

    def __len__(self) -> int:
        return len(self.records)

    def __and__(self, other: "EditSet") -> frozenset:
        return self.records & other.records


def f_beta_counts(correct: int, proposed: int, gold: int, beta: float = 0.5) -> float:
    """F-measure from counts; precision is 1 with no proposals and recall is 1
    with no gold edits, so two empty sets score 1."""
    p = correct / proposed if proposed else 1.0
    r = correct / gold if gold else 1.0
    if p == 0.0 and r == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


def f_half(system: EditSet, gold: EditSet) -> float:
    return f_beta_counts(len(system & gold), len(system), len(gold))


def corpus_f_half(inputs: Sequence[Sequence[tuple]], outputs: Sequence[Sequence[tuple]],
                  golds: Sequence[Sequence[tuple]]) -> float:
    """F0.5 with edit counts pooled over sentences."""
    correct = proposed = wanted = 0
    for x, y, g in zip(inputs, outputs, golds, strict=True):
        sys_e, gold_e = EditSet.between(x, y), EditSet.between(x, g)
        correct += len(sys_e & gold_e)
        proposed += len(sys_e)
        wanted += len(gold_e)
    return f_beta_counts(correct, proposed, wanted)


@dataclass
class CorrectionResult:
    slots: list
    fallback: bool                    # input unexplainable; restored from the tree alone
    recovered: PunctTree | None = None


def correct(sentence: AnnotatedSentence, esl_model: PunctuationModel,
            correction_model: PunctuationModel, mbr: MbrConfig = MbrConfig()) -> CorrectionResult:
    """Correct the punctuation of ``sentence``.

    The errorful underlying tree comes from Viterbi under ``esl_model``; its
    punctemes condition the correction features of ``correction_model``,
    whose channel regenerates the surface; MBR picks the output.
    """
    rng = sentence_rng(mbr.seed, sentence.sent_id)
    try:
        pt, _ = viterbi_underlying(sentence, esl_model)
    except Unexplainable:
        log.warning("sentence %s unexplainable under the learner model; restoring instead",
                    sentence.sent_id)
        draws = sample_surfaces(sentence.tree, correction_model, mbr.samples, rng)
        return CorrectionResult(mbr_select(draws).slots, True)
    draws = sample_surfaces(sentence.tree, correction_model, mbr.samples, rng,
                            original=pt.punctemes)
    return CorrectionResult(mbr_select(draws).slots, False, pt)


def same_shape(a: DepTree, b: DepTree) -> bool:
    return a.n == b.n and all(x.head == y.head for x, y in zip(a.nodes, b.nodes))


def train_correction(pairs: Sequence[tuple], esl_model: PunctuationModel,
                     cesl_model: PunctuationModel, config: TrainConfig | None = None,
                     anchor_strength: float = 1.0, dev: Sequence[tuple] = (),
                     progress=None) -> TrainResult:
    """Fit the correction model on ``(errorful, corrected)`` sentence pairs.

    Only pairs with identical unpunctuated tree shape are used.  The channel
    starts from, and is pulled toward, the channel of ``cesl_model``.
    """
    config = config or TrainConfig()

    def prepare(rows):
        out, originals = [], {}
        for esl, cesl in rows:
            if not same_shape(esl.tree, cesl.tree):
                continue
            try:
                pt, _ = viterbi_underlying(esl, esl_model)
            except Unexplainable:
                continue
            out.append(cesl)
            originals[cesl.sent_id] = pt.punctemes
        return out, originals

    train_set, originals = prepare(pairs)
    dev_set, dev_originals = prepare(dev)
    log.info("correction training on %d of %d pairs", len(train_set), len(pairs))
    config = replace(config, direction=cesl_model.phi.direction, anchor=cesl_model.phi,
                     anchor_strength=anchor_strength)
    return train(train_set, config, dev=dev_set, vocab=cesl_model.vocab, init=cesl_model,
                 progress=progress, originals={**originals, **dev_originals})


# ---------------------------------------------------------------------------
# Tree permutation and rephrasing
# ---------------------------------------------------------------------------

OrderFn = Callable[[DepTree, int], Sequence[int] | None]


def identity_order(tree: DepTree, head: int) -> None:
    return None


class ShufflePermutation:
    """Shuffle each NOUN or VERB head together with its dependents."""

    def __init__(self, rng: np.random.Generator, pos: Sequence[str] = PERMUTABLE_POS):
        self.rng = rng
        self.pos = tuple(pos)

    def __call__(self, tree: DepTree, head: int) -> list | None:
        nd = tree.node(head)
        if nd.pos not in self.pos or not nd.kids:
            return None
        items = list(nd.left_kids) + [head] + list(nd.right_kids)
        return [items[t] for t in self.rng.permutation(len(items))]


class FilePermutation:
    """Orderings read from text lines ``sent_id<TAB>head<TAB>i j k ...``.

    Each listed ordering names the head and all its dependents by their
    1-based word index; heads not listed keep their order.
    """

    def __init__(self, orders: Mapping[tuple, tuple]):
        self.orders = dict(orders)

    @classmethod
    def parse(cls, text: str) -> "FilePermutation":
        orders = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                sid, head, seq = line.split("\t")
                orders[(sid, int(head))] = tuple(int(t) for t in seq.split())
            except ValueError:
                raise ValueError(f"line {lineno}: expected sent_id, head and ordering") from None
        return cls(orders)

    def __call__(self, tree: DepTree, head: int) -> tuple | None:
        return self.orders.get((tree.sent_id, head))


def linearize(tree: DepTree, order: OrderFn) -> list:
    """Word indices in the order produced by applying ``order`` at every head."""
    out: list = []

    def walk(h: int):
        nd = tree.node(h)
        seq = order(tree, h)
        natural = list(nd.left_kids) + [h] + list(nd.right_kids)
        if seq is None:
            seq = natural
        elif sorted(seq) != sorted(natural):
            raise ValueError(f"ordering for head {h} is not a permutation of {natural}")
        for t in seq:
            if t == h:
                out.append(h)
            else:
                walk(t)

    walk(tree.root)
    return out


def permute_tree(tree: DepTree, sequence: Sequence[int]) -> tuple:
    """Rebuild ``tree`` with words in ``sequence`` order; returns ``(tree, old→new)``."""
    new = {old: i for i, old in enumerate(sequence, start=1)}
    new[0] = 0
    nodes = []
    for old in sequence:
        nd = tree.node(old)
        nodes.append(DepNode(new[old], nd.form, nd.pos, new[nd.head], nd.deprel,
                             xpos=nd.xpos, lemma=nd.lemma, feats=nd.feats))
    return DepTree(nodes, tree.sent_id), new


@dataclass
class RephraseResult:
    sentence: AnnotatedSentence
    underlying: PunctTree | None
    flagged: bool = False  # unexplainable input passed through unchanged


def rephrase(sentence: AnnotatedSentence, model: PunctuationModel, order: OrderFn,
             rng: np.random.Generator | None = None, argmax: bool = False) -> RephraseResult:
    """Permute the recovered underlying tree and regenerate its surface punctuation.

    Each node keeps its punctemes, so punctuation moves with its subtree.
    """
    try:
        pt, _ = viterbi_underlying(sentence, model)
    except Unexplainable:
        log.warning("sentence %s unexplainable; passed through", sentence.sent_id)
        return RephraseResult(sentence, None, True)
    seq = linearize(sentence.tree, order)
    new_tree, mapping = permute_tree(sentence.tree, seq)
    moved = PunctTree(new_tree, {mapping[w]: lr for w, lr in pt.punctemes.items()})
    if rng is None and not argmax:
        raise ValueError("sampling the channel needs an rng; pass argmax=True for greedy edits")
    x = [simulate(u, model.phi, rng, argmax=argmax) for u in underlying_slots(moved)]
    return RephraseResult(AnnotatedSentence(new_tree, x), moved)


def _punctuated_tree(sentence: AnnotatedSentence, drop: Sequence[str] = (START_MARK,)) -> tuple:
    """The tree with surface punctuation re-attached as PUNCT leaves.

    Returns ``(tree, word_of)`` where ``word_of`` maps each token index to
    the original word index, or 0 for punctuation.
    """
    raw = to_raw_sentence(sentence, drop=drop)
    nodes, word_of, w = [], {}, 0
    for t in raw.tokens:
        nodes.append(DepNode(t.id, t.form, t.upos, t.head, t.deprel))
        if t.upos == "PUNCT":
            word_of[t.id] = 0
        else:
            w += 1
            word_of[t.id] = w
    return DepTree(nodes, sentence.sent_id), word_of


def rephrase_base(sentence: AnnotatedSentence, order: OrderFn) -> DepTree:
    """Permute surface punctuation as if it were ordinary dependents.

    Returns the permuted tree in which punctuation tokens are PUNCT leaves.
    """
    tree, _ = _punctuated_tree(sentence)
    return permute_tree(tree, linearize(tree, order))[0]


def rephrase_half(sentence: AnnotatedSentence, model: PunctuationModel, order: OrderFn,
                  rng: np.random.Generator | None = None, argmax: bool = False) -> RephraseResult:
    """Words ordered exactly as :func:`rephrase_base` orders them; punctuation
    regenerated from the underlying tree as in :func:`rephrase`."""
    tree_p, word_of = _punctuated_tree(sentence)
    words = [word_of[t] for t in linearize(tree_p, order) if word_of[t]]
    position = {w: i for i, w in enumerate(words)}

    def induced(tree: DepTree, h: int) -> list:
        def key(t):
            if t == h:
                return position[h]
            i, k = tree.node(t).span
            return min(position[w] for w in range(i + 1, k + 1))
        nd = tree.node(h)
        return sorted(list(nd.kids) + [h], key=key)

    return rephrase(sentence, model, induced, rng, argmax)


def surface_tokens(sentence: AnnotatedSentence, drop: Sequence[str] = (START_MARK,)) -> list:
    """Words interleaved with their surface punctuation."""
    out: list = []
    for s, slot in enumerate(sentence.slots):
        out.extend(t for t in slot if t not in drop)
        if s < sentence.n:
            out.append(sentence.tree.nodes[s].form)
    return out


def rephrase_corpus(sentences: Sequence[AnnotatedSentence], method: str,
                    model: PunctuationModel | None = None, seed: int = 0,
                    argmax: bool = False) -> list:
    """Token sequences for ``method`` in ``base``, ``half`` or ``full``.

    All three draw the permutation from the same per-sentence stream, so
    ``base`` and ``half`` order the words identically.
    """
    out = []
    for s in sentences:
        perm_rng = sentence_rng(seed, s.sent_id)
        chan_rng = sentence_rng(seed + 1, s.sent_id)
        shuffle = ShufflePermutation(perm_rng)
        if method == "base":
            out.append([nd.form for nd in rephrase_base(s, shuffle).nodes])
        elif method == "half":
            out.append(surface_tokens(rephrase_half(s, model, shuffle, chan_rng, argmax).sentence))
        elif method == "full":
            out.append(surface_tokens(rephrase(s, model, shuffle, chan_rng, argmax).sentence))
        else:
            raise ValueError(f"unknown rephrasing method {method!r}")
    return out


# ---------------------------------------------------------------------------
# Trigram language model
# ---------------------------------------------------------------------------

BOS, EOS = "<s>", "</s>"


@dataclass
class TrigramLM:
    """Add-λ smoothed word trigram model."""

    counts: Counter
    contexts: Counter
    vocab: frozenset
    lam: float = 0.001

    @classmethod
    def fit(cls, corpus: Iterable[Sequence[str]], lam: float = 0.001) -> "TrigramLM":
        counts, contexts, types = Counter(), Counter(), set()
        for sent in corpus:
            types.update(sent)
            padded = [BOS, BOS] + list(sent) + [EOS]
            for t in range(2, len(padded)):
                counts[tuple(padded[t - 2:t + 1])] += 1
                contexts[tuple(padded[t - 2:t])] += 1
        return cls(counts, contexts, frozenset(types | {EOS, UNK}), lam)

    def logprob(self, u: str, v: str, w: str) -> float:
        num = self.counts.get((u, v, w), 0) + self.lam
        den = self.contexts.get((u, v), 0) + self.lam * len(self.vocab)
        return math.log(num / den)

    def score(self, sent: Sequence[str]) -> tuple:
        """(log-probability, predicted token count) with OOV words mapped to UNK."""
        toks = [t if t in self.vocab else UNK for t in sent]
        padded = [BOS, BOS] + toks + [EOS]
        lp = sum(self.logprob(*padded[t - 2:t + 1]) for t in range(2, len(padded)))
        return lp, len(padded) - 2


def trigram_ppl(train_corpus: Iterable[Sequence[str]], eval_corpus: Iterable[Sequence[str]],
                lam: float = 0.001) -> float:
    """Per-token perplexity (end-of-sentence included) of the eval corpus."""
    lm = TrigramLM.fit(train_corpus, lam)
    total, tokens = 0.0, 0
    for sent in eval_corpus:
        lp, k = lm.score(sent)
        total += lp
        tokens += k
    if tokens == 0:
        raise ValueError("empty evaluation corpus")
    return math.exp(-total / tokens)


# ---------------------------------------------------------------------------
# CoNLL-U output with punctuation re-inserted
# ---------------------------------------------------------------------------

def _subtree_ok(order: list, heads: Mapping[object, object]) -> bool:
    """True if every subtree occupies a contiguous run of ``order``."""
    pos = {t: i for i, t in enumerate(order)}
    lo = dict(pos)
    hi = dict(pos)
    size = {t: 1 for t in order}
    for t in order:
        a = heads[t]
        seen = set()
        while a != 0:
            if a in seen:
                return False
            seen.add(a)
            lo[a] = min(lo[a], pos[t])
            hi[a] = max(hi[a], pos[t])
            size[a] += 1
            a = heads[a]
    return all(hi[t] - lo[t] + 1 == size[t] for t in order)


def punct_heads(tree: DepTree, slots: Sequence[tuple]) -> list:
    """Head word for every punctuation token, slot by slot.

    Each token attaches to the shallowest word that keeps every subtree
    contiguous (ties broken by distance, then left first).
    """
    heads: dict = {nd.index: nd.head for nd in tree.nodes}
    depth = {}
    for w in reversed(tree.postorder):
        h = tree.node(w).head
        depth[w] = 0 if h == 0 else depth[h] + 1
    order: list = []
    for s in range(tree.n + 1):
        order.extend(("p", s, t) for t in range(len(slots[s])))
        if s < tree.n:
            order.append(s + 1)
    out = []
    for s in range(tree.n + 1):
        row = []
        for t in range(len(slots[s])):
            key = ("p", s, t)
            heads[key] = tree.root
            placed = [o for o in order if o in heads]
            cands = sorted(depth, key=lambda w: (depth[w], abs(w - (s + 0.5)), w))
            for w in cands:
                heads[key] = w
                if _subtree_ok(placed, heads):
                    break
            else:  # unreachable for a projective word tree
                heads[key] = tree.root
            row.append(heads[key])
        out.append(row)
    return out


def tree_to_raw(tree: DepTree) -> RawSentence:
    """A tree as CoNLL-U tokens, one per node."""
    tokens = [Token(nd.index, nd.form, nd.lemma, nd.pos, nd.xpos, nd.feats, nd.head, nd.deprel)
              for nd in tree.nodes]
    comments = [f"# sent_id = {tree.sent_id}"] if tree.sent_id else []
    return RawSentence(tokens, comments, tree.sent_id)


def to_raw_sentence(sentence: AnnotatedSentence, drop: Sequence[str] = (START_MARK,),
                    misc: Mapping[int, str] | None = None) -> RawSentence:
    """Words plus surface punctuation as PUNCT leaf tokens, renumbered."""
    tree = sentence.tree
    slots = [tuple(t for t in s if t not in drop) for s in sentence.slots]
    heads = punct_heads(tree, slots)
    tokens, new_id = [], {0: 0}
    for s in range(tree.n + 1):
        for t, form in enumerate(slots[s]):
            tok = Token(0, form, form, "PUNCT", "_", "_", heads[s][t], "punct")
            tokens.append(tok)
        if s < tree.n:
            nd = tree.nodes[s]
            tok = Token(0, nd.form, nd.lemma, nd.pos, nd.xpos, nd.feats, nd.head, nd.deprel,
                        misc=(misc or {}).get(nd.index, "_"))
            tokens.append(tok)
            new_id[nd.index] = len(tokens)
    for i, tok in enumerate(tokens, start=1):
        tok.id = i
    for tok in tokens:
        tok.head = new_id[tok.head]
    comments = [f"# sent_id = {tree.sent_id}"] if tree.sent_id else []
    return RawSentence(tokens, comments, tree.sent_id)


def underlying_misc(pt: PunctTree) -> dict:
    """``LPunct``/``RPunct`` MISC values per word (tokens space separated)."""
    return {w: f"LPunct={format_puncteme(l)}|RPunct={format_puncteme(r)}"
            for w, (l, r) in pt.punctemes.items()}


# ---------------------------------------------------------------------------
# Channel inspection
# ---------------------------------------------------------------------------

@dataclass
class ChannelRow:
    a: str
    b: str
    probs: np.ndarray
    count: int


def underlying_bigrams(u: Sequence[tuple], direction: str) -> Counter:
    """Adjacent token pairs in the channel's reading order, per slot."""
    c: Counter = Counter()
    for slot in u:
        seq = slot[::-1] if direction == R2L else slot
        c.update(zip(seq, seq[1:]))
    return c


def channel_report(model: PunctuationModel,
                   treebank: Iterable[AnnotatedSentence] = ()) -> list:
    """Edit probabilities per window, with counts from 1-best underlying trees,
    most frequent first."""
    counts: Counter = Counter()
    for s in treebank:
        try:
            pt, _ = viterbi_underlying(s, model)
        except Unexplainable:
            continue
        counts.update(underlying_bigrams(underlying_slots(pt), model.phi.direction))
    alpha = model.phi.alphabet
    rows = [ChannelRow(a, b, edit_distribution(a, b, model.phi), counts.get((a, b), 0))
            for a in alpha for b in alpha]
    rows.sort(key=lambda r: (-r.count, r.a, r.b))
    return rows


__all__ = [
    "ChannelRow", "CorrectionResult", "EditSet", "FilePermutation", "MbrConfig", "MbrResult",
    "PerplexityReport", "RephraseResult", "ShufflePermutation", "TrigramLM", "aed",
    "channel_report", "corpus_f_half", "correct", "f_beta_counts", "f_half", "identity_order",
    "linearize", "mbr_select", "permute_tree", "perplexity", "punct_heads", "rephrase",
    "rephrase_base", "rephrase_corpus", "rephrase_half", "restore", "sample_surfaces",
    "slot_distance", "surface_tokens", "to_raw_sentence", "token_edit_distance",
    "train_correction", "tree_to_raw", "trigram_ppl", "trivial_baseline", "underlying_misc",
]
