"""Exact inference over a dependency tree with latent underlying punctuation.

The recursion visits nodes bottom-up.  For node ``w`` spanning slots
``(i, k)`` with head slot ``j`` it forms

    a = IN(c_1)( ... IN(c_m) ρ_{j-1})        left children, innermost last
    b = λ_jᵀ IN(c'_1) ... IN(c'_m')           right children
    IN(w) = Σ_{(l, r)} p(l, r | w) · M_i(l) a bᵀ M_k(r)

kept in factored form (see :mod:`punctmodel.semiring`).  The sentence weight
is ``λ_0ᵀ IN(root) ρ_n``.  Pairs whose puncteme cannot be read at its slot
are dropped from the sum, but their probability mass still counts in the
normalizer of p(l, r | w).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import torch

from .attach import AttachWeights, count_unmatched, features_for, node_context
from .channel import ChannelParams, WfsaStructure, simulate, wfsa_structure
from .corpus import EPS, AnnotatedSentence, DepTree, PunctemeVocab
from .semiring import (DTYPE, ExpectationOps, Leaf, MaxOps, RealOps, SampleOps,
                       flatten)


class Unexplainable(ValueError):
    """The sentence has zero probability under the model."""


# ---------------------------------------------------------------------------
# Punctuated trees
# ---------------------------------------------------------------------------

@dataclass
class PunctTree:
    """A tree with one (left, right) puncteme pair per node."""

    tree: DepTree
    punctemes: dict  # node index -> (l, r)

    def underlying_slots(self) -> list:
        return underlying_slots(self)

    def bracketed(self) -> str:
        """Render as ``[“ [Dale] ” means ...]`` style bracketed text."""
        opens: dict = {}
        closes: dict = {}
        for nd in self.tree.nodes:
            i, k = nd.span
            opens.setdefault(i, []).append(nd)
            closes.setdefault(k, []).append(nd)
        out = []
        for s in range(self.tree.n + 1):
            for nd in sorted(closes.get(s, []), key=lambda x: x.span[1] - x.span[0]):
                r = self.punctemes[nd.index][1]
                out.append(" ".join(r) + "]" if r else "]")
            for nd in sorted(opens.get(s, []), key=lambda x: x.span[0] - x.span[1]):
                l = self.punctemes[nd.index][0]
                out.append("[" + " ".join(l) if l else "[")
            if s < self.tree.n:
                out.append(self.tree.nodes[s].form)
        return " ".join(out)


def underlying_slots(pt: PunctTree) -> list:
    """Underlying slot strings ``u``: at each slot, right punctemes of the
    constituents ending there (innermost first), then left punctemes of the
    constituents starting there (outermost first)."""
    tree = pt.tree
    ends: dict = {}
    starts: dict = {}
    for nd in tree.nodes:
        i, k = nd.span
        starts.setdefault(i, []).append(nd)
        ends.setdefault(k, []).append(nd)
    u = []
    for s in range(tree.n + 1):
        toks: list = []
        for nd in sorted(ends.get(s, []), key=lambda x: x.span[1] - x.span[0]):
            toks.extend(pt.punctemes[nd.index][1])
        for nd in sorted(starts.get(s, []), key=lambda x: x.span[0] - x.span[1]):
            toks.extend(pt.punctemes[nd.index][0])
        u.append(tuple(toks))
    return u


# ---------------------------------------------------------------------------
# Sentence plans: everything that depends on (T, x, vocabulary) but not on θ, φ
# ---------------------------------------------------------------------------

@dataclass
class NodePlan:
    index: int
    span: tuple
    head_slot: int
    left_kids: tuple
    right_kids: tuple
    pairs: list                 # full inventory W_d, in normalizer order
    feats: list                 # feature names per pair
    costs: np.ndarray           # unmatched indicator per pair
    lefts: list                 # distinct live left punctemes
    rights: list                # distinct live right punctemes
    live: list                  # (pair index, left position, right position)


@dataclass
class SentencePlan:
    sentence: AnnotatedSentence
    direction: str
    alphabet: tuple
    structures: list
    nodes: dict
    order: tuple
    feature_ids: dict = field(default_factory=dict)  # filled lazily by training

    @property
    def tree(self) -> DepTree:
        return self.sentence.tree

    @property
    def possible(self) -> bool:
        return all(nd.live for nd in self.nodes.values())


def plan_sentence(sentence: AnnotatedSentence, vocab: PunctemeVocab, direction: str,
                  original: Mapping[int, tuple] | None = None,
                  pairs_for=None) -> SentencePlan:
    """Precompute slot automata topologies, pair inventories and features.

    ``original`` maps node index to a recovered ``(l', r')`` and switches on
    the correction templates.  ``pairs_for`` overrides the pair inventory
    lookup (used by the correction model).
    """
    alphabet = vocab.alphabet
    tok_index = {a: i for i, a in enumerate(alphabet)}
    tree = sentence.tree
    structures = [wfsa_structure(alphabet, tuple(x), direction) for x in sentence.slots]
    readable: dict = {}

    def can_read(slot: int, p: tuple) -> bool:
        key = (slot, p)
        if key not in readable:
            readable[key] = structures[slot].reachable([tok_index[t] for t in p])
        return readable[key]

    nodes = {}
    for nd in tree.nodes:
        i, k = nd.span
        pairs = list(pairs_for(nd.deprel) if pairs_for else vocab.pairs_for(nd.deprel))
        ctx = node_context(tree, nd.index, sentence.slots, original)
        feats = [features_for(l, r, ctx) for l, r in pairs]
        costs = np.array([count_unmatched(l, r) for l, r in pairs], dtype=np.float64)
        lefts, rights, live = [], [], []
        lpos, rpos = {}, {}
        for pi, (l, r) in enumerate(pairs):
            if not (can_read(i, l) and can_read(k, r)):
                continue
            if l not in lpos:
                lpos[l] = len(lefts)
                lefts.append(l)
            if r not in rpos:
                rpos[r] = len(rights)
                rights.append(r)
            live.append((pi, lpos[l], rpos[r]))
        nodes[nd.index] = NodePlan(nd.index, nd.span, nd.head_slot, nd.left_kids, nd.right_kids,
                                   pairs, feats, costs, lefts, rights, live)
    return SentencePlan(sentence, direction, alphabet, structures, nodes, tree.postorder)


# ---------------------------------------------------------------------------
# Numeric ingredients
# ---------------------------------------------------------------------------

def slot_tensors(structures: Sequence[WfsaStructure], flat: torch.Tensor) -> list:
    """Token matrices per slot from flattened edit probabilities (with trailing 1)."""
    out = []
    for st in structures:
        m = torch.zeros((st.n_tokens, st.n_states, st.n_states), dtype=DTYPE)
        if len(st.tok):
            m = m.index_put((torch.as_tensor(st.tok), torch.as_tensor(st.src),
                             torch.as_tensor(st.dst)), flat[torch.as_tensor(st.param)],
                            accumulate=True)
        out.append(m)
    return out


def slot_arrays(structures: Sequence[WfsaStructure], flat: np.ndarray) -> list:
    out = []
    for st in structures:
        m = np.zeros((st.n_tokens, st.n_states, st.n_states))
        np.add.at(m, (st.tok, st.src, st.dst), flat[st.param])
        out.append(m)
    return out


def flat_edit_probs(phi: ChannelParams) -> np.ndarray:
    return np.append(phi.probs().reshape(-1), 1.0)


def pair_logprobs(plan: SentencePlan, theta: AttachWeights) -> dict:
    """log p(l, r | w) over each node's full inventory, from a weight dict."""
    out = {}
    for w, nd in plan.nodes.items():
        s = np.array([theta.score(f) for f in nd.feats])
        out[w] = s - (s.max() + np.log(np.exp(s - s.max()).sum()))
    return out


class _Chain:
    """Puncteme matrices per (slot, puncteme), built lazily."""

    def __init__(self, plan: SentencePlan, mats: list, backend: str):
        self.mats = mats
        self.backend = backend
        self.index = {a: i for i, a in enumerate(plan.alphabet)}
        self.cache: dict = {}

    def __call__(self, slot: int, p: tuple):
        key = (slot, p)
        if key not in self.cache:
            m = self.mats[slot]
            out = m[self.index[p[0]]]
            for t in p[1:]:
                out = out @ m[self.index[t]]
            self.cache[key] = out
        return self.cache[key]


def _run(plan: SentencePlan, ops, mats: list, logp: Mapping[int, object]):
    """Generic inside pass; returns ``(value, log scale)``."""
    chain = _Chain(plan, mats, ops.backend)
    structures = plan.structures
    torch_backend = ops.backend == "torch"
    IN = {}
    logscale = 0.0
    for w in plan.order:
        nd = plan.nodes[w]
        i, k = nd.span
        j = nd.head_slot
        a = ops.lift(structures[j - 1].final)
        for c in reversed(nd.left_kids):
            a, s = ops.rescale(ops.fmatvec(IN.pop(c), a))
            logscale = logscale + s
        b = ops.lift(structures[j].start)
        for c in nd.right_kids:
            b, s = ops.rescale(ops.fvecmat(b, IN.pop(c)))
            logscale = logscale + s
        A = ops.stack([ops.matvec(chain(i, l), a) if l else a for l in nd.lefts])
        B = ops.stack([ops.vecmat(b, chain(k, r)) if r else b for r in nd.rights])
        shape = (len(nd.lefts), len(nd.rights))
        pidx = [p for p, _, _ in nd.live]
        li = [x for _, x, _ in nd.live]
        ri = [x for _, _, x in nd.live]
        lp_w = logp[w]
        if torch_backend:
            lp = torch.full(shape, -math.inf, dtype=DTYPE)
            lp = lp.index_put((torch.as_tensor(li), torch.as_tensor(ri)), lp_w[torch.as_tensor(pidx)])
        else:
            lp = np.full(shape, -np.inf)
            lp[li, ri] = np.asarray(lp_w)[pidx]
        cost = np.zeros(shape)
        cost[li, ri] = nd.costs[pidx]
        leaves = None
        if not torch_backend:
            leaves = [[Leaf(w, l, r) for r in nd.rights] for l in nd.lefts]
        IN[w] = ops.factor(A, B, lp, cost, leaves)
    root = plan.tree.root
    v = ops.fmatvec(IN[root], ops.lift(structures[-1].final))
    return ops.dot(ops.lift(structures[0].start), v), logscale


# ---------------------------------------------------------------------------
# Public inference
# ---------------------------------------------------------------------------

@dataclass
class InsideResult:
    likelihood: float
    log_likelihood: float
    expected_unmatched: float
    mantissa: float = 0.0
    exponent: int = 0

    @property
    def explainable(self) -> bool:
        return self.log_likelihood > -math.inf


def inside_tensors(plan: SentencePlan, flat: torch.Tensor, logp: Mapping[int, torch.Tensor],
                   expectation: bool = True) -> tuple:
    """Differentiable ``(log p(x|T), E[c(T')])``; ``(-inf, nan)`` when impossible."""
    if not plan.possible:
        return torch.tensor(-math.inf, dtype=DTYPE), torch.tensor(math.nan, dtype=DTYPE)
    mats = slot_tensors(plan.structures, flat)
    if expectation:
        (p, r), scale = _run(plan, ExpectationOps(), mats, logp)
        return torch.log(p) + scale, r / p
    p, scale = _run(plan, RealOps(), mats, logp)
    return torch.log(p) + scale, torch.tensor(math.nan, dtype=DTYPE)


def prior_unmatched(plan: SentencePlan, logp: Mapping[int, object]) -> object:
    """Prior-weighted unmatched count: Σ_w Σ_(l,r) p(l, r | w)·c(l, r)."""
    total = 0.0
    for w, nd in plan.nodes.items():
        p = logp[w]
        if isinstance(p, torch.Tensor):
            total = total + (torch.exp(p) * torch.as_tensor(nd.costs)).sum()
        else:
            total = total + float((np.exp(p) * nd.costs).sum())
    return total


def inside_plan(plan: SentencePlan, theta: AttachWeights, phi: ChannelParams) -> InsideResult:
    with torch.no_grad():
        flat = torch.as_tensor(flat_edit_probs(phi))
        logp = {w: torch.as_tensor(v) for w, v in pair_logprobs(plan, theta).items()}
        ll, ec = inside_tensors(plan, flat, logp, expectation=True)
    ll = float(ll)
    if ll == -math.inf or math.isnan(ll):
        return InsideResult(0.0, -math.inf, math.nan)
    e10 = ll / math.log(10.0)
    exponent = math.floor(e10)
    return InsideResult(math.exp(ll), ll, float(ec), 10.0 ** (e10 - exponent), exponent)


def inside(sentence: AnnotatedSentence, model) -> InsideResult:
    """Likelihood p(x | T) and the posterior expected unmatched count."""
    plan = plan_sentence(sentence, model.vocab, model.phi.direction)
    return inside_plan(plan, model.theta, model.phi)


def _derivation_tree(tree: DepTree, d) -> PunctTree:
    assignment = {leaf.node: (leaf.left, leaf.right) for leaf in flatten(d)}
    if set(assignment) != {nd.index for nd in tree.nodes}:
        raise RuntimeError("derivation does not cover every node")
    return PunctTree(tree, assignment)


def viterbi_plan(plan: SentencePlan, theta: AttachWeights, phi: ChannelParams) -> tuple:
    if not plan.possible:
        raise Unexplainable(plan.sentence.sent_id)
    mats = slot_arrays(plan.structures, flat_edit_probs(phi))
    (score, d), _ = _run(plan, MaxOps(), mats, pair_logprobs(plan, theta))
    if score == -np.inf:
        raise Unexplainable(plan.sentence.sent_id)
    return _derivation_tree(plan.tree, d), float(score)


def viterbi_underlying(sentence: AnnotatedSentence, model) -> tuple:
    """Best underlying tree T′ and its log score under max-derivation inference."""
    plan = plan_sentence(sentence, model.vocab, model.phi.direction)
    return viterbi_plan(plan, model.theta, model.phi)


def sample_plan(plan: SentencePlan, theta: AttachWeights, phi: ChannelParams,
                rng: np.random.Generator, mats: list | None = None,
                logp: Mapping | None = None) -> PunctTree:
    if not plan.possible:
        raise Unexplainable(plan.sentence.sent_id)
    mats = slot_arrays(plan.structures, flat_edit_probs(phi)) if mats is None else mats
    logp = pair_logprobs(plan, theta) if logp is None else logp
    (total, d), _ = _run(plan, SampleOps(rng), mats, logp)
    if total <= 0.0:
        raise Unexplainable(plan.sentence.sent_id)
    return _derivation_tree(plan.tree, d)


def sample_underlying(sentence: AnnotatedSentence, model, rng: np.random.Generator) -> PunctTree:
    """One exact draw of T′ from p(T′ | T, x)."""
    plan = plan_sentence(sentence, model.vocab, model.phi.direction)
    return sample_plan(plan, model.theta, model.phi, rng)


# ---------------------------------------------------------------------------
# Forward generation
# ---------------------------------------------------------------------------

def _attach_draw(tree: DepTree, index: int, x: Sequence[tuple], model, rng, cache: dict | None,
                 original: Mapping[int, tuple] | None, pairs_for) -> tuple:
    nd = tree.node(index)
    i, k = nd.span
    inner = tuple(sorted({t for s in x[i + 1:k] for t in s}))
    key = (index, inner)
    if cache is not None and key in cache:
        pairs, probs = cache[key]
    else:
        pairs = list(pairs_for(nd.deprel) if pairs_for else model.vocab.pairs_for(nd.deprel))
        ctx = node_context(tree, index, x, original)
        s = np.array([model.theta.score(features_for(l, r, ctx)) for l, r in pairs])
        probs = np.exp(s - s.max())
        probs /= probs.sum()
        if cache is not None:
            cache[key] = (pairs, probs)
    return pairs[int(rng.choice(len(pairs), p=probs))]


def generate(tree: DepTree, model, rng: np.random.Generator, cache: dict | None = None,
             original: Mapping[int, tuple] | None = None, pairs_for=None,
             phi: ChannelParams | None = None) -> tuple:
    """Ancestral sample of ``(T′, u, x)`` given the unpunctuated tree.

    Children come first; a node's internal slots are transduced before its
    own pair is drawn so the internal-punctuation features can see them.
    """
    phi = model.phi if phi is None else phi
    n = tree.n
    punctemes: dict = {}
    x: list = [None] * (n + 1)
    u: list = [None] * (n + 1)
    ends: dict = {}
    starts: dict = {}
    for nd in tree.nodes:
        starts.setdefault(nd.span[0], []).append(nd)
        ends.setdefault(nd.span[1], []).append(nd)

    def fill(s: int):
        toks: list = []
        for nd in sorted(ends.get(s, []), key=lambda q: q.span[1] - q.span[0]):
            toks.extend(punctemes[nd.index][1])
        for nd in sorted(starts.get(s, []), key=lambda q: q.span[0] - q.span[1]):
            toks.extend(punctemes[nd.index][0])
        u[s] = tuple(toks)
        x[s] = simulate(u[s], phi, rng)

    for w in tree.postorder:
        i, k = tree.node(w).span
        for s in range(i + 1, k):
            if x[s] is None:
                fill(s)
        punctemes[w] = _attach_draw(tree, w, x, model, rng, cache, original, pairs_for)
    for s in range(n + 1):
        if x[s] is None:
            fill(s)
    return PunctTree(tree, punctemes), u, x


def mirror_sentence(sentence: AnnotatedSentence) -> AnnotatedSentence:
    """Reverse word order, slot order and every slot string."""
    from .corpus import DepNode
    tree = sentence.tree
    n = tree.n
    nodes = [DepNode(n + 1 - nd.index, nd.form, nd.pos, 0 if nd.head == 0 else n + 1 - nd.head,
                     nd.deprel, xpos=nd.xpos, lemma=nd.lemma, feats=nd.feats)
             for nd in reversed(tree.nodes)]
    mtree = DepTree(nodes, tree.sent_id)
    slots = [tuple(reversed(s)) for s in reversed(sentence.slots)]
    return AnnotatedSentence(mtree, slots)


__all__ = [
    "InsideResult", "PunctTree", "SentencePlan", "Unexplainable", "generate", "inside",
    "inside_plan", "inside_tensors", "mirror_sentence", "plan_sentence", "prior_unmatched",
    "sample_plan", "sample_underlying", "underlying_slots", "viterbi_plan",
    "viterbi_underlying", "EPS",
]
