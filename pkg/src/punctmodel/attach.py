"""Log-linear attachment of (left, right) puncteme pairs to tree nodes.

Features are binary and named by dotted templates such as
``N.<l>.<r>.<g>.<d̄>``.  Each template is a small function registered in
:data:`TEMPLATES`; :func:`extract_features` fires all of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import DepTree, EPS, PunctemeVocab

BOS, EOS = "BOS", "EOS"
ROOT_REL = "root"
EPS_FIELD = "ε"

# Symmetric open/close pairs; the unmatched-puncteme counter uses exactly these.
MATCHED_PAIRS = {
    "{": "}", "[": "]", "(": ")", "“": "”", "‘": "’", "¿": "?", "¡": "!",
    "«": "»", "⟨": "⟩", "【": "】", "『": "』", "「": "」",
}
# The S feature also treats these self-paired tokens as symmetric.
SELF_PAIRS = {",": ",", "-": "-"}

WIDTH_BUCKETS = ((1, "1"), (2, "2"), (3, "3"), (5, "4-5"), (10, "6-10"))


class AttachConfigError(ValueError):
    pass


def width_bucket(width: int) -> str:
    for limit, name in WIDTH_BUCKETS:
        if width <= limit:
            return name
    return "11+"


def _field(p) -> str:
    """Render a puncteme (or plain string) as one escaped feature field."""
    if isinstance(p, tuple):
        if not p:
            return EPS_FIELD
        p = " ".join(p)
    return p.replace("\\", "\\\\").replace(".", "\\.")


def feature_name(*fields) -> str:
    return ".".join(_field(f) for f in fields)


def is_symmetric(l: tuple, r: tuple, table: Mapping[str, str]) -> bool:
    """``l`` and ``r`` mirror each other: ``l[i]`` opens what ``r[-1-i]`` closes."""
    if len(l) != len(r):
        return False
    return all(table.get(a) == b for a, b in zip(l, reversed(r)))


def count_unmatched(l: Sequence[str], r: Sequence[str],
                    table: Mapping[str, str] = MATCHED_PAIRS) -> int:
    """1 if the pair carries unbalanced symmetric punctuation, else 0."""
    known = set(table) | set(table.values())
    fl = tuple(t for t in l if t in known)
    fr = tuple(t for t in r if t in known)
    return 0 if is_symmetric(fl, fr, table) else 1


@dataclass(frozen=True)
class NodeContext:
    """Everything the templates may look at for one node."""

    g: str
    deprel: str
    ddir: str
    parent_rel: str
    child_rels: tuple
    left_flank: tuple   # POS left/right of slot i
    right_flank: tuple  # POS left/right of slot k
    width: str
    inner: tuple        # sorted distinct surface tokens strictly inside the constituent
    orig_left: tuple | None = None
    orig_right: tuple | None = None


def node_context(tree: DepTree, index: int, slots: Sequence[tuple] | None = None,
                 original: Mapping[int, tuple] | None = None) -> NodeContext:
    """Build the context of node ``index``.

    ``slots`` are the surface strings used for the internal-punctuation
    summary (only slots strictly inside the span are read).  ``original``
    maps node index to the ``(l', r')`` recovered from an errorful sentence.
    """
    nd = tree.node(index)
    i, k = nd.span
    pos = [BOS] + [n.pos for n in tree.nodes] + [EOS]
    if nd.head == 0:
        ddir, parent_rel = ROOT_REL, ROOT_REL
    else:
        ddir = ("←" if nd.index < nd.head else "→") + nd.deprel
        parent = tree.node(nd.head)
        parent_rel = ROOT_REL if parent.head == 0 else parent.deprel
    inner: tuple = ()
    if slots is not None:
        inner = tuple(sorted({t for s in slots[i + 1:k] for t in s}))
    ol = orr = None
    if original is not None and index in original:
        ol, orr = original[index]
    return NodeContext(
        g=nd.pos, deprel=nd.deprel, ddir=ddir, parent_rel=parent_rel,
        child_rels=tuple(tree.node(c).deprel for c in nd.kids),
        left_flank=(pos[i], pos[i + 1]), right_flank=(pos[k], pos[k + 1]),
        width=width_bucket(k - i), inner=inner, orig_left=ol, orig_right=orr,
    )


Template = Callable[[tuple, tuple, NodeContext], Iterable[str]]


def _n(l, r, c):
    yield feature_name("N", l, r, c.g, c.ddir)


def _w(l, r, c):
    yield feature_name("W", c.width, l, r, c.g, c.ddir)


def _s(l, r, c):
    if l and is_symmetric(l, r, {**MATCHED_PAIRS, **SELF_PAIRS}):
        yield feature_name("S", c.g, c.ddir)


def _a(l, r, c):
    yield feature_name("A", l, r, c.g, c.ddir, c.parent_rel)


def _l(l, r, c):
    yield feature_name("L", l, *c.left_flank)


def _r(l, r, c):
    yield feature_name("R", r, *c.right_flank)


def _c(l, r, c):
    for rel in sorted(set(c.child_rels)):
        yield feature_name("C", l, r, c.deprel, rel)


def _inner(l, r, c):
    yield feature_name("N", l, "{" + " ".join(c.inner) + "}", r, c.ddir)


def _correction_n(l, r, c):
    if c.orig_left is None:
        return
    lo, ro = c.orig_left, c.orig_right
    yield feature_name("N", l, r, c.g, c.ddir, lo, ro)
    yield feature_name("N", l, r, c.ddir, lo, ro)
    yield feature_name("N", l, r, c.g, lo, ro)
    yield feature_name("N", l, r, lo, ro)


def _correction_w(l, r, c):
    if c.orig_left is None:
        return
    lo, ro = c.orig_left, c.orig_right
    yield feature_name("W", c.width, l, r, c.g, c.ddir, lo, ro)
    yield feature_name("W", c.width, l, r, c.ddir, lo, ro)
    yield feature_name("W", c.width, l, r, c.g, lo, ro)
    yield feature_name("W", c.width, l, r, lo, ro)


TEMPLATES: dict = {
    "N": _n, "W": _w, "S": _s, "A": _a, "L": _l, "R": _r, "C": _c, "Nc": _inner,
}
CORRECTION_TEMPLATES: dict = {"Nx": _correction_n, "Wx": _correction_w}


def extract_features(l: tuple, r: tuple, ctx: NodeContext,
                     templates: Mapping[str, Template] | None = None) -> frozenset:
    """Active feature names for attaching ``(l, r)`` in context ``ctx``."""
    templates = TEMPLATES if templates is None else templates
    return frozenset(f for t in templates.values() for f in t(tuple(l), tuple(r), ctx))


def correction_features(l: tuple, r: tuple, ctx: NodeContext, lo: tuple, ro: tuple) -> frozenset:
    """Base features plus the templates conditioned on the recovered ``(l', r')``."""
    ctx = replace(ctx, orig_left=tuple(lo), orig_right=tuple(ro))
    return extract_features(l, r, ctx, {**TEMPLATES, **CORRECTION_TEMPLATES})


def features_for(l: tuple, r: tuple, ctx: NodeContext) -> frozenset:
    """Base features, plus correction features when the context carries ``(l', r')``."""
    if ctx.orig_left is None:
        return extract_features(l, r, ctx)
    return extract_features(l, r, ctx, {**TEMPLATES, **CORRECTION_TEMPLATES})


@dataclass
class AttachWeights:
    """Sparse feature weights θ; absent features weigh 0."""

    weights: dict = field(default_factory=dict)

    def score(self, feats: Iterable[str]) -> float:
        return float(sum(self.weights.get(f, 0.0) for f in feats))

    def copy(self) -> "AttachWeights":
        return AttachWeights(dict(self.weights))


def pair_scores(pairs: Sequence[tuple], ctx: NodeContext, theta: AttachWeights) -> np.ndarray:
    return np.array([theta.score(features_for(l, r, ctx)) for l, r in pairs])


def attach_distribution(pairs: Sequence[tuple], ctx: NodeContext,
                        theta: AttachWeights) -> np.ndarray:
    """Probabilities over ``pairs`` (the node's whole inventory)."""
    if not pairs:
        raise AttachConfigError(f"empty pair inventory for relation {ctx.deprel!r}")
    s = pair_scores(pairs, ctx, theta)
    s = np.exp(s - s.max())
    return s / s.sum()


def attach_prob(l: tuple, r: tuple, ctx: NodeContext, theta: AttachWeights,
                vocab: PunctemeVocab | Sequence[tuple]) -> float:
    """p(l, r | w), normalized over the relation's pair inventory."""
    pairs = vocab.pairs_for(ctx.deprel) if isinstance(vocab, PunctemeVocab) else list(vocab)
    if not pairs:
        raise AttachConfigError(f"empty pair inventory for relation {ctx.deprel!r}")
    key = (tuple(l), tuple(r))
    if key not in pairs:
        return 0.0
    return float(attach_distribution(pairs, ctx, theta)[list(pairs).index(key)])


__all__ = [
    "AttachWeights", "NodeContext", "MATCHED_PAIRS", "SELF_PAIRS", "TEMPLATES",
    "CORRECTION_TEMPLATES", "attach_distribution", "attach_prob", "correction_features",
    "count_unmatched", "extract_features", "feature_name", "features_for", "is_symmetric",
    "node_context", "width_bucket", "EPS",
]
