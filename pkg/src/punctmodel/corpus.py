"""CoNLL-U ingestion, punctuation preprocessing and puncteme vocabulary estimation.

A sentence of ``n`` words has ``n + 1`` slots numbered ``0..n``; word ``m``
(1-based) sits between slots ``m - 1`` and ``m``.  Punctuation tokens are
removed from the tree and gathered into the slot where they stood.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

Puncteme = tuple  # tuple[str, ...]; () is the empty puncteme
EPS: tuple = ()

START_MARK = "^"
ABBREV_DOT = "<.>"
UNK = "UNK"
EMPTY_SYMBOL = "∅"  # rendering of the empty puncteme in text files

LEFT_DOUBLE, RIGHT_DOUBLE = "“", "”"
LEFT_SINGLE, RIGHT_SINGLE = "‘", "’"


class ConlluError(ValueError):
    """Malformed CoNLL-U input; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SentenceRejected(Exception):
    """A sentence that cannot be turned into an :class:`AnnotatedSentence`.

    ``reason`` is one of ``"nonleaf-punct"`` (omitted per the treebank
    statistics convention), ``"nonprojective"``, ``"empty"`` or ``"malformed"``.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


# ---------------------------------------------------------------------------
# Raw CoNLL-U
# ---------------------------------------------------------------------------

@dataclass
class Token:
    id: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    head: int = 0
    deprel: str = "_"
    deps: str = "_"
    misc: str = "_"

    @property
    def is_punct(self) -> bool:
        return self.upos == "PUNCT" or self.deprel == "punct"

    def to_line(self) -> str:
        return "\t".join([str(self.id), self.form, self.lemma, self.upos, self.xpos,
                          self.feats, str(self.head), self.deprel, self.deps, self.misc])


@dataclass
class RawSentence:
    tokens: list
    comments: list = field(default_factory=list)
    sent_id: str = ""

    def copy(self) -> "RawSentence":
        return RawSentence([replace(t) for t in self.tokens], list(self.comments), self.sent_id)


def parse_conllu(text: str) -> list:
    """Parse a CoNLL-U document into :class:`RawSentence` objects.

    Multiword-token ranges (``3-4``) and empty nodes (``5.1``) are skipped.
    """
    sentences = []
    tokens: list = []
    comments: list = []
    sent_id = ""

    def flush():
        nonlocal tokens, comments, sent_id
        if tokens:
            sentences.append(RawSentence(tokens, comments, sent_id or str(len(sentences) + 1)))
        elif comments:
            log.debug("dropping comment-only block")
        tokens, comments, sent_id = [], [], ""

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            comments.append(line)
            key, _, value = line[1:].partition("=")
            if key.strip() == "sent_id":
                sent_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, found {len(cols)}", lineno)
        if "-" in cols[0] or "." in cols[0]:
            continue
        try:
            tid = int(cols[0])
        except ValueError:
            raise ConlluError(f"non-integer token id {cols[0]!r}", lineno) from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"non-integer head {cols[6]!r}", lineno) from None
        tokens.append(Token(tid, cols[1], cols[2], cols[3], cols[4], cols[5],
                            head, cols[7], cols[8], cols[9]))
    flush()
    return sentences


def read_conllu(path) -> list:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_conllu(f.read())


def write_conllu(sentences: Iterable[RawSentence]) -> str:
    blocks = []
    for s in sentences:
        lines = list(s.comments)
        lines.extend(t.to_line() for t in s.tokens)
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def _renumber(tokens: list, origin: list) -> list:
    """Give ``tokens`` ids 1..N; ``origin[i]`` is the old id of token i (or None
    for inserted tokens whose ``head`` already names an old id)."""
    mapping = {old: new for new, old in enumerate(origin, start=1) if old is not None}
    mapping[0] = 0
    out = []
    for new_id, tok in enumerate(tokens, start=1):
        out.append(replace(tok, id=new_id, head=mapping[tok.head]))
    return out


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

@dataclass
class PreprocessConfig:
    unk_threshold: int = 5
    start_mark: str = START_MARK
    quote_disambiguation: bool = True
    abbreviation_split: bool = True

    def __post_init__(self):
        if self.unk_threshold < 1:
            raise ValueError("unk_threshold must be >= 1")


def _disambiguate_quotes(tokens: list, straight: str, left: str, right: str,
                         left_tags=(), right_tags=()) -> None:
    groups: dict = {}
    for tok in tokens:
        if tok.form != straight or not tok.is_punct:
            continue
        if tok.xpos in left_tags:
            tok.form = left
        elif tok.xpos in right_tags:
            tok.form = right
        else:
            groups.setdefault(tok.head, []).append(tok)
    for group in groups.values():
        group.sort(key=lambda t: t.id)
        for k, tok in enumerate(group):
            # pairs open/close in order; an unpaired trailing quote closes
            opening = k % 2 == 0 and k + 1 < len(group)
            tok.form = left if opening else right


def _split_abbreviations(sent: RawSentence) -> RawSentence:
    tokens, origin = [], []
    for tok in sent.tokens:
        if not tok.is_punct and len(tok.form) > 1 and tok.form.endswith(".") and tok.form.rstrip("."):
            tokens.append(replace(tok, form=tok.form[:-1]))
            origin.append(tok.id)
            tokens.append(Token(0, ABBREV_DOT, ABBREV_DOT, "PUNCT", "_", "_", tok.id, "punct"))
            origin.append(None)
        else:
            tokens.append(tok)
            origin.append(tok.id)
    return RawSentence(_renumber(tokens, origin), sent.comments, sent.sent_id)


def _prepend_start_mark(sent: RawSentence, mark: str) -> RawSentence:
    roots = [t.id for t in sent.tokens if t.head == 0 and not t.is_punct]
    head = roots[0] if roots else (sent.tokens[0].id if sent.tokens else 0)
    start = Token(0, mark, mark, "PUNCT", "_", "_", head, "punct")
    tokens = [start] + list(sent.tokens)
    origin = [None] + [t.id for t in sent.tokens]
    return RawSentence(_renumber(tokens, origin), sent.comments, sent.sent_id)


def count_words(sentences: Iterable[RawSentence]) -> Counter:
    """Counts of non-punctuation word forms (used for UNK thresholding)."""
    return Counter(t.form for s in sentences for t in s.tokens if not t.is_punct)


def normalize(sent: RawSentence, config: PreprocessConfig) -> RawSentence:
    """Quote disambiguation and abbreviation splitting (no UNK, no start mark)."""
    sent = sent.copy()
    if config.quote_disambiguation:
        _disambiguate_quotes(sent.tokens, '"', LEFT_DOUBLE, RIGHT_DOUBLE, ("``",), ("''",))
        _disambiguate_quotes(sent.tokens, "'", LEFT_SINGLE, RIGHT_SINGLE, ("`",), ())
    if config.abbreviation_split:
        sent = _split_abbreviations(sent)
    return sent


def preprocess(sentences: Sequence[RawSentence], config: PreprocessConfig | None = None,
               counts: Counter | None = None) -> list:
    """Apply the full preprocessing pipeline.

    ``counts`` are word counts from the *training* portion (after
    normalization); when omitted they are computed from ``sentences``
    themselves, which is only correct for the training split.
    """
    config = config or PreprocessConfig()
    normalized = [normalize(s, config) for s in sentences]
    if counts is None:
        counts = count_words(normalized)
    out = []
    for sent in normalized:
        for tok in sent.tokens:
            if not tok.is_punct and counts.get(tok.form, 0) < config.unk_threshold:
                tok.form = UNK
        out.append(_prepend_start_mark(sent, config.start_mark) if config.start_mark else sent)
    return out


# ---------------------------------------------------------------------------
# Depunctuated trees
# ---------------------------------------------------------------------------

@dataclass
class DepNode:
    index: int
    form: str
    pos: str
    head: int
    deprel: str
    span: tuple = (0, 0)
    head_slot: int = 0
    left_kids: tuple = ()
    right_kids: tuple = ()
    xpos: str = "_"
    lemma: str = "_"
    feats: str = "_"

    @property
    def kids(self) -> tuple:
        return self.left_kids + self.right_kids


@dataclass
class DepTree:
    nodes: list
    sent_id: str = ""

    def __post_init__(self):
        self._finalize()

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def root(self) -> int:
        return self._root

    def node(self, index: int) -> DepNode:
        return self.nodes[index - 1]

    def _finalize(self):
        n = len(self.nodes)
        roots = [nd.index for nd in self.nodes if nd.head == 0]
        if len(roots) != 1:
            raise SentenceRejected("malformed", f"{len(roots)} roots")
        self._root = roots[0]
        if [nd.index for nd in self.nodes] != list(range(1, n + 1)):
            raise SentenceRejected("malformed", "token ids not contiguous")
        kids = {nd.index: [] for nd in self.nodes}
        for nd in self.nodes:
            if nd.head:
                if nd.head not in kids:
                    raise SentenceRejected("malformed", f"head {nd.head} out of range")
                kids[nd.head].append(nd.index)
        order, seen, stack = [], set(), [(self._root, False)]
        while stack:
            idx, done = stack.pop()
            if done:
                order.append(idx)
                continue
            if idx in seen:
                raise SentenceRejected("malformed", "cycle")
            seen.add(idx)
            stack.append((idx, True))
            for c in sorted(kids[idx], reverse=True):
                stack.append((c, False))
        if len(seen) != n:
            raise SentenceRejected("malformed", "cycle or disconnected nodes")
        lo = {i: i for i in kids}
        hi = {i: i for i in kids}
        for idx in order:
            for c in kids[idx]:
                lo[idx] = min(lo[idx], lo[c])
                hi[idx] = max(hi[idx], hi[c])
        size = {i: 1 for i in kids}
        for idx in order:
            size[idx] += sum(size[c] for c in kids[idx])
            if hi[idx] - lo[idx] + 1 != size[idx]:
                raise SentenceRejected("nonprojective", f"node {idx}")
        for nd in self.nodes:
            ks = sorted(kids[nd.index])
            nd.left_kids = tuple(k for k in ks if k < nd.index)
            nd.right_kids = tuple(k for k in ks if k > nd.index)
            nd.span = (lo[nd.index] - 1, hi[nd.index])
            nd.head_slot = nd.index
        self.postorder = tuple(order)

    def copy(self) -> "DepTree":
        return DepTree([replace(nd) for nd in self.nodes], self.sent_id)


@dataclass
class AnnotatedSentence:
    """An unpunctuated tree with its observed surface slot strings ``x``."""

    tree: DepTree
    slots: list

    def __post_init__(self):
        self.slots = [tuple(s) for s in self.slots]
        if len(self.slots) != self.tree.n + 1:
            raise ValueError("need n + 1 surface slots")

    @property
    def sent_id(self) -> str:
        return self.tree.sent_id

    @property
    def n(self) -> int:
        return self.tree.n


def depunctuate(sent: RawSentence) -> AnnotatedSentence:
    """Remove punctuation tokens into slots; raise :class:`SentenceRejected`."""
    punct_ids = {t.id for t in sent.tokens if t.is_punct}
    for t in sent.tokens:
        if t.head in punct_ids:
            raise SentenceRejected("nonleaf-punct", f"token {t.head} has dependents")
    words = [t for t in sent.tokens if t.id not in punct_ids]
    if not words:
        raise SentenceRejected("empty")
    new_index = {t.id: i for i, t in enumerate(words, start=1)}
    new_index[0] = 0
    slots: list = [[] for _ in range(len(words) + 1)]
    seen_words = 0
    for t in sent.tokens:
        if t.id in punct_ids:
            slots[seen_words].append(t.form)
        else:
            seen_words += 1
    nodes = []
    for t in words:
        if t.head not in new_index:
            raise SentenceRejected("malformed", f"head {t.head} of token {t.id} missing")
        nodes.append(DepNode(new_index[t.id], t.form, t.upos, new_index[t.head], t.deprel,
                             xpos=t.xpos, lemma=t.lemma, feats=t.feats))
    tree = DepTree(nodes, sent.sent_id)
    return AnnotatedSentence(tree, slots)


def load_treebank(sentences: Iterable[RawSentence]) -> tuple:
    """Depunctuate many sentences; returns ``(annotated, rejected_counts)``."""
    kept, rejected = [], Counter()
    for s in sentences:
        try:
            kept.append(depunctuate(s))
        except SentenceRejected as exc:
            rejected[exc.reason] += 1
    if rejected:
        log.info("rejected sentences: %s", dict(rejected))
    return kept, rejected


# ---------------------------------------------------------------------------
# Puncteme vocabulary
# ---------------------------------------------------------------------------

def format_puncteme(p: Sequence[str]) -> str:
    return " ".join(p) if p else EMPTY_SYMBOL


def parse_puncteme(text: str) -> tuple:
    text = text.strip()
    if text == EMPTY_SYMBOL or not text:
        return EPS
    return tuple(text.split(" "))


@dataclass
class PunctemeVocab:
    """Underlying puncteme inventory and per-relation pair inventories."""

    punctemes: frozenset
    pairs: dict

    def __post_init__(self):
        self.punctemes = frozenset(tuple(p) for p in self.punctemes) | {EPS}
        self.pairs = {d: sorted({(tuple(l), tuple(r)) for l, r in ps} | {(EPS, EPS)})
                      for d, ps in self.pairs.items()}
        for ps in self.pairs.values():
            for l, r in ps:
                if l not in self.punctemes or r not in self.punctemes:
                    raise ValueError(f"pair {(l, r)} uses a puncteme outside the vocabulary")

    @property
    def alphabet(self) -> tuple:
        return tuple(sorted({tok for p in self.punctemes for tok in p}))

    def pairs_for(self, deprel: str) -> list:
        """Pair inventory for a relation; unseen relations may only abstain."""
        return self.pairs.get(deprel, [(EPS, EPS)])

    def dumps(self) -> str:
        lines = ["[V]"]
        lines += [format_puncteme(p) for p in sorted(self.punctemes)]
        for d in sorted(self.pairs):
            lines.append(f"[W {d}]")
            lines += [f"{format_puncteme(l)}\t{format_puncteme(r)}" for l, r in self.pairs[d]]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PunctemeVocab":
        punctemes, pairs, section = set(), {}, None
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("[V]"):
                section = "V"
            elif line.startswith("[W ") and line.endswith("]"):
                section = line[3:-1]
                pairs.setdefault(section, [])
            elif section == "V":
                punctemes.add(parse_puncteme(line))
            elif section is not None:
                l, r = line.split("\t")
                pairs[section].append((parse_puncteme(l), parse_puncteme(r)))
            else:
                raise ValueError(f"vocabulary line outside a section: {line!r}")
        return cls(frozenset(punctemes), pairs)


def estimate_vocab(sentences: Iterable[AnnotatedSentence]) -> PunctemeVocab:
    """Every observed surface slot string is a puncteme; every observed
    (left-flank, right-flank) of a ``d`` constituent is a pair in ``W_d``."""
    punctemes, pairs = {EPS}, {}
    for s in sentences:
        punctemes.update(s.slots)
        for nd in s.tree.nodes:
            i, k = nd.span
            pairs.setdefault(nd.deprel, set()).add((s.slots[i], s.slots[k]))
    return PunctemeVocab(frozenset(punctemes), pairs)
