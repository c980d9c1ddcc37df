"""Shared fixtures and small model builders for the test suite."""
from __future__ import annotations

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from punctmodel.attach import AttachWeights, feature_name  # noqa: E402
from punctmodel.channel import L2R, ChannelParams  # noqa: E402
from punctmodel.corpus import EPS, AnnotatedSentence, DepNode, DepTree, PunctemeVocab  # noqa: E402
from punctmodel.model import PunctuationModel  # noqa: E402

DALE = """# sent_id = dale
# text = "Dale" means "river valley".
1	"	"	PUNCT	``	_	2	punct	_	_
2	Dale	Dale	PROPN	NNP	_	4	nsubj	_	_
3	"	"	PUNCT	''	_	2	punct	_	_
4	means	mean	VERB	VBZ	_	0	root	_	_
5	"	"	PUNCT	``	_	7	punct	_	_
6	river	river	NOUN	NN	_	7	compound	_	_
7	valley	valley	NOUN	NN	_	4	obj	_	_
8	"	"	PUNCT	''	_	7	punct	_	_
9	.	.	PUNCT	.	_	4	punct	_	_

"""


def one_word_tree(sent_id: str = "w", pos: str = "VERB") -> DepTree:
    return DepTree([DepNode(1, "go", pos, 0, "root")], sent_id)


def root_model(pairs, scores=None, alphabet=None, phi=None) -> PunctuationModel:
    """A model over a 1-word tree whose root chooses among ``pairs``.

    ``scores`` gives the log-linear score of each pair through its N feature.
    """
    punctemes = {p for pair in pairs for p in pair} | {EPS}
    if alphabet is not None:
        punctemes |= {(a,) for a in alphabet}
    vocab = PunctemeVocab(frozenset(punctemes), {"root": list(pairs)})
    weights = {}
    for (l, r), s in zip(pairs, scores or []):
        weights[feature_name("N", l, r, "VERB", "root")] = float(s)
    if phi is None:
        phi = ChannelParams.identity_channel(vocab.alphabet)
    return PunctuationModel(vocab, AttachWeights(weights), phi)


def all_strings(alphabet, max_len: int):
    for m in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=m)


def dale_sentence() -> AnnotatedSentence:
    from punctmodel.corpus import depunctuate, parse_conllu, preprocess
    raw = preprocess(parse_conllu(DALE), counts={"Dale": 9, "means": 9, "river": 9, "valley": 9})
    return depunctuate(raw[0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def abc_phi(rng):
    return ChannelParams.random(("a", "b", "c"), rng, L2R)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
