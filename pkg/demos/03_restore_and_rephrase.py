"""
Restoring and rephrasing punctuation
====================================

Restoration samples surfaces for an unpunctuated tree and keeps the sample
with the least expected edit distance to the others. Rephrasing reorders a
punctuated sentence: the words move with their underlying punctuation and
the channel is applied again, so commas and periods land where they belong.
"""
import numpy as np

from punctmodel.channel import R2L, simulate
from punctmodel.corpus import AnnotatedSentence
from punctmodel.synthetic import king_sentence, planted_corpus, planted_model
from punctmodel.tasks import (MbrConfig, aed, rephrase, rephrase_base, restore, surface_tokens,
                              trivial_baseline)

# restoration on held-out trees from the planted grammar
model = planted_model()
test = planted_corpus(model, 100, np.random.default_rng(3), prefix="t")
restored = [restore(s.tree, model, MbrConfig(samples=100, seed=0)) for s in test]
trivial = [trivial_baseline(s.tree, start_mark="^") for s in test]
gold = [s.slots for s in test]
print("AED, MBR restore:     ", round(aed(restored, gold), 4))
print("AED, final mark only: ", round(aed(trivial, gold), 4))

# rephrasing: move the relative clause in front of the appositive
king, pt = king_sentence(R2L)
x = [simulate(u, king.phi, argmax=True) for u in pt.underlying_slots()]
sentence = AnnotatedSentence(pt.tree, x)
print("\noriginal:  ", " ".join(surface_tokens(sentence)))


def swap(tree, head):
    # kids of "king": the(2) king(3) Pendragon(5) wields(7)
    return [2, 3, 7, 5] if head == 3 else None


full = rephrase(sentence, king, swap, argmax=True).sentence
print("rephrased: ", " ".join(surface_tokens(full)))

# the baseline moves surface punctuation tokens as if they were words
base = rephrase_base(sentence, lambda t, h: [2, 3, 7, 9, 4, 6] if h == 3 else None)
print("baseline:  ", " ".join(nd.form for nd in base.nodes))
