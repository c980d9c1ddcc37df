"""
Underlying punctuation and the noisy channel
============================================

A punctuated tree attaches puncteme pairs to constituents. Reading them off
in order gives the underlying slot strings, and the channel rewrites each slot
with a sliding window of edits. Here a hand-set English channel turns the
doubled comma and the comma-period into single marks and moves the period
inside the closing quote; Viterbi then recovers the tree from the surface.
"""
import numpy as np

from punctmodel.channel import R2L, channel_prob, edit_distribution, simulate
from punctmodel.corpus import AnnotatedSentence
from punctmodel.forest import inside, viterbi_underlying
from punctmodel.synthetic import king_sentence

model, gold = king_sentence(R2L)
print("punctuated tree:")
print(" ", gold.bracketed())

# underlying slots, one per gap between words
u = gold.underlying_slots()
x = [simulate(slot, model.phi, argmax=True) for slot in u]
words = [nd.form for nd in gold.tree.nodes]
print("\nslot  underlying        surface")
for i, (us, xs) in enumerate(zip(u, x)):
    if us or xs:
        print(f"{i:>4}  {' '.join(us):<16}  {' '.join(xs)}")


def render(slots):
    out = []
    for i, w in enumerate(words):
        out += list(slots[i]) + [w]
    return " ".join(out + list(slots[-1]))


print("\nunderlying:", render(u))
print("surface:   ", render(x))

# the channel is a distribution over rewrites of each slot
print("\nedit distribution for the window ', ,':",
      np.round(edit_distribution(",", ",", model.phi), 3))
print("p(” , . -> . ”) =", channel_prob(("”", ",", "."), (".", "”"), model.phi))

# going back: which punctuated tree best explains the surface?
sentence = AnnotatedSentence(gold.tree, x)
pt, score = viterbi_underlying(sentence, model)
print("\nlog p(x | T) =", round(inside(sentence, model).log_likelihood, 4))
print("viterbi tree:", pt.bracketed())
print("recovered the planted tree:", pt.punctemes == gold.punctemes)
