"""
Learning the channel from surface text
======================================

Sentences are generated from a planted model whose channel right-absorbs the
window ', .' (an appositive comma before the final period disappears). The
learner sees only trees and surface punctuation, and recovers the rule.
Training for the full 30 epochs takes about a minute; pass a smaller number
on the command line to shorten it.
"""
import sys

import numpy as np

from punctmodel.channel import RIGHT_ABSORB, edit_distribution
from punctmodel.corpus import estimate_vocab
from punctmodel.synthetic import planted_corpus, planted_model
from punctmodel.tasks import channel_report, perplexity
from punctmodel.train import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 30
rng = np.random.default_rng(0)
planted = planted_model(absorb=0.95)
corpus = planted_corpus(planted, 2000, rng)
dev = planted_corpus(planted, 200, rng, prefix="d")
test = planted_corpus(planted, 300, rng, prefix="t")
print(f"{len(corpus)} training sentences, e.g.")
for s in corpus[:3]:
    toks = []
    for i, nd in enumerate(s.tree.nodes):
        toks += list(s.slots[i]) + [nd.form]
    print("  ", " ".join(toks + list(s.slots[-1])))

# punctemes and pair inventories come from the training surface
vocab = estimate_vocab(corpus)
print("\nattachment inventory:", {d: ps for d, ps in vocab.pairs.items() if len(ps) > 1})


def show(r):
    print(f"epoch {r.epoch:>2}  objective {r.objective:10.2f}  dev ppl {r.dev_perplexity:.4f}")


result = train(corpus, TrainConfig(epochs=epochs, seed=0), dev=dev, vocab=vocab, progress=show)
learned = result.model
p = edit_distribution(",", ".", learned.phi)
print("\nlearned edits for ', .':",
      {k: round(float(v), 3) for k, v in zip(("keep", "left", "right", "swap"), p)})
print("right-absorb probability:", round(float(p[RIGHT_ABSORB]), 3), "(planted 0.95)")

# the most used windows, counted in 1-best underlying trees
print("\nwindow  count  keep  left  right  swap")
for row in channel_report(learned, test)[:4]:
    print(f"{row.a} {row.b}   {row.count:>6}  " + "  ".join(f"{v:.2f}" for v in row.probs))

# the identity-channel ablation must explain every surface mark by attachment
ablation = train(corpus, TrainConfig(epochs=min(epochs, 10), seed=0, channel="identity"),
                 dev=dev, vocab=vocab).model
print("\nheld-out perplexity, full:    ", round(perplexity(test, learned).perplexity, 4))
print("held-out perplexity, ablation:", round(perplexity(test, ablation).perplexity, 4))
