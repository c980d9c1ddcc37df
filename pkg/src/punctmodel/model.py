"""The trained punctuation model and its text file format.

File layout::

    punctuation-model 1
    [meta]
    key<TAB>value
    [vocab]
    [V] ... [W <deprel>] ...       (puncteme vocabulary dump)
    [theta]
    feature<TAB>weight
    [phi]
    direction l2r|r2l
    a b s_keep s_leftAbsorb s_rightAbsorb s_transpose

Floats are written with 17 significant digits so a reload is bit-exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attach import AttachWeights
from .channel import L2R, ChannelParams
from .corpus import PunctemeVocab

MAGIC = "punctuation-model 1"


class ModelFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class PunctuationModel:
    vocab: PunctemeVocab
    theta: AttachWeights
    phi: ChannelParams
    meta: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, vocab: PunctemeVocab, direction: str = L2R, identity: bool = False,
                rng: np.random.Generator | None = None) -> "PunctuationModel":
        """Zero weights and uniform (or identity) channel, or N(0, 1) channel scores with ``rng``."""
        alphabet = vocab.alphabet
        if identity:
            phi = ChannelParams.identity_channel(alphabet, direction)
        elif rng is not None:
            phi = ChannelParams.random(alphabet, rng, direction)
        else:
            phi = ChannelParams.uniform(alphabet, direction)
        return cls(vocab, AttachWeights(), phi)

    def copy(self) -> "PunctuationModel":
        return PunctuationModel(self.vocab, self.theta.copy(), self.phi.copy(), dict(self.meta))

    def relations(self) -> set:
        return set(self.vocab.pairs)

    def dumps(self) -> str:
        lines = [MAGIC, "[meta]"]
        meta = dict(self.meta)
        meta["direction"] = self.phi.direction
        meta["channel"] = "identity" if self.phi.identity else "learned"
        lines += [f"{k}\t{v}" for k, v in sorted(meta.items())]
        lines.append("[vocab]")
        lines += self.vocab.dumps().rstrip("\n").split("\n")
        lines.append("[theta]")
        lines += [f"{name}\t{fmt(w)}" for name, w in sorted(self.theta.weights.items())]
        lines.append("[phi]")
        lines.append(f"direction {self.phi.direction}")
        a = self.phi.alphabet
        for ia, x in enumerate(a):
            for ib, y in enumerate(a):
                s = " ".join(fmt(v) for v in self.phi.scores[ia, ib])
                lines.append(f"{x} {y} {s}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "PunctuationModel":
        lines = text.split("\n")
        if not lines or lines[0].strip() != MAGIC:
            raise ModelFormatError("not a punctuation model file")
        sections: dict = {}
        cur = None
        for line in lines[1:]:
            if line in ("[meta]", "[vocab]", "[theta]", "[phi]"):
                cur = line[1:-1]
                sections[cur] = []
            elif cur is not None:
                sections[cur].append(line)
        for name in ("meta", "vocab", "theta", "phi"):
            if name not in sections:
                raise ModelFormatError(f"missing [{name}] section")
        meta = dict(l.split("\t", 1) for l in sections["meta"] if l)
        vocab = PunctemeVocab.loads("\n".join(sections["vocab"]))
        weights = {}
        for l in sections["theta"]:
            if l:
                name, w = l.rsplit("\t", 1)
                weights[name] = float(w)
        direction = None
        records = {}
        for l in sections["phi"]:
            if not l:
                continue
            if l.startswith("direction "):
                direction = l.split(" ", 1)[1].strip()
                continue
            parts = l.split(" ")
            if len(parts) != 6:
                raise ModelFormatError(f"bad channel record {l!r}")
            records[(parts[0], parts[1])] = [float(v) for v in parts[2:]]
        alphabet = vocab.alphabet
        scores = np.zeros((len(alphabet), len(alphabet), 4))
        for ia, x in enumerate(alphabet):
            for ib, y in enumerate(alphabet):
                if (x, y) not in records:
                    raise ModelFormatError(f"missing channel record for {x} {y}")
                scores[ia, ib] = records[(x, y)]
        identity = meta.get("channel") == "identity"
        phi = ChannelParams(alphabet, scores, direction or meta.get("direction", L2R), identity)
        return cls(vocab, AttachWeights(weights), phi, meta)

    @classmethod
    def load(cls, path) -> "PunctuationModel":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
