"""Generative model of punctuation in dependency trees.

Constituents attach underlying punctuation (``attach``), a sliding-window
noisy channel rewrites each slot (``channel``), and exact semiring inference
over the tree (``forest``) supports training and downstream tasks.
"""
from .channel import ChannelParams, channel_prob, edit_distribution, simulate, slot_wfsa
from .corpus import AnnotatedSentence, DepTree, PunctemeVocab, estimate_vocab, parse_conllu
from .forest import (PunctTree, generate, inside, sample_underlying, underlying_slots,
                     viterbi_underlying)
from .model import PunctuationModel

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence", "ChannelParams", "DepTree", "PunctTree", "PunctemeVocab",
    "PunctuationModel", "channel_prob", "edit_distribution", "estimate_vocab", "generate",
    "inside", "parse_conllu", "sample_underlying", "simulate", "slot_wfsa",
    "underlying_slots", "viterbi_underlying",
]
