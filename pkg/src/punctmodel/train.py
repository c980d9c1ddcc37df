"""Regularized conditional log-likelihood and its optimization.

The objective for a set of sentences is

    Σ log p(x | T) − ξ · Σ E[c(T′)] − ς · ‖θ‖²

(with the E term optionally squared).  Gradients come from reverse-mode
differentiation through the inside pass, in float64.
"""
from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import torch

from .attach import AttachWeights
from .channel import L2R, R2L, ChannelParams
from .corpus import AnnotatedSentence, PunctemeVocab, estimate_vocab
from .forest import SentencePlan, inside_tensors, plan_sentence, prior_unmatched
from .model import PunctuationModel
from .semiring import DTYPE

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.07
    batch_size: int = 5
    sentences_per_epoch: int = 400
    epochs: int = 30
    l2: float = 1.0                  # ς
    pr: float = 10.0                 # ξ
    square_pr: bool = False
    pr_mode: str = "posterior"       # or "prior": the literal prior-weighted accumulation
    seed: int = 0
    direction: str = L2R             # l2r, r2l or auto
    channel: str = "learned"         # or identity
    max_skip_rate: float = 0.01
    anchor: ChannelParams | None = None   # pull φ toward these scores
    anchor_strength: float = 0.0

    def __post_init__(self):
        for name in ("batch_size", "sentences_per_epoch", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be ≥ 1")
        if self.l2 < 0 or self.pr < 0:
            raise ValueError("regularization coefficients must be ≥ 0")
        if self.direction not in (L2R, R2L, "auto"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.channel not in ("learned", "identity"):
            raise ValueError(f"unknown channel mode {self.channel!r}")
        if self.pr_mode not in ("posterior", "prior"):
            raise ValueError(f"unknown pr_mode {self.pr_mode!r}")


@dataclass
class GradientBuffer:
    theta: dict
    phi: np.ndarray


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    dev_loglik: float
    dev_perplexity: float
    skipped: int


@dataclass
class TrainResult:
    model: PunctuationModel
    best_model: PunctuationModel
    best_epoch: int
    log: list = field(default_factory=list)
    direction_scores: dict = field(default_factory=dict)

    def log_tsv(self) -> str:
        rows = ["epoch\tobjective\tdev_loglik\tdev_perplexity\tskipped"]
        for r in self.log:
            rows.append(f"{r.epoch}\t{r.objective:.10g}\t{r.dev_loglik:.10g}\t"
                        f"{r.dev_perplexity:.10g}\t{r.skipped}")
        return "\n".join(rows) + "\n"


class FeatureIndex:
    """Feature name ↔ dense id; id 0 is a padding slot that always weighs 0."""

    def __init__(self):
        self.names: list = [""]
        self.ids: dict = {}

    def add(self, name: str) -> int:
        if name not in self.ids:
            self.ids[name] = len(self.names)
            self.names.append(name)
        return self.ids[name]

    def get(self, name: str) -> int:
        return self.ids.get(name, 0)

    def __len__(self) -> int:
        return len(self.names)


def _node_id_matrix(feats: Sequence[frozenset], lookup) -> torch.Tensor:
    # ids are assigned in name order so initialization does not depend on set order
    rows = [sorted(lookup(f) for f in sorted(fs)) for fs in feats]
    width = max((len(r) for r in rows), default=0) or 1
    mat = np.zeros((len(rows), width), dtype=np.int64)
    for i, r in enumerate(rows):
        mat[i, :len(r)] = r
    return torch.as_tensor(mat)


class ParamState:
    """Dense trainable tensors for θ and φ plus the sentence plans they score."""

    def __init__(self, vocab: PunctemeVocab, direction: str, identity: bool = False):
        self.vocab = vocab
        self.direction = direction
        self.identity = identity
        self.index = FeatureIndex()
        s = len(vocab.alphabet)
        self.theta = torch.zeros(1, dtype=DTYPE, requires_grad=True)
        self.phi = torch.zeros((s, s, 4), dtype=DTYPE, requires_grad=not identity)

    # -- plans -------------------------------------------------------------
    def plan(self, sentence: AnnotatedSentence, grow: bool, **kw) -> SentencePlan:
        p = plan_sentence(sentence, self.vocab, self.direction, **kw)
        lookup = self.index.add if grow else self.index.get
        p.feature_ids = {w: _node_id_matrix(nd.feats, lookup) for w, nd in p.nodes.items()}
        return p

    def reindex(self, plan: SentencePlan) -> None:
        plan.feature_ids = {w: _node_id_matrix(nd.feats, self.index.get)
                            for w, nd in plan.nodes.items()}

    # -- parameters ----------------------------------------------------------
    def init_params(self, rng: np.random.Generator | None, theta0: dict | None = None,
                    phi0: np.ndarray | None = None) -> None:
        f = len(self.index)
        if rng is not None:
            th = rng.standard_normal(f)
        else:
            th = np.zeros(f)
        if theta0:
            for name, w in theta0.items():
                i = self.index.get(name)
                if i:
                    th[i] = w
        th[0] = 0.0
        s = len(self.vocab.alphabet)
        if phi0 is not None:
            ph = np.array(phi0, dtype=np.float64)
        elif rng is not None and not self.identity:
            ph = rng.standard_normal((s, s, 4))
        else:
            ph = np.zeros((s, s, 4))
        self.theta = torch.tensor(th, dtype=DTYPE, requires_grad=True)
        self.phi = torch.tensor(ph, dtype=DTYPE, requires_grad=not self.identity)

    def flat_probs(self) -> torch.Tensor:
        s = len(self.vocab.alphabet)
        if self.identity:
            p = torch.zeros((s, s, 4), dtype=DTYPE)
            p[..., 0] = 1.0
        else:
            p = torch.softmax(self.phi, dim=-1)
        return torch.cat([p.reshape(-1), torch.ones(1, dtype=DTYPE)])

    def pair_logp(self, plan: SentencePlan) -> dict:
        th = self.theta.clone()
        th = th.index_put((torch.tensor([0]),), torch.zeros(1, dtype=DTYPE))
        return {w: torch.log_softmax(th[ids].sum(dim=1), dim=0)
                for w, ids in plan.feature_ids.items()}

    def to_model(self, meta: dict | None = None) -> PunctuationModel:
        th = self.theta.detach().numpy()
        weights = {name: float(th[i]) for i, name in enumerate(self.index.names) if i}
        phi = ChannelParams(self.vocab.alphabet, self.phi.detach().numpy().copy(),
                            self.direction, self.identity)
        return PunctuationModel(self.vocab, AttachWeights(weights), phi, dict(meta or {}))


def sentence_terms(state: ParamState, plan: SentencePlan, pr_mode: str = "posterior",
                   need_expectation: bool = True) -> tuple:
    """``(log p(x|T), E[c])`` as differentiable tensors."""
    flat = state.flat_probs()
    logp = state.pair_logp(plan)
    ll, ec = inside_tensors(plan, flat, logp, expectation=need_expectation and pr_mode == "posterior")
    if pr_mode == "prior" and need_expectation:
        ec = prior_unmatched(plan, logp)
    return ll, ec


def batch_objective(state: ParamState, plans: Sequence[SentencePlan], config: TrainConfig,
                    l2_weight: float = 1.0) -> tuple:
    """Differentiable objective over ``plans``; returns ``(objective, skipped)``.

    ``l2_weight`` scales the ‖θ‖² term (the training loop passes the batch's
    share of the corpus so one epoch sees the penalty once per corpus pass).
    """
    total_ll = torch.zeros((), dtype=DTYPE)
    total_e = torch.zeros((), dtype=DTYPE)
    skipped = 0
    need_e = config.pr > 0
    for plan in plans:
        ll, ec = sentence_terms(state, plan, config.pr_mode, need_e)
        if not torch.isfinite(ll):
            skipped += 1
            continue
        total_ll = total_ll + ll
        if need_e:
            total_e = total_e + ec
    pr_term = total_e ** 2 if config.square_pr else total_e
    obj = total_ll - config.pr * pr_term - config.l2 * l2_weight * (state.theta[1:] ** 2).sum()
    if config.anchor is not None and config.anchor_strength > 0 and not state.identity:
        anchor = torch.as_tensor(config.anchor.scores, dtype=DTYPE)
        obj = obj - config.anchor_strength * ((state.phi - anchor) ** 2).sum()
    return obj, skipped


# ---------------------------------------------------------------------------
# Functional interface over model objects (used by tests and tools)
# ---------------------------------------------------------------------------

def _state_for(batch: Sequence[AnnotatedSentence], model: PunctuationModel) -> tuple:
    state = ParamState(model.vocab, model.phi.direction, model.phi.identity)
    plans = [state.plan(s, grow=True) for s in batch]
    for name in model.theta.weights:
        state.index.add(name)
    for p in plans:
        state.reindex(p)
    state.init_params(None, model.theta.weights, model.phi.scores)
    return state, plans


def objective(batch: Sequence[AnnotatedSentence], model: PunctuationModel,
              config: TrainConfig) -> float:
    """The objective value; zero-likelihood sentences are skipped."""
    state, plans = _state_for(batch, model)
    with torch.no_grad():
        obj, _ = batch_objective(state, plans, config)
    return float(obj)


def gradient(batch: Sequence[AnnotatedSentence], model: PunctuationModel,
             config: TrainConfig) -> GradientBuffer:
    """Gradient of :func:`objective` with respect to every θ entry touched by
    the batch or present in the model, and every raw φ score."""
    state, plans = _state_for(batch, model)
    obj, _ = batch_objective(state, plans, config)
    obj.backward()
    g = state.theta.grad.numpy()
    dtheta = {name: float(g[i]) for i, name in enumerate(state.index.names) if i}
    dphi = (state.phi.grad.numpy().copy() if state.phi.grad is not None
            else np.zeros_like(model.phi.scores))
    return GradientBuffer(dtheta, dphi)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def sentence_rng(seed: int, sent_id: str) -> np.random.Generator:
    """Per-sentence random stream derived from the root seed and the sentence id."""
    return np.random.default_rng([seed, zlib.crc32(sent_id.encode("utf-8"))])


def _evaluate(state: ParamState, plans: Sequence[SentencePlan]) -> tuple:
    """(total log-likelihood, slot count, excluded count) on explainable sentences."""
    total, slots, excluded = 0.0, 0, 0
    with torch.no_grad():
        for p in plans:
            ll, _ = sentence_terms(state, p, need_expectation=False)
            ll = float(ll)
            if not math.isfinite(ll):
                excluded += 1
                continue
            total += ll
            slots += p.tree.n + 1
    return total, slots, excluded


def _train_direction(train: Sequence[AnnotatedSentence], dev: Sequence[AnnotatedSentence],
                     vocab: PunctemeVocab, config: TrainConfig, direction: str,
                     init: PunctuationModel | None, progress,
                     originals: Mapping[str, Mapping] | None = None,
                     on_step=None) -> TrainResult:
    identity = config.channel == "identity"
    state = ParamState(vocab, direction, identity)
    originals = originals or {}
    plans = [state.plan(s, grow=True, original=originals.get(s.sent_id)) for s in train]
    if init is not None:
        for name in init.theta.weights:
            state.index.add(name)
        for p in plans:
            state.reindex(p)
    dev_plans = [state.plan(s, grow=False, original=originals.get(s.sent_id)) for s in dev]
    rng = np.random.default_rng(config.seed)
    state.init_params(rng, init.theta.weights if init else None,
                      init.phi.scores if init is not None and not identity else None)
    params = [state.theta] + ([] if identity else [state.phi])
    opt = torch.optim.Adam(params, lr=config.learning_rate)
    per_epoch = min(config.sentences_per_epoch, len(plans))
    l2_weight = config.batch_size / max(len(plans), config.batch_size)
    meta = {"direction": direction, "seed": str(config.seed), "l2": repr(config.l2),
            "pr": repr(config.pr), "square_pr": str(config.square_pr)}
    records = []
    best = (-math.inf, 0, state.to_model(meta))
    for epoch in range(1, config.epochs + 1):
        order = rng.choice(len(plans), size=per_epoch, replace=False)
        epoch_obj, skipped = 0.0, 0
        for start in range(0, per_epoch, config.batch_size):
            batch = [plans[t] for t in order[start:start + config.batch_size]]
            opt.zero_grad()
            obj, sk = batch_objective(state, batch, config, l2_weight)
            skipped += sk
            (-obj).backward()
            opt.step()
            if on_step is not None:
                on_step(state)
            epoch_obj += float(obj.detach())
        if skipped > config.max_skip_rate * per_epoch:
            raise TrainingError(f"epoch {epoch}: {skipped}/{per_epoch} training sentences have "
                                "zero likelihood; check the pair inventories")
        dev_ll, dev_slots, _ = _evaluate(state, dev_plans) if dev_plans else (0.0, 0, 0)
        ppl = math.exp(-dev_ll / dev_slots) if dev_slots else math.nan
        rec = EpochRecord(epoch, epoch_obj, dev_ll, ppl, skipped)
        records.append(rec)
        log.info("dir=%s epoch=%d objective=%.4f dev_ll=%.4f dev_ppl=%.5f skipped=%d",
                 direction, epoch, epoch_obj, dev_ll, ppl, skipped)
        if progress is not None:
            progress(rec)
        if dev_ll > best[0] or not dev_plans:
            best = (dev_ll, epoch, state.to_model(meta))
    final = state.to_model(meta)
    return TrainResult(final, best[2], best[1], records)


def train(treebank: Sequence[AnnotatedSentence], config: TrainConfig | None = None,
          dev: Sequence[AnnotatedSentence] = (), vocab: PunctemeVocab | None = None,
          init: PunctuationModel | None = None, progress=None,
          originals: Mapping[str, Mapping] | None = None, on_step=None) -> TrainResult:
    """Fit θ and φ with Adam; ``direction='auto'`` keeps the better dev direction.

    ``originals`` maps sentence id to the ``(l', r')`` per node recovered from
    an errorful version of the sentence; it switches on the correction
    features for that sentence.  ``on_step`` is called with the parameter
    state after every optimizer step.
    """
    config = config or TrainConfig()
    if not treebank:
        raise TrainingError("empty training treebank")
    vocab = vocab or estimate_vocab(treebank)
    if config.direction != "auto":
        return _train_direction(treebank, dev, vocab, config, config.direction, init, progress,
                                originals, on_step)
    results = {}
    for d in (L2R, R2L):
        results[d] = _train_direction(treebank, dev, vocab, replace(config, direction=d), d,
                                      init, progress, originals, on_step)
    scores = {d: (r.log[-1].dev_perplexity if r.log else math.inf) for d, r in results.items()}
    winner = min(scores, key=lambda d: (math.inf if math.isnan(scores[d]) else scores[d]))
    out = results[winner]
    out.direction_scores = scores
    return out
