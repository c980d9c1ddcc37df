"""Sliding-window noisy channel from underlying to surface slot punctuation.

A 2-token window slides over the underlying slot string.  For the window
``ab`` (``a`` pending, ``b`` just read) exactly one of four edits is chosen:

    keep          ab -> ab
    left absorb   ab -> b
    right absorb  ab -> a
    transpose     ab -> ba

Right-to-left channels are run as left-to-right channels on the reversed
string; their bigram parameters are indexed in processing order.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KEEP, LEFT_ABSORB, RIGHT_ABSORB, TRANSPOSE = range(4)
EDIT_NAMES = ("keep", "leftAbsorb", "rightAbsorb", "transpose")
L2R, R2L = "l2r", "r2l"
INITIAL, FINAL = "^Λ", "$"  # PFST boundary states


class UnknownSymbolError(KeyError):
    pass


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    z = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class ChannelParams:
    """Raw edit scores per ordered bigram of the punctuation alphabet.

    ``scores[ia, ib]`` holds the 4 unnormalized scores for the window
    ``(alphabet[ia], alphabet[ib])``.  With ``identity=True`` the channel is
    locked to ``keep`` (the ablation without a noisy channel).
    """

    alphabet: tuple
    scores: np.ndarray
    direction: str = L2R
    identity: bool = False
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.alphabet = tuple(self.alphabet)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        s = len(self.alphabet)
        if self.scores.shape != (s, s, 4):
            raise ValueError(f"scores must have shape {(s, s, 4)}, got {self.scores.shape}")
        if self.direction not in (L2R, R2L):
            raise ValueError(f"unknown direction {self.direction!r}")
        self.index = {a: i for i, a in enumerate(self.alphabet)}

    @classmethod
    def uniform(cls, alphabet: Sequence[str], direction: str = L2R) -> "ChannelParams":
        s = len(alphabet)
        return cls(tuple(alphabet), np.zeros((s, s, 4)), direction)

    @classmethod
    def random(cls, alphabet: Sequence[str], rng: np.random.Generator,
               direction: str = L2R) -> "ChannelParams":
        s = len(alphabet)
        return cls(tuple(alphabet), rng.standard_normal((s, s, 4)), direction)

    @classmethod
    def identity_channel(cls, alphabet: Sequence[str], direction: str = L2R) -> "ChannelParams":
        s = len(alphabet)
        return cls(tuple(alphabet), np.zeros((s, s, 4)), direction, identity=True)

    def probs(self) -> np.ndarray:
        """Edit probabilities, shape ``(|Σ|, |Σ|, 4)``."""
        if self.identity:
            p = np.zeros_like(self.scores)
            p[..., KEEP] = 1.0
            return p
        return softmax(self.scores)

    def idx(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise UnknownSymbolError(token) from None

    def set_rule(self, a: str, b: str, edit: int, prob: float = 1.0) -> None:
        """Make the window ``ab`` (processing order) pick ``edit`` with ``prob``;
        the remaining mass is spread evenly over the other edits."""
        ia, ib = self.idx(a), self.idx(b)
        if prob >= 1.0:
            row = np.full(4, -np.inf)
            row[edit] = 0.0
            # -inf is not representable for training; a large gap is exact in float64
            row[np.isinf(row)] = -800.0
        else:
            rest = (1.0 - prob) / 3.0
            row = np.log(np.full(4, rest))
            row[edit] = np.log(prob)
        self.scores[ia, ib] = row

    def set_surface_rule(self, a: str, b: str, output: Sequence[str], prob: float = 1.0) -> None:
        """Rewrite the bigram ``a b`` (reading order of the text) to ``output``
        with ``prob``, whatever the channel direction."""
        edit = natural_edit(a, b, output)
        if self.direction == R2L:
            # reversed processing sees the window (b, a); absorptions swap roles
            self.set_rule(b, a, {LEFT_ABSORB: RIGHT_ABSORB, RIGHT_ABSORB: LEFT_ABSORB}.get(edit, edit),
                          prob)
        else:
            self.set_rule(a, b, edit, prob)

    def copy(self) -> "ChannelParams":
        return ChannelParams(self.alphabet, self.scores.copy(), self.direction, self.identity)


def natural_edit(a: str, b: str, output: Sequence[str]) -> int:
    """The edit that turns ``a b`` into ``output`` for a left-to-right window."""
    outcomes = {KEEP: (a, b), LEFT_ABSORB: (b,), RIGHT_ABSORB: (a,), TRANSPOSE: (b, a)}
    for edit, result in outcomes.items():
        if result == tuple(output):
            return edit
    raise ValueError(f"no single edit rewrites {a} {b} to {' '.join(output)}")


def edit_distribution(a: str, b: str, phi: ChannelParams) -> np.ndarray:
    """The 4 edit probabilities (keep, leftAbsorb, rightAbsorb, transpose) for window ``ab``."""
    ia, ib = phi.idx(a), phi.idx(b)
    if phi.identity:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return softmax(phi.scores[ia, ib])


def apply_edit(pending: str, b: str, edit: int, out: list) -> str:
    """Apply one edit to the window; append emitted tokens to ``out``; return the new pending token."""
    if edit == KEEP:
        out.append(pending)
        return b
    if edit == LEFT_ABSORB:
        return b
    if edit == RIGHT_ABSORB:
        return pending
    out.append(b)
    return pending


def simulate(u: Sequence[str], phi: ChannelParams, rng: np.random.Generator | None = None,
             argmax: bool = False, trace: list | None = None) -> tuple:
    """Sample (or, with ``argmax``, greedily decode) a surface string for ``u``.

    ``trace`` collects ``(pending, b, edit)`` per window in processing order.
    """
    seq = list(u)[::-1] if phi.direction == R2L else list(u)
    out: list = []
    pending = None
    for b in seq:
        if pending is None:
            pending = b
            continue
        p = edit_distribution(pending, b, phi)
        edit = int(np.argmax(p)) if argmax else int(rng.choice(4, p=p))
        if trace is not None:
            trace.append((pending, b, edit))
        pending = apply_edit(pending, b, edit, out)
    if pending is not None:
        out.append(pending)
    return tuple(out[::-1]) if phi.direction == R2L else tuple(out)


def channel_prob(u: Sequence[str], x: Sequence[str], phi: ChannelParams) -> float:
    """p(x | u) summed over all edit sequences (forward DP over window states)."""
    u, x = tuple(u), tuple(x)
    if phi.direction == R2L:
        u, x = u[::-1], x[::-1]
    if not u:
        return 1.0 if not x else 0.0
    probs = phi.probs()
    # state: (pending token, number of surface tokens already emitted)
    states = {(u[0], 0): 1.0}
    phi.idx(u[0])
    for b in u[1:]:
        ib = phi.idx(b)
        nxt: dict = {}
        for (a, z), w in states.items():
            p = probs[phi.idx(a), ib]
            for edit in range(4):
                if p[edit] == 0.0:
                    continue
                out: list = []
                pending = apply_edit(a, b, edit, out)
                if tuple(out) != x[z:z + len(out)]:
                    continue
                key = (pending, z + len(out))
                nxt[key] = nxt.get(key, 0.0) + w * p[edit]
        states = nxt
    total = 0.0
    for (a, z), w in states.items():
        if z == len(x) - 1 and x[z] == a:
            total += w
    return total


# ---------------------------------------------------------------------------
# PFST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Arc:
    src: str
    inp: str
    out: tuple
    dst: str
    prob: float
    edits: tuple = ()  # (a, b, edit) parameter provenance; empty for boundary arcs


@dataclass
class Pfst:
    states: tuple
    arcs: tuple
    initial: str = INITIAL
    final: str = FINAL

    def arcs_from(self, state: str, inp: str) -> list:
        return [a for a in self.arcs if a.src == state and a.inp == inp]


def _arc_templates(alphabet: Sequence[str]) -> list:
    """Arc topology as ``(src, inp, out, dst, edits)``; probabilities attached later."""
    arcs = []
    for a in alphabet:
        arcs.append((INITIAL, a, (), a, ()))
        arcs.append((a, FINAL, (a,), FINAL, ()))
        for b in alphabet:
            if a == b:
                arcs.append((a, a, (a,), a, ((a, a, KEEP), (a, a, TRANSPOSE))))
                arcs.append((a, a, (), a, ((a, a, LEFT_ABSORB), (a, a, RIGHT_ABSORB))))
            else:
                arcs.append((a, b, (a,), b, ((a, b, KEEP),)))
                arcs.append((a, b, (), b, ((a, b, LEFT_ABSORB),)))
                arcs.append((a, b, (), a, ((a, b, RIGHT_ABSORB),)))
                arcs.append((a, b, (b,), a, ((a, b, TRANSPOSE),)))
    arcs.append((INITIAL, FINAL, (), FINAL, ()))
    return arcs


def build_pfst(phi: ChannelParams) -> Pfst:
    """The locally normalized PFST with ``|Σ| + 2`` states."""
    if not phi.alphabet:
        raise ValueError("empty alphabet")
    probs = phi.probs()
    arcs = []
    for src, inp, out, dst, edits in _arc_templates(phi.alphabet):
        p = sum(probs[phi.index[a], phi.index[b], e] for a, b, e in edits) if edits else 1.0
        arcs.append(Arc(src, inp, out, dst, float(p), edits))
    states = (INITIAL,) + tuple(phi.alphabet) + (FINAL,)
    return Pfst(states, tuple(arcs))


# ---------------------------------------------------------------------------
# Slot WFSA: compose the PFST with a straight-line acceptor of x, trim, project
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WfsaStructure:
    """Parameter-free topology of the slot WFSA for one surface string.

    Token arcs are stored as parallel arrays; ``param[i]`` is a flat index
    into the ``(|Σ|, |Σ|, 4)`` edit-probability array, and an arc whose
    weight is a sum of two edits appears twice.  ``start``/``final`` are the
    (constant) initial and final weight vectors.
    """

    states: tuple
    tok: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    param: np.ndarray
    start: np.ndarray
    final: np.ndarray
    n_tokens: int

    @property
    def n_states(self) -> int:
        return len(self.states)

    def reachable(self, puncteme: Sequence[int]) -> bool:
        """Whether some path reads the token-index sequence ``puncteme``."""
        cur = np.ones(self.n_states, dtype=bool)
        for t in puncteme:
            sel = self.tok == t
            nxt = np.zeros(self.n_states, dtype=bool)
            nxt[self.dst[sel][cur[self.src[sel]]]] = True
            cur = nxt
            if not cur.any():
                return False
        return True

    def materialize(self, probs: np.ndarray) -> np.ndarray:
        """Token matrices ``M[v]`` of shape ``(|Σ|, N, N)``."""
        m = np.zeros((self.n_tokens, self.n_states, self.n_states))
        np.add.at(m, (self.tok, self.src, self.dst), np.append(probs.reshape(-1), 1.0)[self.param])
        return m

    def transposed(self) -> "WfsaStructure":
        return WfsaStructure(self.states, self.tok, self.dst, self.src, self.param,
                             self.final, self.start, self.n_tokens)


@functools.lru_cache(maxsize=4096)
def wfsa_structure(alphabet: tuple, x: tuple, direction: str = L2R) -> WfsaStructure:
    """Build (and cache) the slot WFSA topology for surface string ``x``."""
    if direction == R2L:
        return _l2r_structure(alphabet, x[::-1]).transposed()
    return _l2r_structure(alphabet, x)


def _l2r_structure(alphabet: tuple, x: tuple) -> WfsaStructure:
    index = {a: i for i, a in enumerate(alphabet)}
    s = len(alphabet)
    m = len(x)
    # composed arcs (src, dst, token, param or -1); states are (pfst_state, z)
    token_arcs = []
    final_arcs = []
    init = (INITIAL, 0)
    frontier, seen = [init], {init}
    while frontier:
        y, z = frontier.pop()
        succ = []
        if y == INITIAL:
            if z == 0:
                for a in alphabet:
                    succ.append(((a, 0), a, -1))
                if m == 0:
                    final_arcs.append((y, z))
        else:
            if z == m - 1 and x[z] == y:
                final_arcs.append((y, z))
            for _, b, out, dst, edits in _arc_templates_from(alphabet, y):
                if out and (z >= m or x[z] != out[0]):
                    continue
                nz = z + len(out)
                for a_, b_, e in edits:
                    succ.append(((dst, nz), b, (index[a_] * s + index[b_]) * 4 + e))
        for state, tok, param in succ:
            token_arcs.append(((y, z), state, tok, param))
            if state not in seen:
                seen.add(state)
                frontier.append(state)
    goal = (FINAL, m)
    # co-accessibility: states that can reach the final state
    coacc = {st for st in final_arcs}
    rev: dict = {}
    for src, dst, _, _ in token_arcs:
        rev.setdefault(dst, set()).add(src)
    stack = list(coacc)
    while stack:
        st = stack.pop()
        for p in rev.get(st, ()):
            if p not in coacc:
                coacc.add(p)
                stack.append(p)
    if init not in coacc:
        states = (init,)
    else:
        order = [init]
        seen_o = {init}
        for src, dst, _, _ in token_arcs:  # insertion order = BFS-ish discovery
            for st in (src, dst):
                if st in coacc and st not in seen_o:
                    seen_o.add(st)
                    order.append(st)
        states = tuple(order) + (goal,)
    pos = {st: i for i, st in enumerate(states)}
    rows = [(pos[a], pos[b], index[t], p) for a, b, t, p in token_arcs if a in pos and b in pos]
    start = np.zeros(len(states))
    start[0] = 1.0
    final = np.zeros(len(states))
    for st in final_arcs:
        if st in pos:
            final[pos[st]] += 1.0
    src = np.array([r[0] for r in rows], dtype=np.int64)
    dst = np.array([r[1] for r in rows], dtype=np.int64)
    tok = np.array([r[2] for r in rows], dtype=np.int64)
    param = np.array([r[3] for r in rows], dtype=np.int64)
    # boundary arcs out of the initial state have weight 1; give them a sentinel param
    param = np.where(param < 0, s * s * 4, param)
    return WfsaStructure(states, tok, src, dst, param, start, final, s)


def _arc_templates_from(alphabet: tuple, a: str) -> list:
    out = []
    for b in alphabet:
        if a == b:
            out.append((a, a, (a,), a, ((a, a, KEEP), (a, a, TRANSPOSE))))
            out.append((a, a, (), a, ((a, a, LEFT_ABSORB), (a, a, RIGHT_ABSORB))))
        else:
            out.append((a, b, (a,), b, ((a, b, KEEP),)))
            out.append((a, b, (), b, ((a, b, LEFT_ABSORB),)))
            out.append((a, b, (), a, ((a, b, RIGHT_ABSORB),)))
            out.append((a, b, (b,), a, ((a, b, TRANSPOSE),)))
    return out


def flat_probs(phi: ChannelParams) -> np.ndarray:
    """Edit probabilities flattened, with a trailing 1.0 for boundary arcs."""
    return np.append(phi.probs().reshape(-1), 1.0)


@dataclass
class SlotWfsa:
    """Matrix representation of all underlying strings explaining one surface slot."""

    structure: WfsaStructure
    alphabet: tuple
    token_matrices: np.ndarray  # (|Σ|, N, N)
    start: np.ndarray
    final: np.ndarray

    @property
    def n_states(self) -> int:
        return self.structure.n_states

    def matrix(self, token: str) -> np.ndarray:
        try:
            return self.token_matrices[self.alphabet.index(token)]
        except ValueError:
            raise UnknownSymbolError(token) from None

    def weight(self, u: Sequence[str]) -> float:
        return float(self.start @ puncteme_matrix(self, u) @ self.final)


def slot_wfsa(x: Sequence[str], phi: ChannelParams) -> SlotWfsa:
    st = wfsa_structure(phi.alphabet, tuple(x), phi.direction)
    mats = np.zeros((len(phi.alphabet), st.n_states, st.n_states))
    np.add.at(mats, (st.tok, st.src, st.dst), flat_probs(phi)[st.param])
    return SlotWfsa(st, phi.alphabet, mats, st.start.copy(), st.final.copy())


def puncteme_matrix(wfsa: SlotWfsa, p: Sequence[str]) -> np.ndarray:
    """M(p) = M(p_1) ... M(p_|p|); the identity for the empty puncteme."""
    out = np.eye(wfsa.n_states)
    for tok in p:
        out = out @ wfsa.matrix(tok)
    return out
