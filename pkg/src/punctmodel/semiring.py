"""Semirings for the tree inside recursion.

Each semiring has an element-level algebra (``zero``, ``one``, ``plus``,
``times``) and a vectorized layer used by :mod:`punctmodel.forest`.  The
vectorized layer works on state vectors of the slot automata and on
*factored* node matrices ``IN(w) = Aᵀ P B`` where row ``A[l]`` holds the
left-slot vector for left puncteme ``l``, ``B[r]`` the right-slot vector for
right puncteme ``r``, and ``P[l, r]`` the attachment weight of the pair.

Derivations are cons cells: ``None`` is the empty derivation, ``Leaf`` an
attachment decision, and ``Cat`` an ordered concatenation that shares its
children rather than copying them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import torch

DTYPE = torch.float64


@dataclass(frozen=True)
class Leaf:
    node: int
    left: tuple
    right: tuple


@dataclass(frozen=True)
class Cat:
    first: Any
    second: Any


def cat(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return Cat(a, b)


def flatten(d) -> list:
    """Leaves of a derivation, left to right."""
    out, stack = [], [d]
    while stack:
        x = stack.pop()
        if x is None:
            continue
        if isinstance(x, Cat):
            stack.append(x.second)
            stack.append(x.first)
        else:
            out.append(x)
    return out


# ---------------------------------------------------------------------------
# Element-level algebras
# ---------------------------------------------------------------------------

class Real:
    """Ordinary (+, ×) over probabilities."""

    zero, one = 0.0, 1.0

    @staticmethod
    def plus(a, b):
        return a + b

    @staticmethod
    def times(a, b):
        return a * b


class Expectation:
    """First-order expectation semiring over pairs ``(p, p·c)``."""

    zero, one = (0.0, 0.0), (1.0, 0.0)

    @staticmethod
    def plus(a, b):
        return (a[0] + b[0], a[1] + b[1])

    @staticmethod
    def times(a, b):
        return (a[0] * b[0], a[0] * b[1] + a[1] * b[0])

    @staticmethod
    def lift(p: float, c: float):
        return (p, p * c)


class MaxDerivation:
    """Best-derivation semiring over ``(log weight, derivation)``.

    ``plus`` keeps its left argument on ties.
    """

    zero, one = (-math.inf, None), (0.0, None)

    @staticmethod
    def plus(a, b):
        return a if a[0] >= b[0] else b

    @staticmethod
    def times(a, b):
        if a[0] == -math.inf or b[0] == -math.inf:
            return MaxDerivation.zero
        return (a[0] + b[0], cat(a[1], b[1]))


class SampleDerivation:
    """Sampling semiring: ``plus`` keeps each argument with probability
    proportional to its weight, so repeated sums draw a derivation in
    proportion to its product weight."""

    zero, one = (0.0, None), (1.0, None)

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def plus(self, a, b):
        total = a[0] + b[0]
        if total == 0.0:
            return (0.0, None)
        return (total, a[1]) if self.rng.random() < a[0] / total else (total, b[1])

    @staticmethod
    def times(a, b):
        if a[0] == 0.0 or b[0] == 0.0:
            return (0.0, None)
        return (a[0] * b[0], cat(a[1], b[1]))


# ---------------------------------------------------------------------------
# Vectorized layers
# ---------------------------------------------------------------------------

@dataclass
class Factor:
    """Factored node matrix; fields are backend-specific."""

    A: Any
    P: Any
    B: Any
    leaves: Any = None


def _safe_max(t: torch.Tensor) -> torch.Tensor:
    m = t.detach().abs().max() if t.numel() else torch.tensor(0.0, dtype=DTYPE)
    return torch.where(m > 0, m, torch.ones_like(m))


class RealOps:
    """Sum-product over torch tensors (differentiable)."""

    backend = "torch"

    def lift(self, v: np.ndarray):
        return torch.as_tensor(v, dtype=DTYPE)

    def matvec(self, m, v):
        return m @ v

    def vecmat(self, v, m):
        return v @ m

    def stack(self, vs):
        return torch.stack(vs)

    def factor(self, A, B, logp, cost, leaves):
        return Factor(A, torch.exp(logp), B)

    def fmatvec(self, f: Factor, v):
        return f.A.T @ (f.P @ (f.B @ v))

    def fvecmat(self, v, f: Factor):
        return ((f.A @ v) @ f.P) @ f.B

    def dot(self, u, v):
        return u @ v

    def rescale(self, v):
        s = _safe_max(v)
        return v / s, torch.log(s)


class ExpectationOps(RealOps):
    """Pairs ``(p, r)`` of tensors; ``r`` accumulates ``p·c``."""

    def lift(self, v):
        t = torch.as_tensor(v, dtype=DTYPE)
        return (t, torch.zeros_like(t))

    def matvec(self, m, v):
        return (m @ v[0], m @ v[1])

    def vecmat(self, v, m):
        return (v[0] @ m, v[1] @ m)

    def stack(self, vs):
        return (torch.stack([v[0] for v in vs]), torch.stack([v[1] for v in vs]))

    def factor(self, A, B, logp, cost, leaves):
        p = torch.exp(logp)
        return Factor(A, (p, p * torch.as_tensor(cost, dtype=DTYPE)), B)

    def fmatvec(self, f: Factor, v):
        (ap, ar), (pp, pr), (bp, br) = f.A, f.P, f.B
        yp, yr = bp @ v[0], bp @ v[1] + br @ v[0]
        zp, zr = pp @ yp, pp @ yr + pr @ yp
        return (ap.T @ zp, ap.T @ zr + ar.T @ zp)

    def fvecmat(self, v, f: Factor):
        (ap, ar), (pp, pr), (bp, br) = f.A, f.P, f.B
        yp, yr = ap @ v[0], ap @ v[1] + ar @ v[0]
        zp, zr = yp @ pp, yr @ pp + yp @ pr
        return (zp @ bp, zr @ bp + zp @ br)

    def dot(self, u, v):
        return (u[0] @ v[0], u[0] @ v[1] + u[1] @ v[0])

    def rescale(self, v):
        s = _safe_max(v[0])
        return (v[0] / s, v[1] / s), torch.log(s)


def _log(m: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(m)


class MaxOps:
    """Max-product in log space with derivation back-pointers (numpy)."""

    backend = "numpy"

    def lift(self, v):
        v = np.asarray(v, dtype=np.float64)
        return (_log(v), np.full(v.shape, None, dtype=object))

    def _best(self, scores: np.ndarray, left_d, right_d):
        """``scores[row, col]``; pick the first maximal column per row."""
        if scores.shape[1] == 0:
            return np.full(scores.shape[0], -np.inf), np.full(scores.shape[0], None, dtype=object)
        best = np.argmax(scores, axis=1)
        val = scores[np.arange(scores.shape[0]), best]
        der = np.empty(scores.shape[0], dtype=object)
        for row, col in enumerate(best):
            der[row] = None if val[row] == -np.inf else cat(left_d(row, col), right_d(row, col))
        return val, der

    def matvec(self, m, v):
        lm = _log(m)
        return self._best(lm + v[0][None, :], lambda s, t: None, lambda s, t: v[1][t])

    def vecmat(self, v, m):
        lm = _log(m)
        return self._best((v[0][:, None] + lm).T, lambda s, t: v[1][t], lambda s, t: None)

    def stack(self, vs):
        return (np.stack([v[0] for v in vs]), np.stack([v[1] for v in vs]))

    def factor(self, A, B, logp, cost, leaves):
        return Factor(A, np.asarray(logp, dtype=np.float64), B, leaves)

    def fmatvec(self, f: Factor, v):
        (a, ad), lp, (b, bd) = f.A, f.P, f.B
        y, yd = self._best(b + v[0][None, :], lambda r, t: bd[r, t], lambda r, t: v[1][t])
        z, zd = self._best(lp + y[None, :], lambda l, r: f.leaves[l][r], lambda l, r: yd[r])
        return self._best((a + z[:, None]).T, lambda s, l: ad[l, s], lambda s, l: zd[l])

    def fvecmat(self, v, f: Factor):
        (a, ad), lp, (b, bd) = f.A, f.P, f.B
        y, yd = self._best(a + v[0][None, :], lambda l, s: v[1][s], lambda l, s: ad[l, s])
        z, zd = self._best((lp + y[:, None]).T, lambda r, l: yd[l], lambda r, l: f.leaves[l][r])
        return self._best((b + z[:, None]).T, lambda t, r: zd[r], lambda t, r: bd[r, t])

    def dot(self, u, v):
        val, der = self._best((u[0] + v[0])[None, :], lambda _, t: u[1][t],
                              lambda _, t: v[1][t])
        return val[0], der[0]

    def rescale(self, v):
        return v, 0.0


class SampleOps:
    """Sum-product with a sampled derivation per entry (numpy)."""

    backend = "numpy"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def lift(self, v):
        v = np.asarray(v, dtype=np.float64)
        return (v.copy(), np.full(v.shape, None, dtype=object))

    def _pick(self, w: np.ndarray, left_d, right_d):
        """Row sums of ``w`` and, per row, a column drawn in proportion to ``w``."""
        tot = w.sum(axis=1)
        der = np.empty(w.shape[0], dtype=object)
        if w.shape[1] == 0:
            return tot, der
        u = self.rng.random(w.shape[0])
        cum = np.cumsum(w, axis=1)
        for row in range(w.shape[0]):
            if tot[row] <= 0.0:
                continue
            col = int(np.searchsorted(cum[row], u[row] * tot[row], side="right"))
            col = min(col, w.shape[1] - 1)
            while w[row, col] == 0.0 and col > 0:  # guard against round-off at the edge
                col -= 1
            der[row] = cat(left_d(row, col), right_d(row, col))
        return tot, der

    def matvec(self, m, v):
        return self._pick(m * v[0][None, :], lambda s, t: None, lambda s, t: v[1][t])

    def vecmat(self, v, m):
        return self._pick((v[0][:, None] * m).T, lambda s, t: v[1][t], lambda s, t: None)

    def stack(self, vs):
        return (np.stack([v[0] for v in vs]), np.stack([v[1] for v in vs]))

    def factor(self, A, B, logp, cost, leaves):
        return Factor(A, np.exp(np.asarray(logp, dtype=np.float64)), B, leaves)

    def fmatvec(self, f: Factor, v):
        (a, ad), p, (b, bd) = f.A, f.P, f.B
        y, yd = self._pick(b * v[0][None, :], lambda r, t: bd[r, t], lambda r, t: v[1][t])
        z, zd = self._pick(p * y[None, :], lambda l, r: f.leaves[l][r], lambda l, r: yd[r])
        return self._pick((a * z[:, None]).T, lambda s, l: ad[l, s], lambda s, l: zd[l])

    def fvecmat(self, v, f: Factor):
        (a, ad), p, (b, bd) = f.A, f.P, f.B
        y, yd = self._pick(a * v[0][None, :], lambda l, s: v[1][s], lambda l, s: ad[l, s])
        z, zd = self._pick((p * y[:, None]).T, lambda r, l: yd[l], lambda r, l: f.leaves[l][r])
        return self._pick((b * z[:, None]).T, lambda t, r: zd[r], lambda t, r: bd[r, t])

    def dot(self, u, v):
        tot, der = self._pick((u[0] * v[0])[None, :], lambda _, t: u[1][t], lambda _, t: v[1][t])
        return tot[0], der[0]

    def rescale(self, v):
        m = v[0].max() if v[0].size else 0.0
        if m <= 0.0:
            return v, 0.0
        return (v[0] / m, v[1]), float(np.log(m))
