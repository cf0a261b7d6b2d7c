"""Predicting a canonical tester from detailing statistics alone.

:func:`simulate` draws one matrix the way the simulator does: ``q`` types,
then ``s`` labels, then independent cells. :func:`simulated_distribution_exact`
and :func:`accept_probability` evaluate the same process exactly by
enumeration. Given the column types the rows are independent, which keeps
the enumeration a product instead of a sum over label tuples.

:func:`acceptance_tensor` is the float workhorse for searching over many
type distributions: for a fixed weight distribution and a fixed list of
type vectors it returns ``f[t_1, ..., t_q] = E[alpha(M) | types]``, so the
acceptance probability of any weighting ``w`` is the contraction of
``w^{(x)q}`` with ``f``.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from fractions import Fraction

import numpy as np

from .core_dist import Distribution
from .errors import DimensionMismatch, TooLarge
from .oracle import CanonicalTester, QueryMatrix, matrix_from_code
from .typedist import TypeDistribution

ENUM_GUARD = 10**7


def _label_positions(eta: Mapping, lam: TypeDistribution) -> dict:
    pos = {a: j for j, a in enumerate(lam.labels)}
    missing = [a for a in eta if eta[a] and a not in pos]
    if missing:
        raise DimensionMismatch(f"labels {missing[:3]} carry weight but have no type coordinate")
    return pos


def simulate(s: int, q: int, eta: Distribution, lam: TypeDistribution, rng: np.random.Generator) -> QueryMatrix:
    pos = _label_positions(eta, lam)
    types = lam.dist.sample(rng, q)
    labels = eta.sample(rng, s)
    probs = np.array([[float(t[pos[a]]) for t in types] for a in labels]).reshape(s, q)
    cells = rng.random((s, q)) < probs
    return tuple(tuple(int(b) for b in row) for row in cells)


def _row_law(eta: Distribution, cols: Sequence[tuple], pos: dict) -> dict:
    """Law of one row given the column types."""
    out: dict = {}
    q = len(cols)
    for a, w in eta.items():
        p = [t[pos[a]] for t in cols]
        for bits in itertools.product((0, 1), repeat=q):
            pr = w
            for b, x in zip(bits, p):
                pr = pr * (x if b else 1 - x)
            if pr:
                out[bits] = out.get(bits, 0) + pr
    return out


def simulated_distribution_exact(s: int, q: int, eta: Distribution, lam: TypeDistribution,
                                 guard: int = ENUM_GUARD) -> Distribution:
    """The distribution of :func:`simulate`'s output, by enumeration."""
    size = len(eta) ** s * len(lam.dist) ** q * 2 ** (s * q)
    if size > guard:
        raise TooLarge(f"{size} terms exceed the guard {guard}")
    pos = _label_positions(eta, lam)
    total: dict = {}
    for cols in itertools.product(lam.dist.items(), repeat=q):
        weight = 1
        for _, w in cols:
            weight = weight * w
        row = _row_law(eta, [t for t, _ in cols], pos)
        layer = {(): weight}
        for _ in range(s):
            layer = {m + (r,): w * v for m, w in layer.items() for r, v in row.items()}
        for m, w in layer.items():
            total[m] = total.get(m, 0) + w
    return Distribution(total, check=eta.exact and lam.dist.exact)


def accept_probability(s: int, q: int, eta: Distribution, lam: TypeDistribution, tester: CanonicalTester,
                       guard: int = ENUM_GUARD):
    """``E_{M ~ simulated}[alpha(M)]``, computed without any oracle access."""
    d = simulated_distribution_exact(s, q, eta, lam, guard)
    return sum(w * tester.alpha(m) for m, w in d.items())


def accept_probability_mc(s: int, q: int, eta: Distribution, lam: TypeDistribution, tester: CanonicalTester,
                          trials: int, rng: np.random.Generator) -> float:
    return sum(float(tester.alpha(simulate(s, q, eta, lam, rng))) for _ in range(trials)) / trials


# --------------------------------------------------------------------------
# vectorized path


def acceptance_tensor(eta: Distribution, labels: Sequence, vectors: Sequence[tuple], tester: CanonicalTester) -> np.ndarray:
    """``f`` of shape ``(K,) * q`` with ``K = len(vectors)``.

    ``vectors`` are type vectors aligned with ``labels``; ``eta`` weights
    those labels.
    """
    s, q = tester.s, tester.q
    k = len(vectors)
    if k**q * 2 ** (s * q) > ENUM_GUARD * 10:
        raise TooLarge(f"acceptance tensor with {k}^{q} columns and 2^{s * q} matrices")
    pos = {a: j for j, a in enumerate(labels)}
    live = [a for a in eta if eta[a]]
    for a in live:
        if a not in pos:
            raise DimensionMismatch(f"label {a!r} carries weight but has no type coordinate")
    w = np.array([float(eta[a]) for a in live])
    p1 = np.array([[float(t[pos[a]]) for a in live] for t in vectors]).reshape(k, len(live))
    # per-label probability of every row pattern, for every q-tuple of vectors
    per_label = np.ones((1, len(live), 1))
    for _ in range(q):
        cell = np.stack([1 - p1, p1], axis=-1)  # (K, labels, 2)
        per_label = (per_label[:, None, :, :, None] * cell[None, :, :, None, :]).reshape(
            per_label.shape[0] * k, len(live), -1)
    rows = np.einsum("a,tap->tp", w, per_label)  # (K^q, 2^q)
    probs = rows
    for _ in range(s - 1):
        probs = (probs[:, :, None] * rows[:, None, :]).reshape(rows.shape[0], -1)
    f = probs @ tester.alpha_table()
    return f.reshape((k,) * q)


def contract(weights: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Acceptance of a batch of weightings: ``weights`` is ``(C, K)``, returns ``(C,)``."""
    out = np.broadcast_to(f, (weights.shape[0],) + f.shape)
    for _ in range(f.ndim):
        out = np.einsum("c...k,ck->c...", out, weights)
    return out


def accept_probability_fast(eta: Distribution, lam: TypeDistribution, tester: CanonicalTester) -> float:
    vectors = list(lam.dist)
    f = acceptance_tensor(eta, lam.labels, vectors, tester)
    w = np.array([[float(lam.dist[t]) for t in vectors]])
    return float(contract(w, f)[0])


__all__ = [
    "simulate",
    "simulated_distribution_exact",
    "accept_probability",
    "accept_probability_mc",
    "acceptance_tensor",
    "contract",
    "accept_probability_fast",
    "matrix_from_code",
    "Fraction",
]
