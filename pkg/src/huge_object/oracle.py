"""Huge Object access with query accounting, and canonical testers.

Algorithms only ever see an oracle's handles and the bits they pay for.
The distribution itself lives in ``_hidden`` and nothing outside this
module reads it.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO

import numpy as np

from .core_dist import Distribution, bit_length, bit_matrix
from .errors import IndexOutOfRange, TooLarge, UnknownHandle

QueryMatrix = tuple  # tuple of s rows, each a tuple of q ints in {0, 1}
ENUM_GUARD = 10**6


class HugeObjectOracle:
    """Sample and query access to a hidden distribution over ``{0,1}^n``."""

    def __init__(self, mu: Distribution, rng: np.random.Generator, transcript: IO[str] | None = None):
        self._hidden = mu
        self._n = bit_length(mu)
        self._rng = rng
        self._rows: list[str] = []
        self._transcript = transcript
        self.samples_drawn = 0
        self.queries_made = 0

    @property
    def n(self) -> int:
        return self._n

    def counters(self) -> dict:
        return {"samples": self.samples_drawn, "queries": self.queries_made}

    def _log(self, **rec):
        if self._transcript is not None:
            self._transcript.write(json.dumps(rec) + "\n")

    def draw_samples(self, m: int) -> list[int]:
        """Draw ``m`` independent samples; returns their handles."""
        drawn = self._hidden.sample(self._rng, m) if m else []
        start = len(self._rows)
        self._rows.extend(drawn)
        self.samples_drawn += m
        handles = list(range(start, start + m))
        for h in handles:
            self._log(op="sample", handle=h)
        return handles

    def draw_sample(self) -> int:
        return self.draw_samples(1)[0]

    def _check(self, handles: Sequence[int], indices: Sequence[int]):
        for h in handles:
            if not 0 <= h < len(self._rows):
                raise UnknownHandle(h)
        for i in indices:
            if not 0 <= i < self._n:
                raise IndexOutOfRange(f"coordinate {i} outside [0, {self._n})")

    def query(self, handle: int, i: int) -> int:
        self._check([handle], [i])
        self.queries_made += 1
        bit = int(self._rows[handle][i])
        self._log(op="query", handle=handle, index=int(i), bit=bit)
        return bit

    def query_many(self, handles: Sequence[int], indices: Sequence[int]) -> np.ndarray:
        """Query every index of every sample: a ``len(handles) x len(indices)`` bit matrix.

        Costs ``len(handles) * len(indices)`` queries.
        """
        handles = [int(h) for h in handles]
        indices = [int(i) for i in indices]
        self._check(handles, indices)
        self.queries_made += len(handles) * len(indices)
        if not handles or not indices:
            return np.zeros((len(handles), len(indices)), dtype=np.uint8)
        rows = bit_matrix([self._rows[h] for h in handles], self._n)
        out = rows[:, indices]
        if self._transcript is not None:
            for r, h in enumerate(handles):
                for c, i in enumerate(indices):
                    self._log(op="query", handle=h, index=i, bit=int(out[r, c]))
        return out


# --------------------------------------------------------------------------
# canonical testers


def matrix_code(m: QueryMatrix) -> int:
    """Row-major bits of ``m`` read as a binary number, first cell most significant."""
    code = 0
    for row in m:
        for b in row:
            code = 2 * code + int(b)
    return code


def matrix_from_code(code: int, s: int, q: int) -> QueryMatrix:
    bits = format(code, f"0{s * q}b") if s * q else ""
    return tuple(tuple(int(b) for b in bits[r * q:(r + 1) * q]) for r in range(s))


@dataclass(frozen=True)
class CanonicalTester:
    """An ``(s, q)`` canonical tester with acceptance function ``alpha``."""

    s: int
    q: int
    alpha: Callable[[QueryMatrix], object]
    eps: float | None = None
    name: str = "custom"
    _table: list = field(default_factory=list, compare=False, repr=False)

    def alpha_table(self) -> np.ndarray:
        """``alpha`` on every matrix, indexed by :func:`matrix_code`."""
        if not self._table:
            if self.s * self.q > 20:
                raise TooLarge(f"2^{self.s * self.q} matrices")
            vals = [float(self.alpha(matrix_from_code(c, self.s, self.q))) for c in range(2 ** (self.s * self.q))]
            self._table.append(np.array(vals))
        return self._table[0]


def rows_equal(s: int, q: int, eps: float | None = None) -> CanonicalTester:
    """Accept exactly when all sampled rows agree (point-mass property)."""
    return CanonicalTester(s, q, lambda m: 1 if all(r == m[0] for r in m) else 0, eps, "rows-equal")


def rows_constant(s: int, q: int, eps: float | None = None) -> CanonicalTester:
    """Accept exactly when every row is constant (support inside the two constant strings)."""
    return CanonicalTester(s, q, lambda m: 1 if all(len(set(r)) <= 1 for r in m) else 0, eps, "rows-constant")


def constant(s: int, q: int, value=1) -> CanonicalTester:
    return CanonicalTester(s, q, lambda m: value, None, f"constant-{value}")


BUILTIN_TESTERS = {"rows-equal": rows_equal, "rows-constant": rows_constant, "constant": constant}


def canonical_draw(o: HugeObjectOracle, s: int, q: int, rng: np.random.Generator) -> QueryMatrix:
    """``s`` fresh samples read at one uniform ``q``-tuple of positions (with repetition)."""
    handles = o.draw_samples(s)
    idx = rng.integers(0, o.n, size=q)
    m = o.query_many(handles, idx)
    return tuple(tuple(int(b) for b in row) for row in m)


def _row_distribution(mu: Distribution, j: Sequence[int]) -> dict:
    out: dict = {}
    for x, w in mu.items():
        key = tuple(int(x[i]) for i in j)
        out[key] = out.get(key, 0) + w
    return out


def canonical_distribution_exact(mu: Distribution, s: int, q: int, guard: int = ENUM_GUARD) -> Distribution:
    """The exact ``(s, q)``-canonical distribution of ``mu``.

    Given the index tuple the ``s`` rows are independent, so the matrix law
    is the average over ``[n]^q`` of an ``s``-fold product of row laws.
    """
    n = bit_length(mu)
    size = n**q * (len(mu) + 2 ** (s * q))
    if size > guard:
        raise TooLarge(f"{size} enumeration steps exceed the guard {guard}")
    total: dict = {}
    weight = Fraction(1, n**q) if mu.exact else 1.0 / n**q
    cache: dict = {}
    for j in itertools.product(range(n), repeat=q):
        rows = _row_distribution(mu, j)
        key = tuple(sorted(rows.items()))
        if key not in cache:
            layer = {(): 1}
            for _ in range(s):
                layer = {m + (r,): w * v for m, w in layer.items() for r, v in rows.items()}
            cache[key] = layer
        for m, w in cache[key].items():
            total[m] = total.get(m, 0) + w * weight
    return Distribution(total, check=mu.exact)


def acceptance_probability_exact(mu: Distribution, tester: CanonicalTester, guard: int = ENUM_GUARD):
    """``acc(mu) = E_{M ~ D_test}[alpha(M)]``, by enumeration."""
    d = canonical_distribution_exact(mu, tester.s, tester.q, guard)
    return sum(w * tester.alpha(m) for m, w in d.items())


def acceptance_probability_mc(o: HugeObjectOracle, tester: CanonicalTester, trials: int, rng: np.random.Generator) -> float:
    """Monte Carlo acceptance rate; spends ``trials * s * q`` queries."""
    acc = 0.0
    for _ in range(trials):
        acc += float(tester.alpha(canonical_draw(o, tester.s, tester.q, rng)))
    return acc / trials
