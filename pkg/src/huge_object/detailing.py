"""Detailings of bit-string distributions and their exact analytics.

A detailing is a joint distribution over ``(x, label)`` pairs whose string
marginal is the distribution being analyzed. Labels are tuples. Refining
by a variable set ``U`` appends ``x_U`` (a bit string, coordinates in
increasing order) to the label, so the detailing of ``mu`` defined by ``U``
has labels ``(v,)`` with ``v`` in ``{0,1}^|U|``.

Everything here is exact when the joint is exact. The index and types are
computed from integer numerators over a common denominator, grouped with
numpy, so enumerating many refinements stays cheap at desk scale.
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from fractions import Fraction

import numpy as np

from .core_dist import (
    Distribution,
    as_fraction,
    bit_length,
    bit_matrix,
    join,
    marginal,
    product,
    project,
    restrict,
    tv_distance,
)
from .errors import IndexOutOfRange, MarginalMismatch, PreconditionError, TooManySubsets, TooManyTuples
from .typedist import Implementation, TypeDistribution, flat_label

SUBSET_GUARD = 10**6
TUPLE_GUARD = 10**6


class Detailing:
    """Joint distribution over ``(bit string, label tuple)`` pairs."""

    __slots__ = ("joint", "n", "_table")

    def __init__(self, joint: Distribution, n: int | None = None):
        for x, a in joint:
            if not isinstance(a, tuple):
                raise PreconditionError("labels must be tuples")
        self.joint = joint
        self.n = bit_length(joint.map(lambda e: e[0])) if n is None else n
        self._table = None

    @classmethod
    def trivial(cls, mu: Distribution) -> Detailing:
        return cls(mu.map(lambda x: (x, ())), bit_length(mu))

    def __repr__(self):
        return f"Detailing(n={self.n}, labels={len(self.labels)}, support={len(self.joint)})"

    def __eq__(self, other):
        return isinstance(other, Detailing) and dict(self.joint) == dict(other.joint)

    def __hash__(self):
        return hash(tuple(self.joint.items()))

    @property
    def mu(self) -> Distribution:
        return self.joint.map(lambda e: e[0])

    @property
    def labels(self) -> tuple:
        """Labels of positive weight, sorted."""
        return tuple(sorted({a for _, a in self.joint}))

    def component(self, a) -> Distribution:
        """Conditional distribution of strings given label ``a``."""
        return restrict(self.joint, lambda e: e[1] == a).map(lambda e: e[0])

    def components(self) -> dict:
        return {a: self.component(a) for a in self.labels}

    def table(self) -> _Table:
        if self._table is None:
            self._table = _Table(self)
        return self._table

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "entries": [
                {"bits": x, "label": list(a), "p": str(w) if self.joint.exact else repr(w)}
                for (x, a), w in self.joint.items()
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> Detailing:
        entries = [((e["bits"], tuple(e["label"])), as_fraction(e["p"])) for e in obj["entries"]]
        return cls(Distribution(entries), int(obj["n"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


class _Table:
    """Integer-numerator view of a detailing: one row per support element."""

    def __init__(self, det: Detailing):
        items = list(det.joint.items())
        self.n = det.n
        self.exact = det.joint.exact
        self.strings = [x for (x, _), _ in items]
        self.bits = bit_matrix(self.strings, self.n)
        labels = det.labels
        self.labels = labels
        pos = {a: j for j, a in enumerate(labels)}
        self.label_ids = np.array([pos[a] for (_, a), _ in items], dtype=np.int64)
        if self.exact:
            den = 1
            for _, w in items:
                den = math.lcm(den, w.denominator)
            self.den = den
            self.num = [int(w * den) for _, w in items]
        else:
            self.den = 1
            self.num = [float(w) for _, w in items]

    def group_sums(self, keys: np.ndarray):
        """Per-group total weight and per-coordinate weight of ones.

        Returns ``(group_keys, W, S)``: ``W[g]`` is the group's numerator
        mass and ``S[g, i]`` the numerator mass with ``x_i = 1``.
        """
        uniq, inv = np.unique(keys, return_inverse=True)
        groups = len(uniq)
        if self.exact and self.den < 2**62:
            num = np.array(self.num, dtype=np.int64)
        elif self.exact:
            num = np.array(self.num, dtype=object)
        else:
            num = np.array(self.num, dtype=float)
        weights = np.zeros(groups, dtype=num.dtype)
        np.add.at(weights, inv, num)
        sums = np.zeros((groups, self.n), dtype=num.dtype)
        np.add.at(sums, inv, num[:, None] * self.bits.astype(num.dtype))
        return uniq, weights, sums

    def keys_for(self, u: Sequence[int]) -> np.ndarray:
        # label ids take up to ~20 bits, so wide U needs Python ints
        keys = self.label_ids.astype(object) if len(u) > 40 else self.label_ids.astype(np.int64)
        for c in u:
            keys = keys * 2 + self.bits[:, c]
        return keys

    def index(self, u: Sequence[int] = ()):
        _, weights, sums = self.group_sums(self.keys_for(u))
        if not self.exact:
            return float(((sums**2).sum(axis=1) / weights).sum() / self.n)
        total = Fraction(0)
        for w, row in zip(weights.tolist(), sums.tolist()):
            total += Fraction(sum(s * s for s in row), w)
        return total / (self.den * self.n)


# --------------------------------------------------------------------------
# refinements


def _check_u(u: Iterable[int], n: int) -> list[int]:
    u = sorted(set(int(i) for i in u))
    for i in u:
        if not 0 <= i < n:
            raise IndexOutOfRange(f"variable {i} outside [0, {n})")
    return u


def _take(x: str, u: Sequence[int]) -> str:
    return "".join(x[i] for i in u)


def refine_by_variables(det: Detailing, u: Iterable[int]) -> Detailing:
    """Append ``x_U`` to every label."""
    u = _check_u(u, det.n)
    return Detailing(det.joint.map(lambda e: (e[0], e[1] + (_take(e[0], u),))), det.n)


def variable_detailing(mu: Distribution, u: Iterable[int]) -> Detailing:
    """The detailing of ``mu`` defined by the variable set ``u``."""
    return refine_by_variables(Detailing.trivial(mu), u)


def weight_distribution(det: Detailing) -> Distribution:
    return det.joint.map(lambda e: e[1])


def _types_matrix(det: Detailing):
    t = det.table()
    _, weights, sums = t.group_sums(t.label_ids)
    return t, weights, sums


def variable_type(det: Detailing, i: int) -> dict:
    """``t_i`` as a mapping from positive-weight labels to ``Pr[x_i = 1]``."""
    if not 0 <= i < det.n:
        raise IndexOutOfRange(f"variable {i} outside [0, {det.n})")
    t, weights, sums = _types_matrix(det)
    return {a: _ratio(sums[g, i], weights[g], t.exact) for g, a in enumerate(t.labels)}


def _ratio(s, w, exact):
    return Fraction(int(s), int(w)) if exact else float(s) / float(w)


def variable_types(det: Detailing) -> list[tuple]:
    """All types as tuples aligned with ``det.labels``."""
    t, weights, sums = _types_matrix(det)
    w = weights.tolist()
    cols = sums.T.tolist()
    return [tuple(_ratio(s, wg, t.exact) for s, wg in zip(col, w)) for col in cols]


def implementation(det: Detailing) -> Implementation:
    """The implementation ``i -> t_i`` demonstrated by the detailing."""
    return Implementation(det.labels, variable_types(det))


def type_distribution(det: Detailing) -> TypeDistribution:
    types = variable_types(det)
    n = det.n
    w = Fraction(1, n) if det.joint.exact else 1.0 / n
    return TypeDistribution(det.labels, Distribution(((t, w) for t in types), check=det.joint.exact), n)


def flat_refinement_by_weights(det: Detailing, eta: Distribution, tol: float = 1e-9) -> Detailing:
    """``xi<eta>``: join on the label with a detailing ``eta`` of the weights over ``B``.

    ``eta`` is a distribution over pairs ``(a, b)``; the new labels are
    ``a + (b,)``.
    """
    first = marginal(eta, 0)
    weights = weight_distribution(det)
    if det.joint.exact and eta.exact:
        same = dict(first) == dict(weights)
    else:
        same = first.isclose(weights, tol)
    if not same:
        raise MarginalMismatch("eta's first marginal differs from the weight distribution")
    joined = join(det.joint, eta, left=1, right=0)
    return Detailing(joined.map(lambda e: (e[0], flat_label(e[1], e[2]))), det.n)


def flat_extension(lam: TypeDistribution, b: Iterable) -> TypeDistribution:
    return lam.flat_extension(b)


# --------------------------------------------------------------------------
# index and robustness


def index(det: Detailing):
    """Exact ``E_i E_a Pr[x_i = 1 | a]^2``."""
    return det.table().index()


def refined_index(det: Detailing, u: Iterable[int]):
    """Index of ``refine_by_variables(det, u)`` without building it."""
    return det.table().index(_check_u(u, det.n))


def count_small_subsets(n: int, k: int) -> int:
    return sum(math.comb(n, j) for j in range(min(k, n) + 1))


def small_subsets(pool: Sequence[int], k: int, include_empty: bool = True):
    """Subsets of ``pool`` with at most ``k`` elements, by size then lexicographically."""
    start = 0 if include_empty else 1
    for j in range(start, min(k, len(pool)) + 1):
        yield from itertools.combinations(pool, j)


def is_weakly_robust(det: Detailing, delta, k: int, guard: int = SUBSET_GUARD) -> bool:
    """Exact check over every ``U`` with ``|U| <= k``, the empty set included."""
    total = count_small_subsets(det.n, k)
    if total > guard:
        raise TooManySubsets(f"{total} subsets exceed the guard {guard}")
    delta = as_fraction(delta)
    base = index(det)
    threshold = base + delta if det.joint.exact else float(base) + float(delta)
    table = det.table()
    good = sum(1 for u in small_subsets(range(det.n), k) if table.index(u) < threshold)
    return good >= (1 - delta) * total


def robustness_gains(det: Detailing, k: int, guard: int = SUBSET_GUARD) -> dict:
    """Index gain of every ``U`` with ``|U| <= k``."""
    total = count_small_subsets(det.n, k)
    if total > guard:
        raise TooManySubsets(f"{total} subsets exceed the guard {guard}")
    base = index(det)
    table = det.table()
    return {frozenset(u): table.index(u) - base for u in small_subsets(range(det.n), k)}


def find_weakly_robust_exact(det: Detailing, delta, k: int, guard: int = SUBSET_GUARD) -> frozenset:
    """Greedy refinement: keep adding the first set that gains at least ``delta``.

    Candidate sets are scanned by size, then lexicographically. On return no
    set of at most ``k`` variables gains ``delta``, which is stronger than
    weak robustness.
    """
    total = count_small_subsets(det.n, k)
    if total > guard:
        raise TooManySubsets(f"{total} subsets exceed the guard {guard}")
    delta = as_fraction(delta)
    table = det.table()
    u: set[int] = set()
    while True:
        base = table.index(sorted(u))
        for v in small_subsets(range(det.n), k, include_empty=False):
            if table.index(sorted(u | set(v))) >= base + delta:
                u |= set(v)
                break
        else:
            return frozenset(u)


# --------------------------------------------------------------------------
# independence and goodness


def _independence_gap(d: Distribution, idx: Sequence[int]):
    """TV between the joint of ``idx`` and the product of its marginals."""
    joint = project(d, idx)
    margins = [marginal(joint, j) for j in range(len(idx))]
    prod = product(*margins).map("".join)
    return tv_distance(joint, prod)


def is_eps_independent(d: Distribution, tup: Sequence[int], eps) -> bool:
    """Whether a tuple of variables is ``eps``-close to independent under ``d``.

    Repeated indices are collapsed: the tuple is compared on its set of
    distinct variables, so ``(i, i)`` is always independent.
    """
    n = bit_length(d)
    distinct = sorted(set(tup))
    for i in distinct:
        if not 0 <= i < n:
            raise IndexOutOfRange(f"variable {i} outside [0, {n})")
    if len(distinct) <= 1:
        return True
    eps = as_fraction(eps) if d.exact else float(eps)
    return _independence_gap(d, distinct) <= eps


def _surjections(k: int, j: int) -> int:
    return sum((-1) ** i * math.comb(j, i) * (j - i) ** k for i in range(j + 1))


def independent_tuple_fraction(d: Distribution, k: int, eps, guard: int = TUPLE_GUARD) -> Fraction:
    """Exact fraction of the ``n^k`` ordered tuples that are ``eps``-independent."""
    n = bit_length(d)
    if n**k > guard:
        raise TooManyTuples(f"{n}^{k} tuples exceed the guard {guard}")
    good = 0
    for j in range(1, min(k, n) + 1):
        ways = _surjections(k, j)
        for s in itertools.combinations(range(n), j):
            if is_eps_independent(d, s, eps):
                good += ways
    return Fraction(good, n**k)


def good_set(det: Detailing, eps, k: int, guard: int = TUPLE_GUARD) -> list:
    eps = as_fraction(eps)
    return [a for a, comp in det.components().items() if independent_tuple_fraction(comp, k, eps, guard) >= 1 - eps]


def is_good(det: Detailing, eps, k: int, mode: str = "exact", trials: int = 200, rng: np.random.Generator | None = None,
            guard: int = TUPLE_GUARD) -> bool:
    """``(eps, k)``-goodness; ``mode="sampled"`` estimates tuple fractions by Monte Carlo."""
    weights = weight_distribution(det)
    if mode == "exact":
        good = good_set(det, eps, k, guard)
    elif mode == "sampled":
        if rng is None:
            raise PreconditionError("sampled mode needs an rng")
        good = []
        for a, comp in det.components().items():
            tuples = rng.integers(0, det.n, size=(trials, k))
            hits = sum(is_eps_independent(comp, tuple(int(i) for i in row), eps) for row in tuples)
            if hits >= (1 - float(eps)) * trials:
                good.append(a)
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    mass = sum((weights[a] for a in good), Fraction(0) if weights.exact else 0.0)
    return mass >= 1 - (as_fraction(eps) if weights.exact else float(eps))
