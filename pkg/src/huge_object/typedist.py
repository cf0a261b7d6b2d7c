"""Type vectors, type distributions and their implementations.

A type vector assigns a probability to every label of a finite label set.
It is stored as a plain tuple of values aligned with a sorted tuple of
labels, so type vectors hash and compare like any other tuple. Labels are
themselves tuples; extending a label set by ``B`` appends the ``B``
element, so ``(a, b)`` pairs become the flat label ``a + (b,)``.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .core_dist import Distribution
from .errors import DenominatorMismatch, DimensionMismatch, ImplementationMismatch

Label = tuple
TypeVector = tuple


def flat_label(a: Label, b: Hashable) -> Label:
    return tuple(a) + (b,)


@dataclass(frozen=True)
class TypeDistribution:
    """Distribution over type vectors indexed by ``labels``.

    ``n`` is the number of variables the distribution summarizes, when it
    came from a detailing or an implementation (every variable then carries
    mass exactly ``1/n``).
    """

    labels: tuple
    dist: Distribution
    n: int | None = None

    def __post_init__(self):
        labels = tuple(sorted(self.labels))
        if labels != tuple(self.labels):
            order = sorted(range(len(self.labels)), key=lambda j: self.labels[j])
            dist = self.dist.map(lambda t: tuple(t[j] for j in order))
            object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise DimensionMismatch("duplicate labels")
        for t in self.dist:
            if len(t) != len(labels):
                raise DimensionMismatch("type vector length differs from the label count")

    @classmethod
    def from_vectors(cls, labels: Sequence, weighted: Iterable[tuple[Mapping, object]], n: int | None = None):
        """Build from ``(label -> value mapping, weight)`` pairs; missing labels read 0."""
        labels = tuple(sorted(labels))
        items = [(tuple(v.get(a, 0) for a in labels), w) for v, w in weighted]
        return cls(labels, Distribution(items), n)

    def support(self) -> tuple:
        return self.dist.support

    def as_dict(self, t: TypeVector) -> dict:
        return dict(zip(self.labels, t))

    def restrict_labels(self, labels: Iterable) -> TypeDistribution:
        """Keep only the coordinates for ``labels``; labels absent here read 0."""
        labels = tuple(sorted(labels))
        pos = {a: j for j, a in enumerate(self.labels)}
        zero = Fraction(0) if self.dist.exact else 0.0
        return TypeDistribution(
            labels,
            self.dist.map(lambda t: tuple(t[pos[a]] if a in pos else zero for a in labels)),
            self.n,
        )

    def flat_extension(self, b: Iterable[Hashable]) -> TypeDistribution:
        """Copy every coordinate across ``B``: ``t'(a, b) = t(a)``."""
        b = sorted(set(b))
        labels = [flat_label(a, x) for a in self.labels for x in b]
        order = sorted(range(len(labels)), key=lambda j: labels[j])
        width = len(b)
        return TypeDistribution(
            tuple(labels[j] for j in order),
            self.dist.map(lambda t: tuple(t[j // width] for j in order)),
            self.n,
        )

    def is_quantized(self, r: int) -> bool:
        return all((Fraction(w) * r).denominator == 1 for w in self.dist.values())


def expected_l1(t: TypeVector, u: TypeVector, weights: Sequence) -> object:
    """``E_{a~eta} |t_a - u_a|`` with ``weights`` aligned to the label order."""
    return sum(w * abs(x - y) for w, x, y in zip(weights, t, u))


@dataclass(frozen=True)
class Implementation:
    """Explicit assignment of one type vector to each of the ``n`` variables."""

    labels: tuple
    assignment: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "assignment", tuple(tuple(t) for t in self.assignment))
        for t in self.assignment:
            if len(t) != len(self.labels):
                raise DimensionMismatch("type vector length differs from the label count")

    @property
    def n(self) -> int:
        return len(self.assignment)

    def __getitem__(self, i: int) -> TypeVector:
        return self.assignment[i]

    def type_distribution(self) -> TypeDistribution:
        n = self.n
        counts = Counter(self.assignment)
        return TypeDistribution(self.labels, Distribution((t, Fraction(c, n)) for t, c in counts.items()), n)

    def implements(self, lam: TypeDistribution) -> bool:
        if tuple(lam.labels) != self.labels:
            return False
        counts = Counter(self.assignment)
        return set(counts) == set(lam.dist) and all(Fraction(lam.dist[t]) * self.n == c for t, c in counts.items())


def implementation_of(lam: TypeDistribution, n: int | None = None) -> Implementation:
    """Canonical implementation: types in sorted order, each repeated ``n*Lambda(t)`` times."""
    n = lam.n if n is None else n
    if n is None:
        raise DenominatorMismatch("an implementation needs the variable count n")
    out = []
    for t, w in lam.dist.items():
        c = Fraction(w) * n
        if c.denominator != 1:
            raise DenominatorMismatch(f"Lambda is not 1/{n}-quantized")
        out.extend([t] * int(c))
    return Implementation(lam.labels, out)


@dataclass(frozen=True)
class TransferImplementation:
    """Per-variable ``(source type, target type)`` pairs."""

    labels: tuple
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "pairs", tuple((tuple(a), tuple(b)) for a, b in self.pairs))

    @property
    def n(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i: int) -> tuple[TypeVector, TypeVector]:
        return self.pairs[i]

    def source(self) -> Implementation:
        return Implementation(self.labels, [p[0] for p in self.pairs])

    def target(self) -> Implementation:
        return Implementation(self.labels, [p[1] for p in self.pairs])

    def plan(self) -> Distribution:
        n = self.n
        return Distribution((p, Fraction(1, n)) for p in self.pairs)

    def check_extends(self, h: Implementation) -> None:
        if h.labels != self.labels or h.assignment != self.source().assignment:
            raise ImplementationMismatch("first components do not match the given implementation")
