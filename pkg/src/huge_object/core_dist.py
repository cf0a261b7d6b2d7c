"""Finite probability distributions and their algebra.

A :class:`Distribution` is an immutable mapping from elements to strictly
positive weights, iterated in the canonical (sorted) order of its elements.
Weights are either exact rationals (``int``/``Fraction``) or floats; the
exact mode is what the brute-force oracles use, the float mode is for
statistical estimates.

Bit strings are plain ``str`` objects over ``'0'``/``'1'``, so lexicographic
order of strings is the canonical order of bit strings. Elements of product
spaces are tuples. Coordinates are 0-based throughout the API.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from pathlib import Path

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidDistribution,
    MarginalMismatch,
    PreconditionError,
    UnsupportedMass,
    ZeroMassEvent,
)

TOL = 1e-9
MAX_BITS = 63


def _exact(w) -> bool:
    return isinstance(w, Rational) and not isinstance(w, bool)


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or 'num/den' string.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(repr(float(x)))
    return Fraction(str(x).strip())


class Distribution(Mapping):
    """Finitely supported probability distribution.

    ``weights`` may be a mapping or an iterable of ``(element, weight)``
    pairs; repeated elements are merged, which makes pushforwards one-liners.
    Zero weights are dropped. Weights must sum to 1 exactly in exact mode and
    within ``1e-9`` otherwise.
    """

    __slots__ = ("_w", "_exact")

    def __init__(self, weights: Mapping | Iterable[tuple[Hashable, object]], *, check: bool = True):
        items = weights.items() if isinstance(weights, Mapping) else weights
        acc: dict = {}
        for e, w in items:
            if w < 0:
                raise InvalidDistribution(f"negative weight {w!r} for {e!r}")
            if w == 0:
                continue
            acc[e] = acc[e] + w if e in acc else w
        exact = all(_exact(w) for w in acc.values())
        if exact:
            acc = {e: Fraction(w) for e, w in acc.items()}
        else:
            acc = {e: float(w) for e, w in acc.items()}
        try:
            keys = sorted(acc)
        except TypeError as err:
            raise InvalidDistribution("elements are not mutually comparable") from err
        self._w = {k: acc[k] for k in keys}
        self._exact = exact
        if check:
            total = sum(self._w.values())
            if not self._w:
                raise InvalidDistribution("empty support")
            if exact and total != 1:
                raise InvalidDistribution(f"weights sum to {total}, not 1")
            if not exact and abs(total - 1.0) > TOL:
                raise InvalidDistribution(f"weights sum to {total!r}, not 1")

    def __getitem__(self, e):
        return self._w[e]

    def __iter__(self):
        return iter(self._w)

    def __len__(self):
        return len(self._w)

    def __repr__(self):
        body = ", ".join(f"{e!r}: {w}" for e, w in list(self._w.items())[:8])
        more = ", ..." if len(self._w) > 8 else ""
        return f"Distribution({{{body}{more}}})"

    @property
    def exact(self) -> bool:
        return self._exact

    @property
    def support(self) -> tuple:
        return tuple(self._w)

    def prob(self, e):
        return self._w.get(e, Fraction(0) if self._exact else 0.0)

    def mass(self, event: Callable[[Hashable], bool]):
        return sum((w for e, w in self._w.items() if event(e)), Fraction(0) if self._exact else 0.0)

    def map(self, f: Callable[[Hashable], Hashable]) -> Distribution:
        """Pushforward under ``f``."""
        return Distribution(((f(e), w) for e, w in self._w.items()), check=False)

    def to_float(self) -> Distribution:
        return Distribution(((e, float(w)) for e, w in self._w.items()), check=False)

    def isclose(self, other: Mapping, tol: float = TOL) -> bool:
        keys = set(self) | set(other)
        return all(abs(float(self.get(k, 0)) - float(other.get(k, 0))) <= tol for k in keys)

    def probabilities(self) -> np.ndarray:
        return np.array([float(w) for w in self._w.values()])

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw from the distribution with a caller-owned generator."""
        cdf = np.cumsum(self.probabilities())
        cdf[-1] = 1.0
        elems = self.support
        if size is None:
            return elems[int(np.searchsorted(cdf, rng.random(), side="right"))]
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return [elems[i] for i in idx]


# --------------------------------------------------------------------------
# constructors


def point_mass(e: Hashable) -> Distribution:
    return Distribution({e: Fraction(1)})


def uniform(elements: Iterable[Hashable]) -> Distribution:
    elems = list(dict.fromkeys(elements))
    w = Fraction(1, len(elems))
    return Distribution((e, w) for e in elems)


def bernoulli(p) -> Distribution:
    p = as_fraction(p) if not isinstance(p, float) else p
    return Distribution({"0": 1 - p, "1": p})


def all_bitstrings(n: int) -> list[str]:
    return [format(i, f"0{n}b") for i in range(2**n)] if n else [""]


def uniform_bits(n: int) -> Distribution:
    return uniform(all_bitstrings(n))


def product_bernoulli(ps: Sequence) -> Distribution:
    """Product of independent Bernoulli coordinates, exact when every ``p`` is."""
    ps = [p if isinstance(p, float) else as_fraction(p) for p in ps]
    layer: list[tuple[str, object]] = [("", Fraction(1))]
    for p in ps:
        nxt = []
        for prefix, w in layer:
            if p != 1:
                nxt.append((prefix + "0", w * (1 - p)))
            if p != 0:
                nxt.append((prefix + "1", w * p))
        layer = nxt
    return Distribution(layer)


def two_point(n: int) -> Distribution:
    """Uniform over the all-zeros and all-ones strings."""
    return uniform(["0" * n, "1" * n])


def product(*dists: Distribution) -> Distribution:
    """Independent product; elements are tuples."""
    layer: list[tuple[tuple, object]] = [((), Fraction(1))]
    for d in dists:
        layer = [(prefix + (e,), w * v) for prefix, w in layer for e, v in d.items()]
    return Distribution(layer)


# --------------------------------------------------------------------------
# conditioning shorthand


def restrict(d: Distribution, event: Callable[[Hashable], bool]) -> Distribution:
    """``d`` conditioned on ``event``."""
    total = d.mass(event)
    if total == 0:
        raise ZeroMassEvent("conditioning on an event of probability zero")
    return Distribution(((e, w / total) for e, w in d.items() if event(e)), check=d.exact)


def _take(e, coords: Sequence[int]):
    if isinstance(e, str):
        return "".join(e[c] for c in coords)
    return tuple(e[c] for c in coords)


def _width(d: Distribution) -> int:
    return len(next(iter(d)))


def project(d: Distribution, coords: Sequence[int]) -> Distribution:
    """Pushforward of ``d`` under restriction to ``coords`` (in the given order)."""
    coords = list(coords)
    if not coords:
        raise PreconditionError("projection needs at least one coordinate")
    width = _width(d)
    for c in coords:
        if not 0 <= c < width:
            raise IndexOutOfRange(f"coordinate {c} outside [0, {width})")
    return d.map(lambda e: _take(e, coords))


def marginal(d: Distribution, coord: int) -> Distribution:
    """Projection to a single coordinate, with unwrapped (non-tuple) elements."""
    width = _width(d)
    if not -width <= coord < width:
        raise IndexOutOfRange(f"coordinate {coord} outside [0, {width})")
    return d.map(lambda e: e[coord])


def _same(a: Distribution, b: Distribution, tol: float) -> bool:
    if a.exact and b.exact:
        return dict(a) == dict(b)
    return a.isclose(b, tol)


def join(a: Distribution, b: Distribution, left: int = -1, right: int = 0, tol: float = TOL) -> Distribution:
    """Join of ``a`` over X×Y and ``b`` over Y×Z on a shared coordinate.

    ``left``/``right`` name the unified coordinate inside the tuples of ``a``
    and ``b``. The output tuple is ``a``'s element followed by ``b``'s
    element with the unified coordinate removed.
    """
    ya, yb = marginal(a, left), marginal(b, right)
    if not _same(ya, yb, tol):
        raise MarginalMismatch("shared marginals of the joined distributions differ")
    width_b = _width(b)
    right %= width_b
    by_y: dict = {}
    for e, w in b.items():
        rest = tuple(e[i] for i in range(width_b) if i != right)
        by_y.setdefault(e[right], []).append((rest, w / yb[e[right]]))
    out = []
    for e, w in a.items():
        for rest, cw in by_y.get(e[left], ()):
            out.append((tuple(e) + rest, w * cw))
    return Distribution(out, check=a.exact and b.exact)


def adjust(target: Distribution, eta: Distribution) -> Distribution:
    """Adjustment of ``eta`` (over pairs ``(a, b)``) to the first marginal ``target``."""
    first = marginal(eta, 0)
    for a in target:
        if a not in first:
            raise UnsupportedMass(f"target puts mass on {a!r}, which eta never labels")
    out = [((a, b), target[a] * w / first[a]) for (a, b), w in eta.items() if a in target]
    return Distribution(out, check=target.exact and eta.exact)


def tv_distance(a: Mapping, b: Mapping):
    """Half the l1 distance; exact when both inputs are exact."""
    keys = set(a) | set(b)
    exact = getattr(a, "exact", False) and getattr(b, "exact", False)
    zero = Fraction(0) if exact else 0.0
    total = sum((abs(a.get(k, zero) - b.get(k, zero)) for k in keys), zero)
    return total / 2


# --------------------------------------------------------------------------
# quantization


@dataclass(frozen=True)
class QuantizedDistribution:
    """Distribution whose probabilities are integer multiples of ``1/denominator``."""

    denominator: int
    counts: Mapping

    def __post_init__(self):
        counts = {e: int(c) for e, c in sorted(self.counts.items()) if c}
        if any(c < 0 for c in counts.values()) or sum(counts.values()) != self.denominator:
            raise InvalidDistribution("counts must be nonnegative and sum to the denominator")
        object.__setattr__(self, "counts", counts)

    @property
    def rho(self) -> Fraction:
        return Fraction(1, self.denominator)

    def to_distribution(self) -> Distribution:
        return Distribution((e, Fraction(c, self.denominator)) for e, c in self.counts.items())


def denominator_of(rho) -> int:
    r = 1 / as_fraction(rho)
    if r.denominator != 1 or r < 1:
        raise PreconditionError(f"1/rho must be a positive integer, got rho={rho}")
    return int(r)


def quantize(d: Mapping, rho) -> QuantizedDistribution:
    """Round ``d`` to a ``rho``-quantized distribution.

    Walks the support in canonical order, rounding up while the running
    rounded sum does not exceed the running true sum and down otherwise.
    Every output probability is the floor or ceiling multiple of ``rho``
    of its input and the result sums to exactly one.
    """
    r = denominator_of(rho)
    true_sum = Fraction(0)
    rounded = 0
    counts = {}
    for e in sorted(d):
        p = Fraction(d[e])
        scaled = p * r
        c = math.ceil(scaled) if Fraction(rounded, r) <= true_sum else math.floor(scaled)
        counts[e] = c
        rounded += c
        true_sum += p
    return QuantizedDistribution(r, counts)


# --------------------------------------------------------------------------
# bit strings


def bit_length(d: Distribution) -> int:
    n = len(next(iter(d)))
    if any(len(x) != n for x in d):
        raise InvalidDistribution("bit strings of different lengths")
    return n


def bit_matrix(strings: Sequence[str], n: int | None = None) -> np.ndarray:
    """Stack bit strings into a ``uint8`` matrix, one row per string."""
    if n is None:
        n = len(strings[0]) if strings else 0
    if not strings:
        return np.zeros((0, n), dtype=np.uint8)
    buf = np.frombuffer("".join(strings).encode("ascii"), dtype=np.uint8)
    return (buf.reshape(len(strings), n) - ord("0")).astype(np.uint8)


def coordinate_marginals(d: Distribution) -> list:
    """``Pr[x_i = 1]`` for every coordinate ``i`` (exact when ``d`` is)."""
    n = bit_length(d)
    zero = Fraction(0) if d.exact else 0.0
    out = [zero] * n
    for x, w in d.items():
        for i, c in enumerate(x):
            if c == "1":
                out[i] += w
    return out


# --------------------------------------------------------------------------
# JSON


def _check_bits(s: str, n: int) -> str:
    if len(s) != n or set(s) - {"0", "1"}:
        raise InvalidDistribution(f"{s!r} is not a bit string of length {n}")
    return s


def from_json(obj: Mapping) -> Distribution:
    n = int(obj["n"])
    if not 0 <= n <= MAX_BITS:
        raise InvalidDistribution(f"n={n} outside [0, {MAX_BITS}]")
    entries = [(_check_bits(e["bits"], n), as_fraction(e["p"])) for e in obj["entries"]]
    return Distribution(entries)


def to_json(d: Distribution) -> dict:
    return {
        "n": bit_length(d),
        "entries": [{"bits": x, "p": str(w) if d.exact else repr(w)} for x, w in d.items()],
    }


def load_distribution(path: str | Path) -> Distribution:
    with open(path) as fh:
        return from_json(json.load(fh))


def save_distribution(d: Distribution, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json(d), fh, indent=1)


def parse_builtin(spec: str) -> Distribution:
    """Built-in distributions by name.

    ``uniform:<n>``, ``point-mass:<bits>``, ``two-point:<n>``, and
    ``product-bernoulli:<n>[:p1,p2,...]`` whose probabilities cycle through
    the given list (default ``1/4,3/4``).
    """
    name, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    if name == "uniform":
        return uniform_bits(int(parts[0]))
    if name == "point-mass":
        bits = parts[0] if parts else ""
        return point_mass(_check_bits(bits, len(bits)))
    if name == "two-point":
        return two_point(int(parts[0]))
    if name == "product-bernoulli":
        n = int(parts[0])
        ps = [as_fraction(p) for p in parts[1].split(",")] if len(parts) > 1 else [Fraction(1, 4), Fraction(3, 4)]
        return product_bernoulli([ps[i % len(ps)] for i in range(n)])
    raise PreconditionError(f"unknown built-in distribution {spec!r}")
